#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uidpipe::ml {

struct PCAModel {
  Eigen::VectorXd mean;                      // p
  Eigen::MatrixXd components;                // k x p, orthonormal rows
  Eigen::VectorXd explained_variance_ratio;  // k, non-increasing
  std::vector<std::string> warnings;

  int dims() const { return static_cast<int>(components.rows()); }
};

/// Principal directions of the mean-centred data via SVD. A request beyond
/// the numerical rank is reduced to the rank (with a warning), and k = 50
/// retaining less than 99% of the variance is flagged.
PCAModel pca_fit(const Eigen::MatrixXd& x, int k);

Eigen::MatrixXd pca_transform(const PCAModel& m, const Eigen::MatrixXd& x);
Eigen::MatrixXd pca_inverse_transform(const PCAModel& m, const Eigen::MatrixXd& scores);

}  // namespace uidpipe::ml
