#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace uidpipe::ml {

struct LassoOptions {
  int max_sweeps = 100000;
  double tolerance = 1e-10;  // max coefficient change, scaled by column norm
  int folds = 5;
  std::uint64_t seed = 0;
};

/// Coefficients minimising (1/2n)||y - b0 - X b||^2 + lambda ||b||_1 for a
/// fixed lambda, by cyclic coordinate descent with soft-thresholding. The
/// intercept is unpenalised. `warm` seeds the coefficients.
struct LassoFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  int sweeps = 0;
};
LassoFit lasso_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const LassoOptions& opt = {}, const Eigen::VectorXd* warm = nullptr);

/// Smallest lambda at which every coefficient is zero: max|Xc' yc| / n.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct LassoResult {
  Eigen::VectorXd coef;  // at the chosen lambda, fitted on all rows
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<int> selected;  // indices with nonzero coefficients
  std::vector<double> lambda_grid;    // descending
  std::vector<double> cv_mse;         // aligned with lambda_grid
  std::vector<Eigen::VectorXd> path;  // full-data coefficients per lambda
};

/// Fits the whole (descending) grid with warm starts and picks lambda by
/// k-fold cross-validated squared error. An empty grid means 100 values
/// log-spaced from lambda_max down to lambda_max / 1000.
LassoResult lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  std::vector<double> lambda_grid, const LassoOptions& opt = {});

}  // namespace uidpipe::ml
