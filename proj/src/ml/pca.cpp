#include "uidpipe/ml/pca.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "uidpipe/error.hpp"

namespace uidpipe::ml {

PCAModel pca_fit(const Eigen::MatrixXd& x, int k) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (k < 1) throw ArgumentError("pca_fit needs k >= 1");
  if (n <= k) throw ArgumentError(fmt::format("pca_fit needs more rows ({}) than k ({})", n, k));
  if (!x.allFinite()) throw ArgumentError("pca_fit input has non-finite values");

  PCAModel m;
  m.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  const double tol = static_cast<double>(std::max(n, p)) *
                     std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  if (rank == 0) throw ArgumentError("pca_fit input has zero variance");
  if (k > rank) {
    m.warnings.push_back(fmt::format("requested {} components but data rank is {}; using {}", k,
                                     rank, rank));
    k = rank;
  }

  const double total = s.squaredNorm();
  m.components = svd.matrixV().leftCols(k).transpose();
  m.explained_variance_ratio = s.head(k).array().square() / total;
  // Sign convention: the largest-magnitude loading of each component is positive.
  for (int i = 0; i < k; ++i) {
    Eigen::Index arg;
    m.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (m.components(i, arg) < 0) m.components.row(i) *= -1.0;
  }
  if (k == 50 && m.explained_variance_ratio.sum() < 0.99) {
    m.warnings.push_back(fmt::format("50 components retain only {:.4f} of the variance",
                                     m.explained_variance_ratio.sum()));
  }
  return m;
}

Eigen::MatrixXd pca_transform(const PCAModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.mean.size()) throw ArgumentError("pca_transform dimension mismatch");
  return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

Eigen::MatrixXd pca_inverse_transform(const PCAModel& m, const Eigen::MatrixXd& scores) {
  if (scores.cols() != m.components.rows()) throw ArgumentError("pca_inverse_transform dimension mismatch");
  return (scores * m.components).rowwise() + m.mean.transpose();
}

}  // namespace uidpipe::ml
