#include "uidpipe/ml/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "uidpipe/error.hpp"
#include "uidpipe/rng.hpp"

namespace uidpipe::ml {

namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.rows());
  Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::VectorXd yc = y.array() - y.mean();
  return (xc.transpose() * yc).cwiseAbs().maxCoeff() / n;
}

LassoFit lasso_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const LassoOptions& opt, const Eigen::VectorXd* warm) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n == 0 || y.size() != n) throw ArgumentError("lasso: X and y differ in rows");
  if (lambda < 0) throw ArgumentError("lasso: lambda must be non-negative");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const double nn = static_cast<double>(n);
  const Eigen::VectorXd col_sq = xc.colwise().squaredNorm().transpose() / nn;

  LassoFit fit;
  fit.coef = warm && warm->size() == p ? *warm : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = (y.array() - y_mean).matrix() - xc * fit.coef;

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) <= 0.0) {
        fit.coef(j) = 0.0;
        continue;
      }
      const double old = fit.coef(j);
      const double rho = xc.col(j).dot(resid) / nn + col_sq(j) * old;
      const double updated = soft_threshold(rho, lambda) / col_sq(j);
      if (updated != old) {
        resid -= (updated - old) * xc.col(j);
        fit.coef(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old) * std::sqrt(col_sq(j)));
      }
    }
    fit.sweeps = sweep;
    if (max_change < opt.tolerance) {
      fit.intercept = y_mean - x_mean.dot(fit.coef);
      return fit;
    }
  }
  throw ConvergenceError(fmt::format("lasso did not converge in {} sweeps (lambda {}, residual norm {})",
                                     opt.max_sweeps, lambda, resid.norm()));
}

LassoResult lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  std::vector<double> lambda_grid, const LassoOptions& opt) {
  const auto n = x.rows();
  if (n < opt.folds) throw ArgumentError("lasso: fewer rows than folds");
  if (lambda_grid.empty()) {
    const double top = lasso_lambda_max(x, y);
    for (int i = 0; i < 100; ++i) lambda_grid.push_back(top * std::pow(1e-3, i / 99.0));
  }
  std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());

  LassoResult res;
  res.lambda_grid = lambda_grid;
  res.cv_mse.assign(lambda_grid.size(), 0.0);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(opt.seed, 77));
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i)
    fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(opt.folds));

  for (int f = 0; f < opt.folds; ++f) {
    std::vector<Eigen::Index> tr, va;
    for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? va : tr).push_back(i);
    Eigen::MatrixXd xt = x(tr, Eigen::all), xv = x(va, Eigen::all);
    Eigen::VectorXd yt = y(tr), yv = y(va);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
      auto fit = lasso_fixed(xt, yt, lambda_grid[l], opt, &warm);
      warm = fit.coef;
      Eigen::VectorXd pred = (xv * fit.coef).array() + fit.intercept;
      res.cv_mse[l] += (yv - pred).squaredNorm() / static_cast<double>(n);
    }
  }

  Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
  std::vector<double> intercepts;
  for (double lambda : lambda_grid) {
    auto fit = lasso_fixed(x, y, lambda, opt, &warm);
    warm = fit.coef;
    res.path.push_back(fit.coef);
    intercepts.push_back(fit.intercept);
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(res.cv_mse.begin(), res.cv_mse.end()) - res.cv_mse.begin());
  res.lambda = lambda_grid[best];
  res.coef = res.path[best];
  res.intercept = intercepts[best];
  for (Eigen::Index j = 0; j < res.coef.size(); ++j)
    if (res.coef(j) != 0.0) res.selected.push_back(static_cast<int>(j));
  return res;
}

}  // namespace uidpipe::ml
