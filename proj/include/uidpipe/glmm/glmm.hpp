#pragma once

// Logistic mixed models with crossed random intercepts, fitted by maximising
// the Laplace approximation to the marginal likelihood.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uidpipe/design.hpp"

namespace uidpipe::glmm {

/// Observation -> level assignment for one grouping factor.
struct GroupingFactor {
  std::string name;
  std::vector<std::string> levels;  // sorted
  std::vector<int> index;           // per observation, into levels

  static GroupingFactor from_labels(std::string name, const std::vector<std::string>& labels);
  int level_count() const { return static_cast<int>(levels.size()); }
};

struct ModelSpec {
  std::vector<std::string> fixed_terms;    // design terms (intercept implied)
  std::vector<std::string> random_groups;  // grouping factor names
};

struct GLMMOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-4;
  double relative_tolerance = 1e-8;
  double singular_threshold = 1e-4;
  double min_log_theta = -12.0;
  double max_log_theta = 5.0;
  // Holds every theta at these values instead of estimating them.
  std::optional<std::vector<double>> fixed_theta;
  bool polish = true;  // finite-difference Newton steps after the quasi-Newton search
};

struct GLMMFit {
  std::vector<std::string> names;  // fixed-effect columns
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd vcov;
  std::vector<std::string> group_names;
  Eigen::VectorXd theta;  // random-intercept sd per grouping factor
  std::vector<Eigen::VectorXd> conditional_modes;  // per factor, level order, on the b scale
  double deviance = 0.0;  // -2 * loglik
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n = 0;
  int variance_parameters = 0;  // estimated thetas
  bool converged = false;
  bool singular = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> trace;  // objective after each accepted outer step
  std::vector<std::string> warnings;
};

/// Laplace fit for the columns of `x` (which should include an intercept
/// column). Throws ConvergenceError if the outer search exhausts its budget.
GLMMFit fit_glmm(const Eigen::MatrixXd& x, const std::vector<std::string>& names, std::span<const int> y,
                 const std::vector<GroupingFactor>& groups, const GLMMOptions& opt = {});

/// Picks spec.fixed_terms (plus intercept) from the design and the named
/// grouping factors from `available`.
GLMMFit fit_glmm(const ModelSpec& spec, const DesignMatrix& design, std::span<const int> y,
                 const std::vector<GroupingFactor>& available, const GLMMOptions& opt = {});

/// Laplace log-likelihood at fixed (beta, theta), conditional modes solved
/// internally.
double laplace_loglik(const Eigen::MatrixXd& x, std::span<const int> y, const std::vector<GroupingFactor>& groups,
                      const Eigen::VectorXd& beta, const Eigen::VectorXd& theta);

/// Marginal log-likelihood by adaptive Gauss-Hermite quadrature with
/// `nodes` points per group, for a single grouping factor.
double loglik_quadrature(const Eigen::MatrixXd& x, std::span<const int> y, const std::vector<GroupingFactor>& groups,
                         const Eigen::VectorXd& beta, const Eigen::VectorXd& theta, int nodes);

/// Gauss-Hermite rule for weight exp(-x^2) (Golub-Welsch).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
QuadratureRule gauss_hermite(int n);

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd vcov;
  double deviance = 0.0;
  int iterations = 0;
};

/// Plain logistic regression by IRLS.
LogisticFit logistic_regression(const Eigen::MatrixXd& x, std::span<const int> y, int max_iterations = 100);

struct WaldRow {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  std::string estimate_text;  // two decimals
  std::string p_text;         // "< 0.001" or "= x.xx"
};

/// Refuses (ConvergenceError) when the fit did not converge.
std::vector<WaldRow> wald(const GLMMFit& fit);
std::string format_p(double p);

struct GvifRow {
  std::string term;
  int df = 1;
  double gvif = 1.0;
  double gvif_adjusted = 1.0;  // GVIF^(1/(2 df))
};

/// Determinant-ratio GVIF per term group over the correlation matrix of the
/// given columns (intercept excluded by the caller). Throws
/// CollinearityError naming the columns involved when the correlation
/// matrix is singular.
std::vector<GvifRow> gvif(const Eigen::MatrixXd& columns, const std::vector<std::string>& column_names,
                          const std::vector<std::pair<std::string, std::vector<int>>>& term_groups);
std::vector<GvifRow> gvif(const DesignMatrix& design);

struct ComparisonRow {
  std::string label;
  double aic = 0.0;
  double bic = 0.0;
  double loglik = 0.0;
  int parameters = 0;
  bool best_aic = false;
  bool best_bic = false;
};

/// Throws ComparisonError when the fits were not made on the same n.
std::vector<ComparisonRow> compare(const std::vector<std::pair<std::string, GLMMFit>>& fits);

}  // namespace uidpipe::glmm
