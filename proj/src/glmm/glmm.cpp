#include "uidpipe/glmm/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "uidpipe/error.hpp"

namespace uidpipe::glmm {

using SpMat = Eigen::SparseMatrix<double>;

namespace {

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Objective increases below this (relative) are treated as rounding noise
// so Newton iterations can finish converging.
constexpr double kRoundoff = 1e-12;

// -2 log P(y | eta)
double devres(int y, double eta) { return 2.0 * softplus(y ? -eta : eta); }

double log_lik(int y, double eta) { return -softplus(y ? -eta : eta); }

void check_outcome(std::span<const int> y, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(y.size()) != rows) throw ArgumentError("outcome length differs from design rows");
  if (y.empty()) throw ArgumentError("no observations");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError("outcome must be 0 or 1");
}

struct Problem {
  const Eigen::MatrixXd& x;
  std::span<const int> y;
  SpMat z;
  std::vector<int> start;  // first random-effect column per factor
  std::vector<int> size;
  int q = 0;

  Eigen::VectorXd lambda(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd d(q);
    for (std::size_t f = 0; f < start.size(); ++f) d.segment(start[f], size[f]).setConstant(theta(static_cast<Eigen::Index>(f)));
    return d;
  }
};

Problem make_problem(const Eigen::MatrixXd& x, std::span<const int> y, const std::vector<GroupingFactor>& groups) {
  check_outcome(y, x.rows());
  Problem p{x, y, SpMat(x.rows(), 0), {}, {}, 0};
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& g : groups) {
    if (g.index.size() != y.size())
      throw ArgumentError("grouping factor '" + g.name + "' does not cover every observation");
    if (g.level_count() < 2) throw DataError("grouping factor '" + g.name + "' has fewer than two levels");
    p.start.push_back(p.q);
    p.size.push_back(g.level_count());
    for (std::size_t i = 0; i < g.index.size(); ++i) {
      const int lvl = g.index[i];
      if (lvl < 0 || lvl >= g.level_count()) throw ArgumentError("grouping factor '" + g.name + "' index out of range");
      trip.emplace_back(static_cast<int>(i), p.q + lvl, 1.0);
    }
    p.q += g.level_count();
  }
  p.z.resize(x.rows(), p.q);
  p.z.setFromTriplets(trip.begin(), trip.end());
  return p;
}

struct Pirls {
  double deviance = 0.0;  // sum devres + |u|^2 + log det H
  double logdet = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd eta;
};

// Conditional modes of the spherical random effects u for fixed (beta, theta)
// by damped Newton, then the Laplace deviance at the mode.
Pirls pirls(const Problem& p, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta, const Eigen::VectorXd* u0) {
  const Eigen::Index n = p.x.rows();
  const SpMat a = p.z * p.lambda(theta).asDiagonal();
  const Eigen::VectorXd offset = p.x * beta;
  Pirls r;
  r.u = u0 && u0->size() == p.q ? *u0 : Eigen::VectorXd::Zero(p.q);

  auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& eta) {
    eta = offset;
    if (p.q > 0) eta += a * u;
    double s = u.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) s += devres(p.y[static_cast<std::size_t>(i)], eta(i));
    return s;
  };

  SpMat eye(p.q, p.q);
  eye.setIdentity();
  Eigen::SimplicialLDLT<SpMat> ldlt;
  Eigen::VectorXd mu(n), w(n), eta_new;
  double obj = objective(r.u, r.eta);

  auto factor = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = sigmoid(r.eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    SpMat h = SpMat(a.transpose() * w.asDiagonal() * a) + eye;
    ldlt.compute(h);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("penalized least squares factorization failed");
  };

  if (p.q > 0) {
    for (int it = 0; it < 100; ++it) {
      factor();
      Eigen::VectorXd resid(n);
      for (Eigen::Index i = 0; i < n; ++i) resid(i) = p.y[static_cast<std::size_t>(i)] - mu(i);
      const Eigen::VectorXd grad = a.transpose() * resid - r.u;
      const Eigen::VectorXd delta = ldlt.solve(grad);
      const double decrement = delta.dot(grad);
      if (decrement < 1e-20 * std::max(1.0, obj) || delta.cwiseAbs().maxCoeff() < 1e-13) break;
      double step = 1.0;
      bool moved = false;
      for (int half = 0; half < 40; ++half, step *= 0.5) {
        Eigen::VectorXd cand = r.u + step * delta;
        const double o = objective(cand, eta_new);
        if (o <= obj + kRoundoff * std::max(1.0, obj)) {
          moved = true;
          r.u = std::move(cand);
          r.eta = eta_new;
          obj = o;
          break;
        }
      }
      if (!moved) break;
    }
    factor();
    r.logdet = ldlt.vectorD().array().log().sum();
  }
  r.deviance = obj + r.logdet;
  return r;
}

// Information for beta with u profiled out: X'WX - B' H^-1 B, B = A'WX.
Eigen::MatrixXd fixed_information(const Problem& p, const Eigen::VectorXd& theta, const Eigen::VectorXd& eta) {
  const Eigen::Index n = p.x.rows();
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = sigmoid(eta(i));
    w(i) = m * (1.0 - m);
  }
  Eigen::MatrixXd wx = w.asDiagonal() * p.x;
  Eigen::MatrixXd info = p.x.transpose() * wx;
  if (p.q == 0) return info;
  const SpMat a = p.z * p.lambda(theta).asDiagonal();
  SpMat eye(p.q, p.q);
  eye.setIdentity();
  SpMat h = SpMat(a.transpose() * w.asDiagonal() * a) + eye;
  Eigen::SimplicialLDLT<SpMat> ldlt(h);
  Eigen::MatrixXd b = a.transpose() * wx;
  Eigen::MatrixXd hb = ldlt.solve(b);
  info -= b.transpose() * hb;
  return info;
}

void require_full_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(x);
  lu.setThreshold(1e-10);
  if (lu.rank() == x.cols()) return;
  Eigen::MatrixXd ker = lu.kernel();
  std::set<std::string> cols;
  for (Eigen::Index j = 0; j < ker.rows(); ++j)
    for (Eigen::Index c = 0; c < ker.cols(); ++c)
      if (std::abs(ker(j, c)) > 1e-8) cols.insert(names[static_cast<std::size_t>(j)]);
  std::string list;
  for (const auto& c : cols) list += (list.empty() ? "" : ", ") + c;
  throw CollinearityError("fixed-effects design is rank deficient; dependent columns: " + list);
}

}  // namespace

GroupingFactor GroupingFactor::from_labels(std::string name, const std::vector<std::string>& labels) {
  GroupingFactor g;
  g.name = std::move(name);
  std::set<std::string> uniq(labels.begin(), labels.end());
  g.levels.assign(uniq.begin(), uniq.end());
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < g.levels.size(); ++i) pos[g.levels[i]] = static_cast<int>(i);
  g.index.reserve(labels.size());
  for (const auto& l : labels) g.index.push_back(pos[l]);
  return g;
}

LogisticFit logistic_regression(const Eigen::MatrixXd& x, std::span<const int> y, int max_iterations) {
  check_outcome(y, x.rows());
  const Eigen::Index n = x.rows();
  LogisticFit fit;
  fit.beta = Eigen::VectorXd::Zero(x.cols());
  auto deviance = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = x * b;
    double d = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) d += devres(y[static_cast<std::size_t>(i)], eta(i));
    return d;
  };
  double dev = deviance(fit.beta);
  Eigen::VectorXd w(n), r(n);
  for (fit.iterations = 1; fit.iterations <= max_iterations; ++fit.iterations) {
    Eigen::VectorXd eta = x * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = sigmoid(eta(i));
      w(i) = m * (1.0 - m);
      r(i) = y[static_cast<std::size_t>(i)] - m;
    }
    Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw CollinearityError("logistic regression information matrix is singular");
    Eigen::VectorXd grad = x.transpose() * r;
    Eigen::VectorXd delta = ldlt.solve(grad);
    if (delta.dot(grad) < 1e-20 * std::max(1.0, dev) || delta.cwiseAbs().maxCoeff() < 1e-13) break;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      Eigen::VectorXd cand = fit.beta + step * delta;
      double d = deviance(cand);
      if (d <= dev + kRoundoff * std::max(1.0, dev)) {
        moved = true;
        fit.beta = cand;
        dev = d;
        break;
      }
    }
    if (!moved) break;
  }
  if (fit.iterations > max_iterations)
    throw ConvergenceError(fmt::format("logistic regression did not converge in {} iterations", max_iterations));
  Eigen::VectorXd eta = x * fit.beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = sigmoid(eta(i));
    w(i) = m * (1.0 - m);
  }
  Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
  fit.vcov = info.ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  fit.se = fit.vcov.diagonal().array().sqrt();
  fit.deviance = dev;
  return fit;
}

double laplace_loglik(const Eigen::MatrixXd& x, std::span<const int> y, const std::vector<GroupingFactor>& groups,
                      const Eigen::VectorXd& beta, const Eigen::VectorXd& theta) {
  const Problem p = make_problem(x, y, groups);
  if (beta.size() != x.cols() || theta.size() != static_cast<Eigen::Index>(groups.size()))
    throw ArgumentError("parameter lengths do not match the model");
  return -0.5 * pirls(p, beta, theta, nullptr).deviance;
}

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw ArgumentError("quadrature needs at least one node");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  QuadratureRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

double loglik_quadrature(const Eigen::MatrixXd& x, std::span<const int> y, const std::vector<GroupingFactor>& groups,
                         const Eigen::VectorXd& beta, const Eigen::VectorXd& theta, int nodes) {
  if (groups.size() != 1) throw ConfigError("quadrature supports exactly one grouping factor");
  check_outcome(y, x.rows());
  if (beta.size() != x.cols() || theta.size() != 1) throw ArgumentError("parameter lengths do not match the model");
  const auto& g = groups.front();
  if (g.index.size() != y.size()) throw ArgumentError("grouping factor does not cover every observation");
  const double th = theta(0);
  if (th < 0) throw ArgumentError("theta must be non-negative");
  const QuadratureRule rule = gauss_hermite(nodes);
  const Eigen::VectorXd offset = x * beta;

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(g.level_count()));
  for (std::size_t i = 0; i < g.index.size(); ++i) members[static_cast<std::size_t>(g.index[i])].push_back(i);

  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (const auto& m : members) {
    auto f = [&](double u) {
      double s = -0.5 * u * u - half_log_2pi;
      for (auto i : m) s += log_lik(y[i], offset(static_cast<Eigen::Index>(i)) + th * u);
      return s;
    };
    auto curvature = [&](double u, double& slope) {
      double sw = 0.0;
      slope = -u;
      for (auto i : m) {
        const double mu = sigmoid(offset(static_cast<Eigen::Index>(i)) + th * u);
        slope += th * (y[i] - mu);
        sw += mu * (1.0 - mu);
      }
      return th * th * sw + 1.0;
    };
    double u = 0.0, fu = f(u);
    for (int it = 0; it < 200; ++it) {
      double slope = 0.0;
      const double c = curvature(u, slope);
      const double step = slope / c;
      if (std::abs(step) < 1e-14) break;
      double t = 1.0;
      bool moved = false;
      for (int half = 0; half < 60; ++half, t *= 0.5) {
        const double cand = u + t * step;
        const double fc = f(cand);
        if (fc >= fu - kRoundoff * std::max(1.0, std::abs(fu))) {
          moved = true;
          u = cand;
          fu = fc;
          break;
        }
      }
      if (!moved) break;
    }
    double slope = 0.0;
    const double sigma = 1.0 / std::sqrt(curvature(u, slope));
    std::vector<double> terms(static_cast<std::size_t>(nodes));
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < nodes; ++k) {
      const double z = rule.nodes(k);
      terms[static_cast<std::size_t>(k)] = std::log(rule.weights(k)) + z * z + f(u + std::sqrt(2.0) * sigma * z);
      top = std::max(top, terms[static_cast<std::size_t>(k)]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - top);
    total += std::log(std::sqrt(2.0) * sigma) + top + std::log(acc);
  }
  return total;
}

GLMMFit fit_glmm(const Eigen::MatrixXd& x, const std::vector<std::string>& names, std::span<const int> y,
                 const std::vector<GroupingFactor>& groups, const GLMMOptions& opt) {
  if (names.size() != static_cast<std::size_t>(x.cols())) throw ArgumentError("column names do not match the design");
  const Problem prob = make_problem(x, y, groups);
  require_full_rank(x, names);
  const int p = static_cast<int>(x.cols());
  const int nf = static_cast<int>(groups.size());

  Eigen::VectorXd theta = Eigen::VectorXd::Ones(nf);
  std::vector<int> free_theta;
  if (opt.fixed_theta) {
    if (static_cast<int>(opt.fixed_theta->size()) != nf) throw ArgumentError("fixed_theta length differs from groups");
    for (int f = 0; f < nf; ++f) {
      theta(f) = (*opt.fixed_theta)[static_cast<std::size_t>(f)];
      if (theta(f) < 0) throw ArgumentError("theta must be non-negative");
    }
  } else {
    for (int f = 0; f < nf; ++f) free_theta.push_back(f);
  }
  const int d = p + static_cast<int>(free_theta.size());

  const LogisticFit start = logistic_regression(x, y);
  Eigen::VectorXd xi(d);
  xi.head(p) = start.beta;
  for (int j = p; j < d; ++j) xi(j) = 0.0;  // log theta = 0

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  lower.tail(d - p).setConstant(opt.min_log_theta);
  upper.tail(d - p).setConstant(opt.max_log_theta);

  Eigen::VectorXd u_cache;
  auto unpack = [&](const Eigen::VectorXd& v, Eigen::VectorXd& beta, Eigen::VectorXd& th) {
    beta = v.head(p);
    th = theta;
    for (std::size_t k = 0; k < free_theta.size(); ++k)
      th(free_theta[k]) = std::exp(v(p + static_cast<Eigen::Index>(k)));
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd beta, th;
    unpack(v, beta, th);
    Pirls r = pirls(prob, beta, th, &u_cache);
    u_cache = r.u;
    return r.deviance;
  };
  auto step_size = [](double v) { return 1e-5 * std::max(1.0, std::abs(v)); };
  auto gradient = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd g(d);
    for (int j = 0; j < d; ++j) {
      const double h = step_size(v(j));
      Eigen::VectorXd a = v, b = v;
      a(j) += h;
      b(j) -= h;
      g(j) = (objective(a) - objective(b)) / (2.0 * h);
    }
    return g;
  };
  auto hessian = [&](const Eigen::VectorXd& v, double f0) {
    Eigen::MatrixXd hm(d, d);
    Eigen::VectorXd h(d);
    for (int j = 0; j < d; ++j) h(j) = 1e-4 * std::max(1.0, std::abs(v(j)));
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd a = v, b = v;
      a(i) += 2 * h(i);
      b(i) -= 2 * h(i);
      hm(i, i) = (objective(a) - 2 * f0 + objective(b)) / (4 * h(i) * h(i));
      for (int j = 0; j < i; ++j) {
        Eigen::VectorXd pp = v, pm = v, mp = v, mm = v;
        pp(i) += h(i), pp(j) += h(j);
        pm(i) += h(i), pm(j) -= h(j);
        mp(i) -= h(i), mp(j) += h(j);
        mm(i) -= h(i), mm(j) -= h(j);
        hm(i, j) = hm(j, i) = (objective(pp) - objective(pm) - objective(mp) + objective(mm)) / (4 * h(i) * h(j));
      }
    }
    return hm;
  };
  // Coordinates pinned at a bound with the gradient pushing outward.
  auto free_mask = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    std::vector<int> idx;
    for (int j = 0; j < d; ++j) {
      const bool at_lower = v(j) <= lower(j) + 1e-12 && g(j) > 0;
      const bool at_upper = v(j) >= upper(j) - 1e-12 && g(j) < 0;
      if (!at_lower && !at_upper) idx.push_back(j);
    }
    return idx;
  };
  auto projected_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    double s = 0.0;
    for (int j : free_mask(v, g)) s = std::max(s, std::abs(g(j)));
    return s;
  };
  auto inverse_or_diagonal = [&](const Eigen::MatrixXd& hm) -> Eigen::MatrixXd {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() > 1e-8 * std::max(1.0, ev.maxCoeff()))
      return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd diag = hm.diagonal().cwiseAbs().cwiseMax(1.0);
    return diag.cwiseInverse().asDiagonal();
  };

  GLMMFit fit;
  double f = objective(xi);
  Eigen::VectorXd g = gradient(xi);
  Eigen::MatrixXd hinv = inverse_or_diagonal(hessian(xi, f));
  fit.trace.push_back(f);
  double last_change = std::numeric_limits<double>::infinity();
  bool restarted = false;

  for (fit.iterations = 0; fit.iterations < opt.max_iterations; ++fit.iterations) {
    const double gnorm = projected_norm(xi, g);
    if (gnorm < opt.gradient_tolerance && last_change < opt.relative_tolerance) {
      fit.converged = true;
      break;
    }
    const auto idx = free_mask(xi, g);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(d);
    for (int a : idx)
      for (int b : idx) dir(a) -= hinv(a, b) * g(b);
    double slope = g.dot(dir);
    if (slope >= 0) {
      hinv = inverse_or_diagonal(hessian(xi, f));
      dir.setZero();
      for (int a : idx)
        for (int b : idx) dir(a) -= hinv(a, b) * g(b);
      slope = g.dot(dir);
      if (slope >= 0) dir = -g, slope = -g.squaredNorm();
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd next;
    double f_next = f;
    for (int half = 0; half < 50; ++half, t *= 0.5) {
      next = (xi + t * dir).cwiseMax(lower).cwiseMin(upper);
      f_next = objective(next);
      if (std::isfinite(f_next) && f_next <= f + 1e-4 * g.dot(next - xi)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (gnorm < opt.gradient_tolerance) {
        fit.converged = true;
        break;
      }
      if (restarted) break;
      restarted = true;
      hinv = inverse_or_diagonal(hessian(xi, f));
      continue;
    }
    restarted = false;
    const Eigen::VectorXd g_next = gradient(next);
    const Eigen::VectorXd s = next - xi;
    const Eigen::VectorXd yv = g_next - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
      hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    last_change = std::abs(f - f_next) / std::max(1.0, std::abs(f));
    xi = next;
    f = f_next;
    g = g_next;
    fit.trace.push_back(f);
  }

  if (!fit.converged) {
    std::string tail;
    const std::size_t from = fit.trace.size() > 5 ? fit.trace.size() - 5 : 0;
    for (std::size_t k = from; k < fit.trace.size(); ++k) tail += fmt::format(" {:.6f}", fit.trace[k]);
    throw ConvergenceError(fmt::format("GLMM did not converge after {} iterations (gradient norm {:.3g}); last deviances:{}",
                                       fit.iterations, projected_norm(xi, g), tail));
  }

  // On the log scale the objective flattens as theta -> 0, so a small theta
  // can pass the gradient test short of the boundary. Try the boundary.
  for (int j = p; j < d; ++j) {
    if (xi(j) <= lower(j) || std::exp(xi(j)) >= 1e-2) continue;
    Eigen::VectorXd cand = xi;
    cand(j) = lower(j);
    const double fc = objective(cand);
    if (fc <= f) {
      xi = cand;
      f = fc;
      g = gradient(xi);
    }
  }

  if (opt.polish) {
    for (int k = 0; k < 3; ++k) {
      const double gnorm = projected_norm(xi, g);
      if (gnorm < 1e-9) break;
      const auto idx = free_mask(xi, g);
      const Eigen::MatrixXd hm = hessian(xi, f);
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd hs(m, m);
      Eigen::VectorXd gs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gs(a) = g(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) hs(a, b) = hm(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(gs);
      Eigen::VectorXd cand = xi;
      for (Eigen::Index a = 0; a < m; ++a) cand(idx[static_cast<std::size_t>(a)]) -= step(a);
      cand = cand.cwiseMax(lower).cwiseMin(upper);
      const double fc = objective(cand);
      const Eigen::VectorXd gc = gradient(cand);
      if (!(projected_norm(cand, gc) < gnorm) || fc > f + 1e-9 * std::max(1.0, std::abs(f))) break;
      xi = cand;
      f = fc;
      g = gc;
    }
  }

  Eigen::VectorXd beta, th;
  unpack(xi, beta, th);
  const Pirls final_state = pirls(prob, beta, th, &u_cache);
  fit.names = names;
  fit.beta = beta;
  fit.theta = th;
  for (int f2 = 0; f2 < nf; ++f2) {
    fit.group_names.push_back(groups[static_cast<std::size_t>(f2)].name);
    fit.conditional_modes.push_back(th(f2) * final_state.u.segment(prob.start[static_cast<std::size_t>(f2)],
                                                                 prob.size[static_cast<std::size_t>(f2)]));
  }
  fit.deviance = final_state.deviance;
  fit.loglik = -0.5 * fit.deviance;
  fit.n = y.size();
  fit.variance_parameters = static_cast<int>(free_theta.size());
  const double k = p + fit.variance_parameters;
  fit.aic = 2.0 * k + fit.deviance;
  fit.bic = k * std::log(static_cast<double>(fit.n)) + fit.deviance;
  fit.gradient_norm = projected_norm(xi, g);

  const Eigen::MatrixXd info = fixed_information(prob, th, final_state.eta);
  Eigen::LDLT<Eigen::MatrixXd> ildlt(info);
  if (ildlt.info() != Eigen::Success || !ildlt.isPositive())
    throw CollinearityError("fixed-effect information matrix is not positive definite");
  fit.vcov = ildlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.se = fit.vcov.diagonal().array().sqrt();

  for (int f2 : free_theta) {
    if (th(f2) < opt.singular_threshold) {
      fit.singular = true;
      fit.warnings.push_back(fmt::format("singular fit: random intercept sd for '{}' is {:.3g}",
                                         groups[static_cast<std::size_t>(f2)].name, th(f2)));
    }
  }
  return fit;
}

GLMMFit fit_glmm(const ModelSpec& spec, const DesignMatrix& design, std::span<const int> y,
                 const std::vector<GroupingFactor>& available, const GLMMOptions& opt) {
  const DesignMatrix sub = design.select_terms(spec.fixed_terms);
  std::vector<GroupingFactor> groups;
  for (const auto& name : spec.random_groups) {
    auto it = std::find_if(available.begin(), available.end(), [&](const GroupingFactor& g) { return g.name == name; });
    if (it == available.end()) throw ArgumentError("no grouping factor '" + name + "'");
    groups.push_back(*it);
  }
  return fit_glmm(sub.values, sub.column_names, y, groups, opt);
}

std::string format_p(double p) {
  if (p < 0.001) return "< 0.001";
  return fmt::format("= {:.2f}", p);
}

std::vector<WaldRow> wald(const GLMMFit& fit) {
  if (!fit.converged) throw ConvergenceError("refusing Wald tests on a fit that did not converge");
  std::vector<WaldRow> rows;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    WaldRow r;
    r.term = fit.names[static_cast<std::size_t>(j)];
    r.estimate = fit.beta(j);
    r.se = fit.se(j);
    r.z = r.estimate / r.se;
    r.p = std::erfc(std::abs(r.z) / std::numbers::sqrt2);
    r.estimate_text = fmt::format("{:.2f}", r.estimate);
    r.p_text = format_p(r.p);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<GvifRow> gvif(const Eigen::MatrixXd& columns, const std::vector<std::string>& column_names,
                          const std::vector<std::pair<std::string, std::vector<int>>>& term_groups) {
  const Eigen::Index m = columns.cols();
  if (column_names.size() != static_cast<std::size_t>(m)) throw ArgumentError("column names do not match columns");
  if (columns.rows() < 2) throw ArgumentError("GVIF needs at least two rows");
  Eigen::MatrixXd centered = columns.rowwise() - columns.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm();
  for (Eigen::Index j = 0; j < m; ++j)
    if (norms(j) <= 1e-12 * std::max(1.0, columns.col(j).cwiseAbs().maxCoeff()))
      throw CollinearityError("column '" + column_names[static_cast<std::size_t>(j)] + "' is constant");
  Eigen::MatrixXd zc = centered * norms.cwiseInverse().asDiagonal();
  Eigen::MatrixXd r = zc.transpose() * zc;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
  lu.setThreshold(1e-10);
  if (lu.rank() < m) {
    Eigen::MatrixXd ker = lu.kernel();
    std::string list;
    for (Eigen::Index j = 0; j < m; ++j) {
      bool involved = false;
      for (Eigen::Index c = 0; c < ker.cols(); ++c) involved |= std::abs(ker(j, c)) > 1e-8;
      if (involved) list += (list.empty() ? "" : ", ") + column_names[static_cast<std::size_t>(j)];
    }
    throw CollinearityError("correlation matrix is singular; dependent columns: " + list);
  }
  const double det_all = r.determinant();

  std::vector<GvifRow> out;
  for (const auto& [term, cols] : term_groups) {
    std::vector<int> rest;
    for (int j = 0; j < m; ++j)
      if (std::find(cols.begin(), cols.end(), j) == cols.end()) rest.push_back(j);
    auto det_of = [&](const std::vector<int>& idx) { return idx.empty() ? 1.0 : Eigen::MatrixXd(r(idx, idx)).determinant(); };
    GvifRow row;
    row.term = term;
    row.df = static_cast<int>(cols.size());
    row.gvif = det_of(cols) * det_of(rest) / det_all;
    row.gvif_adjusted = std::pow(row.gvif, 1.0 / (2.0 * row.df));
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<GvifRow> gvif(const DesignMatrix& design) {
  std::vector<int> keep;
  std::vector<std::string> names;
  for (int j = 0; j < static_cast<int>(design.cols()); ++j) {
    if (design.column_names[static_cast<std::size_t>(j)] == "(Intercept)") continue;
    keep.push_back(j);
    names.push_back(design.column_names[static_cast<std::size_t>(j)]);
  }
  std::map<int, int> remap;
  for (std::size_t k = 0; k < keep.size(); ++k) remap[keep[k]] = static_cast<int>(k);
  std::vector<std::pair<std::string, std::vector<int>>> groups;
  for (const auto& [term, cols] : design.term_columns) {
    std::vector<int> mapped;
    for (int c : cols) mapped.push_back(remap.at(c));
    groups.emplace_back(term, mapped);
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.second.front() < b.second.front(); });
  Eigen::MatrixXd cols = design.values(Eigen::all, keep);
  return gvif(cols, names, groups);
}

std::vector<ComparisonRow> compare(const std::vector<std::pair<std::string, GLMMFit>>& fits) {
  if (fits.empty()) throw ArgumentError("nothing to compare");
  std::vector<ComparisonRow> rows;
  for (const auto& [label, fit] : fits) {
    if (fit.n != fits.front().second.n)
      throw ComparisonError(fmt::format("model '{}' was fitted on {} observations, '{}' on {}", label, fit.n,
                                        fits.front().first, fits.front().second.n));
    ComparisonRow r;
    r.label = label;
    r.aic = fit.aic;
    r.bic = fit.bic;
    r.loglik = fit.loglik;
    r.parameters = static_cast<int>(fit.beta.size()) + fit.variance_parameters;
    rows.push_back(std::move(r));
  }
  auto best_aic = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.aic < b.aic; });
  auto best_bic = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.bic < b.bic; });
  for (auto& r : rows) {
    r.best_aic = r.aic == best_aic->aic;
    r.best_bic = r.bic == best_bic->bic;
  }
  return rows;
}

}  // namespace uidpipe::glmm
