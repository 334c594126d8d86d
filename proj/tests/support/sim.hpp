#pragma once

// Data generators shared by the unit and acceptance tests.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uidpipe/glmm/glmm.hpp"
#include "uidpipe/rng.hpp"

namespace uidpipe::testing {

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct GroupedData {
  Eigen::MatrixXd x;  // intercept + covariates
  std::vector<std::string> names;
  std::vector<int> y;
  std::vector<glmm::GroupingFactor> groups;
};

/// y ~ Bernoulli(logistic(b0 + b1 x + u_g)), u_g ~ N(0, theta^2), x ~ N(0, 1),
/// observations dealt to groups round-robin.
inline GroupedData simulate_random_intercepts(int n, int n_groups, double b0, double b1, double theta,
                                              std::uint64_t seed) {
  Rng rng(seed);
  GroupedData d;
  d.x.resize(n, 2);
  d.names = {"(Intercept)", "x"};
  std::vector<double> u(static_cast<std::size_t>(n_groups));
  for (auto& v : u) v = theta * rng.normal();
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) {
    const int g = i % n_groups;
    d.x(i, 0) = 1.0;
    d.x(i, 1) = rng.normal();
    const double eta = b0 + b1 * d.x(i, 1) + u[static_cast<std::size_t>(g)];
    d.y.push_back(rng.bernoulli(logistic(eta)) ? 1 : 0);
    labels.push_back("g" + std::to_string(1000 + g));
  }
  d.groups.push_back(glmm::GroupingFactor::from_labels("group", labels));
  return d;
}

}  // namespace uidpipe::testing

namespace uidpipe::testing {

/// No between-group variation at all: every group receives the same block of
/// (x, y) pairs drawn from a plain logistic model.
inline GroupedData simulate_replicated_groups(int block, int n_groups, double b0, double b1, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs;
  std::vector<int> ys;
  for (int i = 0; i < block; ++i) {
    xs.push_back(rng.normal());
    ys.push_back(rng.bernoulli(logistic(b0 + b1 * xs.back())) ? 1 : 0);
  }
  GroupedData d;
  d.names = {"(Intercept)", "x"};
  d.x.resize(block * n_groups, 2);
  std::vector<std::string> labels;
  for (int g = 0; g < n_groups; ++g) {
    for (int i = 0; i < block; ++i) {
      const int r = g * block + i;
      d.x(r, 0) = 1.0;
      d.x(r, 1) = xs[static_cast<std::size_t>(i)];
      d.y.push_back(ys[static_cast<std::size_t>(i)]);
      labels.push_back("g" + std::to_string(1000 + g));
    }
  }
  d.groups.push_back(glmm::GroupingFactor::from_labels("group", labels));
  return d;
}

/// Verb/speaker crossed data with a per-observation "density" predictor.
/// within_sd = 0: density is a pure function of the verb, and the verb
/// intercepts correlate with it (exactly `verb_corr` in sample) while the
/// outcome has no direct density effect.
/// within_sd > 0: density varies inside each verb and has true effect
/// `density_beta`; verb intercepts are independent of it.
struct ConfoundSpec {
  int verbs = 50;
  int per_verb = 100;
  int speakers = 100;
  double verb_sd = 1.0;
  double speaker_sd = 0.5;
  double verb_corr = 0.15;
  double within_sd = 0.0;
  double density_beta = 0.0;
  double intercept = -0.7;
};

inline GroupedData simulate_verb_confound(const ConfoundSpec& s, std::uint64_t seed) {
  Rng rng(seed);
  const auto nv = static_cast<Eigen::Index>(s.verbs);
  Eigen::VectorXd dv(nv), e(nv);
  for (Eigen::Index j = 0; j < nv; ++j) dv(j) = rng.normal();
  for (Eigen::Index j = 0; j < nv; ++j) e(j) = rng.normal();
  auto zscore = [](Eigen::VectorXd v) {
    v.array() -= v.mean();
    return Eigen::VectorXd(v / std::sqrt(v.squaredNorm() / static_cast<double>(v.size())));
  };
  const Eigen::VectorXd zd = zscore(dv);
  Eigen::VectorXd ze = zscore(e);
  ze = zscore(ze - (ze.dot(zd) / zd.squaredNorm()) * zd);  // orthogonal to zd
  Eigen::VectorXd verb_effect;
  if (s.within_sd == 0.0)
    verb_effect = s.verb_sd * (s.verb_corr * zd + std::sqrt(1.0 - s.verb_corr * s.verb_corr) * ze);
  else
    verb_effect = s.verb_sd * ze;
  std::vector<double> speaker(static_cast<std::size_t>(s.speakers));
  for (auto& v : speaker) v = s.speaker_sd * rng.normal();

  GroupedData d;
  d.names = {"(Intercept)", "density"};
  const int n = s.verbs * s.per_verb;
  d.x.resize(n, 2);
  std::vector<std::string> verb_labels, speaker_labels;
  for (int j = 0, r = 0; j < s.verbs; ++j) {
    for (int k = 0; k < s.per_verb; ++k, ++r) {
      const int sp = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.speakers)));
      const double dens = zd(j) + s.within_sd * rng.normal();
      d.x(r, 0) = 1.0;
      d.x(r, 1) = dens;
      const double eta = s.intercept + s.density_beta * dens + verb_effect(j) + speaker[static_cast<std::size_t>(sp)];
      d.y.push_back(rng.bernoulli(logistic(eta)) ? 1 : 0);
      verb_labels.push_back("v" + std::to_string(100 + j));
      speaker_labels.push_back("s" + std::to_string(1000 + sp));
    }
  }
  d.groups.push_back(glmm::GroupingFactor::from_labels("speaker", speaker_labels));
  d.groups.push_back(glmm::GroupingFactor::from_labels("verb", verb_labels));
  return d;
}

}  // namespace uidpipe::testing
