#include "uidpipe/ml/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "uidpipe/error.hpp"

namespace uidpipe::ml {

namespace {

void check_aligned(std::span<const double> probs, std::span<const int> y) {
  if (probs.empty()) throw ArgumentError("metric needs at least one prediction");
  if (probs.size() != y.size()) throw ArgumentError("predictions and labels differ in length");
}

}  // namespace

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

double f1(std::span<const double> probs, std::span<const int> y, double threshold) {
  check_aligned(probs, y);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    const bool actual = y[i] == 1;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double total_nll(std::span<const double> probs, std::span<const int> y) {
  check_aligned(probs, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_probability(probs[i]);
    sum -= y[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return sum;
}

double log_loss(std::span<const double> probs, std::span<const int> y) {
  return total_nll(probs, y) / static_cast<double>(probs.size());
}

InformationCriteria aic_bic(double nll_total, double k, double n) {
  if (n < 1) throw ArgumentError("aic_bic needs n >= 1");
  if (k < 0) throw ArgumentError("aic_bic needs k >= 0");
  return {2.0 * k + 2.0 * nll_total, k * std::log(n) + 2.0 * nll_total};
}

double surprisal(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw DomainError("surprisal needs a probability in (0, 1], got " + std::to_string(p));
  }
  return -std::log(p);
}

DensityEstimate make_density(std::string instance_id, double probability) {
  const double p = clamp_probability(probability);
  return {std::move(instance_id), p, surprisal(p)};
}

}  // namespace uidpipe::ml
