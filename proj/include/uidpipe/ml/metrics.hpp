#pragma once

#include <span>
#include <string>

namespace uidpipe::ml {

inline constexpr double kProbabilityFloor = 1e-7;

double clamp_probability(double p);

/// F1 of the positive class with predictions thresholded at `threshold`.
/// Zero when there are no true positives.
double f1(std::span<const double> probs, std::span<const int> y, double threshold = 0.5);

/// Mean binary cross-entropy in nats, probabilities clamped to
/// [1e-7, 1 - 1e-7].
double log_loss(std::span<const double> probs, std::span<const int> y);

/// Summed negative log-likelihood in nats (same clamping).
double total_nll(std::span<const double> probs, std::span<const int> y);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

InformationCriteria aic_bic(double nll_total, double k, double n);

/// -ln p. Throws DomainError for p outside (0, 1].
double surprisal(double p);

struct DensityEstimate {
  std::string instance_id;
  double probability = 0.0;
  double density = 0.0;  // nats
};

/// Clamps the probability, then converts it.
DensityEstimate make_density(std::string instance_id, double probability);

}  // namespace uidpipe::ml
