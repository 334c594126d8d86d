#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uidpipe/ml/mlp.hpp"

namespace uidpipe::ml {

/// Fold assignment (0..k-1) with each class dealt round-robin after a seeded
/// shuffle, so every fold's positive count is within one of every other's.
std::vector<int> stratified_folds(std::span<const int> y, int k, std::uint64_t seed);

struct CVResult {
  std::vector<double> fold_f1;
  std::vector<double> fold_log_loss;
  std::vector<int> fold_best_epoch;
  Eigen::VectorXd oof;            // out-of-fold probability per instance
  std::vector<int> fold_of;       // fold that held each instance out
  double total_nll = 0.0;         // pooled out-of-fold NLL (nats)
  double f1 = 0.0;                // pooled out-of-fold
  double log_loss = 0.0;          // pooled out-of-fold
  double k = 0.0;                 // input-attributable parameter count
  std::size_t n = 0;
};

struct CVOutput {
  CVResult cv;
  std::optional<TrainedMLP> final_model;  // absent for the intercept-only model
  int final_epochs = 0;
};

/// Stratified k-fold training with early stopping on each held-out fold,
/// then a refit on all rows for the median best epoch (skipped when `refit`
/// is false).
CVOutput train_mlp_cv(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& cfg,
                      bool refit = true);

/// Baseline predicting each held-out fold with its training folds' base rate.
CVOutput intercept_only_cv(std::span<const int> y, const TrainConfig& cfg);

/// Parameter count charged to a model with `inputs` input columns: the
/// first hidden layer's fan-in weights.
double input_parameter_count(int inputs, const TrainConfig& cfg);

/// Worker cap from UIDPIPE_THREADS (default: hardware concurrency).
unsigned thread_budget();

}  // namespace uidpipe::ml
