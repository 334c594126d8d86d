#pragma once

// Feedforward binary classifier: [Linear -> BatchNorm -> ReLU -> Dropout]
// per hidden layer, then Linear -> sigmoid. Trained with binary
// cross-entropy and Adam with decoupled weight decay.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uidpipe/rng.hpp"

namespace uidpipe::ml {

struct TrainConfig {
  std::vector<int> hidden_sizes{128, 64, 32};
  double dropout = 0.2;
  double learning_rate = 0.001;
  double weight_decay = 1e-5;
  int batch_size = 1024;
  int max_epochs = 50;
  int patience = 5;
  int folds = 5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive sizes or patience >= max_epochs.
  void validate() const;
};

class Mlp {
 public:
  static constexpr double kBatchNormEps = 1e-5;
  static constexpr double kBatchNormMomentum = 0.1;

  Mlp() = default;
  Mlp(int input_dim, std::vector<int> hidden_sizes, Rng& rng);

  int input_dim() const { return input_dim_; }
  const std::vector<int>& hidden_sizes() const { return hidden_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::vector<Eigen::VectorXd>& running_mean() { return running_mean_; }
  std::vector<Eigen::VectorXd>& running_var() { return running_var_; }
  const std::vector<Eigen::VectorXd>& running_mean() const { return running_mean_; }
  const std::vector<Eigen::VectorXd>& running_var() const { return running_var_; }

  /// Evaluation-mode logits for the rows of `x` (n x input_dim).
  Eigen::VectorXd logits(const Eigen::MatrixXd& x) const;

  /// Training-mode pass over one batch: batch statistics, dropout masks drawn
  /// from `dropout_seed` (none = no dropout). Returns
  /// mean BCE + 0.5 * l2 * ||params||^2 and writes its gradient to `grad`.
  double loss_and_gradient(const Eigen::MatrixXd& x, std::span<const int> y, double dropout,
                           std::optional<std::uint64_t> dropout_seed, double l2,
                           Eigen::VectorXd& grad, bool update_running_stats);

 private:
  struct Offsets {
    Eigen::Index weight, bias, gamma, beta;
    int in, out;
  };

  int input_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Offsets> layers_;
  Eigen::Index out_weight_ = 0, out_bias_ = 0;
  Eigen::VectorXd params_;
  std::vector<Eigen::VectorXd> running_mean_, running_var_;
};

/// A network plus the input z-scoring it was trained with.
struct TrainedMLP {
  Mlp network;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_sd;

  /// Probabilities for raw (unstandardized) rows.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Deterministic probability for one raw feature vector.
double predict_proba(const TrainedMLP& m, std::span<const double> x);

/// Flat little-endian checkpoint: "UMLP", u32 version, u32 input_dim,
/// u32 hidden count, u32 hidden sizes, then f32 input mean/sd, parameters,
/// and per-layer running mean/variance.
void save_checkpoint(const TrainedMLP& m, std::ostream& out);
TrainedMLP load_checkpoint(std::istream& in);

struct FitOutcome {
  TrainedMLP model;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  std::vector<double> validation_curve;
  std::vector<double> training_curve;
};

/// Trains one network. With validation data, early-stops on validation loss
/// (patience from cfg) and restores the best epoch; without, runs exactly
/// `epochs` epochs (defaults to cfg.max_epochs).
FitOutcome fit_network(const Eigen::MatrixXd& x, std::span<const int> y,
                       const Eigen::MatrixXd* x_val, std::span<const int> y_val,
                       const TrainConfig& cfg, std::uint64_t seed,
                       std::optional<int> epochs = std::nullopt);

}  // namespace uidpipe::ml
