#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uidpipe/ml/cv.hpp"

namespace uidpipe::ml {

/// One candidate predictor; factors contribute several columns at once.
struct Candidate {
  std::string name;
  Eigen::MatrixXd columns;
};

struct SelectionStep {
  std::string name;
  bool accepted = false;
  bool failed = false;
  std::string error;
  int inputs = 0;  // input columns of the model tried at this step
  double k = 0.0;
  double nll = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double delta_aic = 0.0;  // against the last accepted model
  double delta_bic = 0.0;
  double f1 = 0.0;
  double log_loss = 0.0;
  // Deltas charging no parameters for the step (set only when the reference
  // model is the intercept-only baseline).
  std::optional<double> delta_aic_zero_k;
  std::optional<double> delta_bic_zero_k;
};

struct SelectionReport {
  SelectionStep baseline;  // intercept only
  std::vector<SelectionStep> steps;
  std::vector<std::string> accepted;
  std::size_t n = 0;
};

using CVTrainer = std::function<CVResult(const Eigen::MatrixXd&, std::span<const int>, const TrainConfig&)>;

/// Default trainer: train_mlp_cv without the final refit.
CVResult mlp_cv_trainer(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& cfg);

/// Adds candidates one at a time in the given order. A candidate is kept iff
/// both AIC and BIC drop relative to the last kept model. Training failures
/// are recorded on the step and the candidate is skipped.
SelectionReport incremental_selection(const std::vector<Candidate>& candidates, std::span<const int> y,
                                      const TrainConfig& cfg, const CVTrainer& trainer = mlp_cv_trainer);

}  // namespace uidpipe::ml
