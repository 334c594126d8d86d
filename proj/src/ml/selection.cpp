#include "uidpipe/ml/selection.hpp"

#include "uidpipe/error.hpp"
#include "uidpipe/ml/metrics.hpp"

namespace uidpipe::ml {

CVResult mlp_cv_trainer(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& cfg) {
  return train_mlp_cv(x, y, cfg, false).cv;
}

namespace {

void fill_scores(SelectionStep& s, const CVResult& cv) {
  s.k = cv.k;
  s.nll = cv.total_nll;
  auto ic = aic_bic(cv.total_nll, cv.k, static_cast<double>(cv.n));
  s.aic = ic.aic;
  s.bic = ic.bic;
  s.f1 = cv.f1;
  s.log_loss = cv.log_loss;
}

}  // namespace

SelectionReport incremental_selection(const std::vector<Candidate>& candidates, std::span<const int> y,
                                      const TrainConfig& cfg, const CVTrainer& trainer) {
  const auto n = static_cast<Eigen::Index>(y.size());
  for (const auto& c : candidates)
    if (c.columns.rows() != n) throw ArgumentError("candidate '" + c.name + "' has the wrong row count");

  SelectionReport rep;
  rep.n = y.size();
  rep.baseline.name = "Intercept only";
  rep.baseline.accepted = true;
  fill_scores(rep.baseline, intercept_only_cv(y, cfg).cv);

  Eigen::MatrixXd current(n, 0);
  const SelectionStep* reference = &rep.baseline;
  bool reference_is_baseline = true;
  rep.steps.reserve(candidates.size());

  for (const auto& c : candidates) {
    SelectionStep s;
    s.name = c.name;
    Eigen::MatrixXd trial(n, current.cols() + c.columns.cols());
    trial << current, c.columns;
    s.inputs = static_cast<int>(trial.cols());
    try {
      fill_scores(s, trainer(trial, y, cfg));
    } catch (const std::exception& e) {
      s.failed = true;
      s.error = e.what();
      rep.steps.push_back(std::move(s));
      continue;
    }
    s.delta_aic = s.aic - reference->aic;
    s.delta_bic = s.bic - reference->bic;
    if (reference_is_baseline) {
      s.delta_aic_zero_k = 2.0 * (s.nll - reference->nll);
      s.delta_bic_zero_k = s.delta_aic_zero_k;
    }
    s.accepted = s.delta_aic < 0.0 && s.delta_bic < 0.0;
    rep.steps.push_back(std::move(s));
    if (rep.steps.back().accepted) {
      current = std::move(trial);
      reference = &rep.steps.back();
      reference_is_baseline = false;
      rep.accepted.push_back(c.name);
    }
  }
  return rep;
}

}  // namespace uidpipe::ml
