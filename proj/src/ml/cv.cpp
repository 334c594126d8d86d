#include "uidpipe/ml/cv.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <thread>

#include "uidpipe/error.hpp"
#include "uidpipe/ml/metrics.hpp"
#include "uidpipe/rng.hpp"

namespace uidpipe::ml {

unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("UIDPIPE_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return hw;
}

std::vector<int> stratified_folds(std::span<const int> y, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("need at least two folds");
  if (y.size() < static_cast<std::size_t>(k)) throw ArgumentError("fewer instances than folds");
  std::vector<int> fold(y.size(), -1);
  std::size_t dealt = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(cls)));
    rng.shuffle(idx);
    for (auto i : idx) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return fold;
}

double input_parameter_count(int inputs, const TrainConfig& cfg) {
  return static_cast<double>(inputs) * static_cast<double>(cfg.hidden_sizes.front());
}

namespace {

void check_labels(std::span<const int> y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw TrainingError("labels must be 0 or 1");
    has0 |= v == 0;
    has1 |= v == 1;
  }
  if (!has0 || !has1) throw TrainingError("labels contain a single class");
}

struct FoldPrediction {
  std::vector<std::size_t> held_out;
  Eigen::VectorXd probs;
  int best_epoch = 0;
};

void finish(CVResult& cv, std::span<const int> y, const std::vector<FoldPrediction>& folds) {
  cv.n = y.size();
  cv.oof = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(y.size()));
  cv.fold_of.assign(y.size(), -1);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fp = folds[f];
    std::vector<double> p;
    std::vector<int> yy;
    for (std::size_t j = 0; j < fp.held_out.size(); ++j) {
      const auto i = fp.held_out[j];
      cv.oof(static_cast<Eigen::Index>(i)) = fp.probs(static_cast<Eigen::Index>(j));
      cv.fold_of[i] = static_cast<int>(f);
      p.push_back(fp.probs(static_cast<Eigen::Index>(j)));
      yy.push_back(y[i]);
    }
    cv.fold_f1.push_back(f1(p, yy));
    cv.fold_log_loss.push_back(log_loss(p, yy));
    cv.fold_best_epoch.push_back(fp.best_epoch);
  }
  std::span<const double> all(cv.oof.data(), static_cast<std::size_t>(cv.oof.size()));
  cv.total_nll = total_nll(all, y);
  cv.f1 = f1(all, y);
  cv.log_loss = log_loss(all, y);
}

// Runs fold jobs with at most thread_budget() in flight; results keep fold order.
template <typename Job>
std::vector<FoldPrediction> run_folds(int k, Job job) {
  std::vector<FoldPrediction> out(static_cast<std::size_t>(k));
  const unsigned budget = thread_budget();
  if (budget <= 1) {
    for (int f = 0; f < k; ++f) out[static_cast<std::size_t>(f)] = job(f);
    return out;
  }
  for (int start = 0; start < k; start += static_cast<int>(budget)) {
    std::vector<std::future<FoldPrediction>> pending;
    const int end = std::min(k, start + static_cast<int>(budget));
    for (int f = start; f < end; ++f) pending.push_back(std::async(std::launch::async, job, f));
    for (int f = start; f < end; ++f) out[static_cast<std::size_t>(f)] = pending[static_cast<std::size_t>(f - start)].get();
  }
  return out;
}

}  // namespace

CVOutput train_mlp_cv(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& cfg,
                      bool refit) {
  cfg.validate();
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ArgumentError("X and y differ in rows");
  if (x.cols() < 1) throw ArgumentError("train_mlp_cv needs at least one feature column");
  check_labels(y);
  const auto fold = stratified_folds(y, cfg.folds, cfg.seed);

  auto job = [&](int f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? held : train).push_back(i);
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
    Eigen::MatrixXd xv(static_cast<Eigen::Index>(held.size()), x.cols());
    std::vector<int> yt, yv;
    for (std::size_t j = 0; j < train.size(); ++j) {
      xt.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(train[j]));
      yt.push_back(y[train[j]]);
    }
    for (std::size_t j = 0; j < held.size(); ++j) {
      xv.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(held[j]));
      yv.push_back(y[held[j]]);
    }
    auto fit = fit_network(xt, yt, &xv, yv, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(f)));
    return FoldPrediction{held, fit.model.predict(xv), fit.best_epoch};
  };

  CVOutput out;
  auto folds = run_folds(cfg.folds, job);
  finish(out.cv, y, folds);
  out.cv.k = input_parameter_count(static_cast<int>(x.cols()), cfg);

  auto epochs = out.cv.fold_best_epoch;
  std::sort(epochs.begin(), epochs.end());
  out.final_epochs = std::max(1, epochs[(epochs.size() - 1) / 2]);
  if (!refit) return out;
  auto final_fit = fit_network(x, y, nullptr, {}, cfg, derive_seed(cfg.seed, 999), out.final_epochs);
  out.final_model = std::move(final_fit.model);
  return out;
}

CVOutput intercept_only_cv(std::span<const int> y, const TrainConfig& cfg) {
  check_labels(y);
  const auto fold = stratified_folds(y, cfg.folds, cfg.seed);
  std::vector<FoldPrediction> folds(static_cast<std::size_t>(cfg.folds));
  for (int f = 0; f < cfg.folds; ++f) {
    double ones = 0.0, count = 0.0;
    auto& fp = folds[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (fold[i] == f) {
        fp.held_out.push_back(i);
      } else {
        ones += y[i];
        count += 1.0;
      }
    }
    fp.probs = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fp.held_out.size()), ones / count);
  }
  CVOutput out;
  finish(out.cv, y, folds);
  out.cv.k = 0.0;
  return out;
}

}  // namespace uidpipe::ml
