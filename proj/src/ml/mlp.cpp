#include "uidpipe/ml/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "uidpipe/error.hpp"

namespace uidpipe::ml {

void TrainConfig::validate() const {
  if (hidden_sizes.empty()) throw ConfigError("at least one hidden layer is required");
  for (int h : hidden_sizes)
    if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (batch_size <= 0 || max_epochs <= 0 || patience <= 0 || folds <= 1) {
    throw ConfigError("batch size, epochs and patience must be positive; folds at least 2");
  }
  if (patience >= max_epochs) throw ConfigError("patience must be smaller than max_epochs");
}

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Mlp::Mlp(int input_dim, std::vector<int> hidden_sizes, Rng& rng)
    : input_dim_(input_dim), hidden_(std::move(hidden_sizes)) {
  if (input_dim < 1) throw ArgumentError("network needs at least one input");
  Eigen::Index offset = 0;
  int in = input_dim;
  for (int h : hidden_) {
    Offsets o{};
    o.in = in;
    o.out = h;
    o.weight = offset;
    offset += static_cast<Eigen::Index>(h) * in;
    o.bias = offset;
    offset += h;
    o.gamma = offset;
    offset += h;
    o.beta = offset;
    offset += h;
    layers_.push_back(o);
    in = h;
  }
  out_weight_ = offset;
  offset += in;
  out_bias_ = offset;
  offset += 1;

  params_ = Vector::Zero(offset);
  auto fill_uniform = [&](Eigen::Index start, Eigen::Index count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < count; ++i) params_(start + i) = rng.uniform(-bound, bound);
  };
  for (const auto& o : layers_) {
    fill_uniform(o.weight, static_cast<Eigen::Index>(o.out) * o.in, o.in);
    fill_uniform(o.bias, o.out, o.in);
    params_.segment(o.gamma, o.out).setOnes();
    running_mean_.push_back(Vector::Zero(o.out));
    running_var_.push_back(Vector::Ones(o.out));
  }
  fill_uniform(out_weight_, in, in);
  fill_uniform(out_bias_, 1, in);
}

Vector Mlp::logits(const Matrix& x) const {
  if (x.cols() != input_dim_) {
    throw ArgumentError(fmt::format("expected {} features, got {}", input_dim_, x.cols()));
  }
  Matrix a = x.transpose();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& o = layers_[l];
    Eigen::Map<const Matrix> w(params_.data() + o.weight, o.out, o.in);
    auto b = params_.segment(o.bias, o.out);
    auto gamma = params_.segment(o.gamma, o.out).array();
    auto beta = params_.segment(o.beta, o.out).array();
    Matrix z = (w * a).colwise() + b;
    Vector scale = gamma / (running_var_[l].array() + kBatchNormEps).sqrt();
    Vector shift = beta - running_mean_[l].array() * scale.array();
    a = ((z.array().colwise() * scale.array()).colwise() + shift.array()).cwiseMax(0.0).matrix();
  }
  Eigen::Map<const Eigen::RowVectorXd> wo(params_.data() + out_weight_, a.rows());
  return ((wo * a).array() + params_(out_bias_)).transpose();
}

double Mlp::loss_and_gradient(const Matrix& x, std::span<const int> y, double dropout,
                              std::optional<std::uint64_t> dropout_seed, double l2, Vector& grad,
                              bool update_running_stats) {
  const auto n = x.rows();
  if (x.cols() != input_dim_) throw ArgumentError("feature dimension mismatch");
  if (static_cast<std::size_t>(n) != y.size() || n == 0) throw ArgumentError("bad batch");
  const double bn = static_cast<double>(n);
  const double keep = 1.0 - dropout;
  std::optional<Rng> mask_rng;
  if (dropout_seed && dropout > 0.0) mask_rng.emplace(*dropout_seed);

  struct Cache {
    Matrix input, xhat, pre_relu, mask;
    Vector inv_std;
  };
  std::vector<Cache> cache(layers_.size());

  Matrix a = x.transpose();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& o = layers_[l];
    auto& c = cache[l];
    Eigen::Map<const Matrix> w(params_.data() + o.weight, o.out, o.in);
    auto b = params_.segment(o.bias, o.out);
    auto gamma = params_.segment(o.gamma, o.out).array();
    auto beta = params_.segment(o.beta, o.out).array();
    c.input = a;
    Matrix z = (w * a).colwise() + b;
    Vector mu = z.rowwise().mean();
    Matrix centered = z.colwise() - mu;
    Vector var = centered.array().square().rowwise().mean();
    c.inv_std = (var.array() + kBatchNormEps).rsqrt();
    c.xhat = centered.array().colwise() * c.inv_std.array();
    c.pre_relu = (c.xhat.array().colwise() * gamma).colwise() + beta;
    a = c.pre_relu.cwiseMax(0.0);
    if (mask_rng) {
      c.mask.resize(a.rows(), a.cols());
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          c.mask(i, j) = mask_rng->uniform() < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(c.mask);
    }
    if (update_running_stats) {
      const double unbiased = n > 1 ? bn / (bn - 1.0) : 1.0;
      running_mean_[l] = (1.0 - kBatchNormMomentum) * running_mean_[l] + kBatchNormMomentum * mu;
      running_var_[l] =
          (1.0 - kBatchNormMomentum) * running_var_[l] + kBatchNormMomentum * unbiased * var;
    }
  }
  Eigen::Map<const Eigen::RowVectorXd> wo(params_.data() + out_weight_, a.rows());
  Eigen::RowVectorXd z_out = (wo * a).array() + params_(out_bias_);

  double loss = 0.0;
  Eigen::RowVectorXd dz_out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    loss += softplus(z_out(i)) - yi * z_out(i);
    dz_out(i) = (sigmoid(z_out(i)) - yi) / bn;
  }
  loss /= bn;

  grad = Vector::Zero(params_.size());
  grad.segment(out_weight_, a.rows()) = (dz_out * a.transpose()).transpose();
  grad(out_bias_) = dz_out.sum();
  Matrix da = wo.transpose() * dz_out;

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& o = layers_[l];
    auto& c = cache[l];
    Eigen::Map<const Matrix> w(params_.data() + o.weight, o.out, o.in);
    auto gamma = params_.segment(o.gamma, o.out).array();
    if (c.mask.size()) da = da.cwiseProduct(c.mask);
    Matrix dy = (c.pre_relu.array() > 0.0).select(da, 0.0);
    grad.segment(o.gamma, o.out) = (dy.cwiseProduct(c.xhat)).rowwise().sum();
    grad.segment(o.beta, o.out) = dy.rowwise().sum();
    Matrix dxhat = dy.array().colwise() * gamma;
    Vector sum_dxhat = dxhat.rowwise().sum();
    Vector sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).rowwise().sum();
    Matrix dz = ((bn * dxhat.array()).colwise() - sum_dxhat.array() -
                 c.xhat.array().colwise() * sum_dxhat_xhat.array())
                    .colwise() *
                (c.inv_std.array() / bn);
    Eigen::Map<Matrix> gw(grad.data() + o.weight, o.out, o.in);
    gw = dz * c.input.transpose();
    grad.segment(o.bias, o.out) = dz.rowwise().sum();
    if (l > 0) da = w.transpose() * dz;
  }

  if (l2 > 0.0) {
    loss += 0.5 * l2 * params_.squaredNorm();
    grad += l2 * params_;
  }
  return loss;
}

Eigen::VectorXd TrainedMLP::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_mean.size()) {
    throw ArgumentError(fmt::format("expected {} features, got {}", input_mean.size(), x.cols()));
  }
  Eigen::MatrixXd z =
      (x.rowwise() - input_mean.transpose()).array().rowwise() / input_sd.transpose().array();
  Eigen::VectorXd logit = network.logits(z);
  return logit.unaryExpr([](double v) { return sigmoid(v); });
}

double predict_proba(const TrainedMLP& m, std::span<const double> x) {
  Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
  return m.predict(row)(0);
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void put_f32(std::ostream& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

void put_vec(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f32(out, v(i));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void get_vec(std::istream& in, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::bit_cast<float>(get_u32(in));
}

}  // namespace

void save_checkpoint(const TrainedMLP& m, std::ostream& out) {
  out.write("UMLP", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(m.network.input_dim()));
  put_u32(out, static_cast<std::uint32_t>(m.network.hidden_sizes().size()));
  for (int h : m.network.hidden_sizes()) put_u32(out, static_cast<std::uint32_t>(h));
  put_vec(out, m.input_mean);
  put_vec(out, m.input_sd);
  put_vec(out, m.network.parameters());
  for (std::size_t l = 0; l < m.network.hidden_sizes().size(); ++l) {
    put_vec(out, m.network.running_mean()[l]);
    put_vec(out, m.network.running_var()[l]);
  }
}

TrainedMLP load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "UMLP") throw DataError("not a UMLP checkpoint");
  if (auto v = get_u32(in); v != kCheckpointVersion) {
    throw DataError(fmt::format("unsupported checkpoint version {}", v));
  }
  const auto input_dim = static_cast<int>(get_u32(in));
  const auto layers = get_u32(in);
  if (layers == 0 || layers > 64 || input_dim <= 0) throw DataError("implausible checkpoint shape");
  std::vector<int> hidden;
  for (std::uint32_t i = 0; i < layers; ++i) hidden.push_back(static_cast<int>(get_u32(in)));
  Rng unused(0);
  TrainedMLP m{Mlp(input_dim, hidden, unused), Eigen::VectorXd(input_dim), Eigen::VectorXd(input_dim)};
  get_vec(in, m.input_mean);
  get_vec(in, m.input_sd);
  get_vec(in, m.network.parameters());
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    get_vec(in, m.network.running_mean()[l]);
    get_vec(in, m.network.running_var()[l]);
  }
  return m;
}

namespace {

struct AdamW {
  Eigen::VectorXd m, v;
  long step = 0;
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr, double wd) {
    if (m.size() == 0) {
      m = Eigen::VectorXd::Zero(params.size());
      v = Eigen::VectorXd::Zero(params.size());
    }
    ++step;
    params *= 1.0 - lr * wd;
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }
};

double eval_loss(const TrainedMLP& model, const Eigen::MatrixXd& z, std::span<const int> y) {
  Eigen::VectorXd logit = model.network.logits(z);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logit.size(); ++i) {
    loss += softplus(logit(i)) - y[static_cast<std::size_t>(i)] * logit(i);
  }
  return loss / static_cast<double>(logit.size());
}

// Batch boundaries over a permutation; a trailing singleton joins the
// previous batch since batch statistics need two rows.
std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += size) out.emplace_back(start, std::min(n, start + size));
  if (out.size() > 1 && out.back().second - out.back().first < 2) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

}  // namespace

FitOutcome fit_network(const Eigen::MatrixXd& x, std::span<const int> y,
                       const Eigen::MatrixXd* x_val, std::span<const int> y_val,
                       const TrainConfig& cfg, std::uint64_t seed, std::optional<int> epochs) {
  cfg.validate();
  const auto n = x.rows();
  if (n < 2) throw TrainingError("need at least two training rows");
  Rng rng(seed);

  FitOutcome out;
  auto& model = out.model;
  model.input_mean = x.colwise().mean().transpose();
  model.input_sd = ((x.rowwise() - model.input_mean.transpose()).array().square().colwise().mean())
                       .sqrt()
                       .transpose();
  for (Eigen::Index j = 0; j < model.input_sd.size(); ++j)
    if (!(model.input_sd(j) > 0.0)) model.input_sd(j) = 1.0;
  auto scale = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    return (m.rowwise() - model.input_mean.transpose()).array().rowwise() /
           model.input_sd.transpose().array();
  };
  const Eigen::MatrixXd z = scale(x);
  Eigen::MatrixXd z_val;
  if (x_val) z_val = scale(*x_val);

  model.network = Mlp(static_cast<int>(x.cols()), cfg.hidden_sizes, rng);
  AdamW opt;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto spans = batches(order.size(), static_cast<std::size_t>(cfg.batch_size));

  const int max_epochs = epochs.value_or(cfg.max_epochs);
  Mlp best = model.network;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd batch_x;
  std::vector<int> batch_y;

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (const auto& [start, end] : spans) {
      const auto rows = static_cast<Eigen::Index>(end - start);
      batch_x.resize(rows, z.cols());
      batch_y.resize(static_cast<std::size_t>(rows));
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[start + static_cast<std::size_t>(r)];
        batch_x.row(r) = z.row(static_cast<Eigen::Index>(src));
        batch_y[static_cast<std::size_t>(r)] = y[src];
      }
      const double loss = model.network.loss_and_gradient(batch_x, batch_y, cfg.dropout,
                                                          rng.next(), 0.0, grad, true);
      if (!std::isfinite(loss) || !grad.allFinite()) throw DivergenceError(epoch);
      epoch_loss += loss * static_cast<double>(rows);
      opt.apply(model.network.parameters(), grad, cfg.learning_rate, cfg.weight_decay);
    }
    out.training_curve.push_back(epoch_loss / static_cast<double>(n));

    if (!x_val) {
      out.best_epoch = epoch;
      continue;
    }
    const double val = eval_loss(model, z_val, y_val);
    if (!std::isfinite(val)) throw DivergenceError(epoch);
    out.validation_curve.push_back(val);
    if (val < best_loss) {
      best_loss = val;
      best = model.network;
      out.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (x_val) {
    model.network = std::move(best);
    out.best_validation_loss = best_loss;
  }
  return out;
}

}  // namespace uidpipe::ml
