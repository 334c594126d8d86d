#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "uidpipe/error.hpp"
#include "uidpipe/ml/cv.hpp"
#include "uidpipe/ml/lasso.hpp"
#include "uidpipe/ml/metrics.hpp"
#include "uidpipe/ml/mlp.hpp"
#include "uidpipe/ml/pca.hpp"
#include "uidpipe/ml/selection.hpp"
#include "uidpipe/rng.hpp"

using namespace uidpipe;
using namespace uidpipe::ml;

namespace {

struct Labeled {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

// Two informative columns plus `noise` pure-noise columns.
Labeled synthetic(int n, int noise, std::uint64_t seed, double margin = 0.0) {
  Rng rng(seed);
  Labeled d{Eigen::MatrixXd(n, 2 + noise), {}};
  for (int i = 0; i < n; ++i) {
    double s;
    do {
      for (int j = 0; j < d.x.cols(); ++j) d.x(i, j) = rng.normal();
      s = d.x(i, 0) - 0.8 * d.x(i, 1);
    } while (std::abs(s) < margin);
    d.y.push_back(s > 0 ? 1 : 0);
  }
  return d;
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.batch_size = 64;
  c.max_epochs = 30;
  c.patience = 4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("surprisal") {
  CHECK(surprisal(1.0) == 0.0);
  CHECK(surprisal(0.5) == doctest::Approx(std::log(2.0)));
  CHECK(surprisal(std::exp(-2.0)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(surprisal(0.0), DomainError);
  CHECK_THROWS_AS(surprisal(1.5), DomainError);
  auto d = make_density("x", 0.0);
  CHECK(d.density == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("classification metrics") {
  const std::vector<int> y{1, 0, 1, 1, 0};
  const std::vector<double> perfect{1, 0, 1, 1, 0};
  CHECK(f1(perfect, y) == 1.0);
  CHECK(log_loss(perfect, y) <= 1e-6);
  const std::vector<double> negative(5, 0.2);
  CHECK(f1(negative, y) == 0.0);
  const std::vector<double> p{0.9, 0.6, 0.4, 0.8, 0.1};
  // tp = 2, fp = 1, fn = 1
  CHECK(f1(p, y) == doctest::Approx(2.0 / 3.0));
  double ll = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ll -= y[i] ? std::log(p[i]) : std::log(1 - p[i]);
  CHECK(total_nll(p, y) == doctest::Approx(ll));
  CHECK(log_loss(p, y) == doctest::Approx(ll / 5));
  CHECK_THROWS_AS(f1(std::vector<double>{}, std::vector<int>{}), ArgumentError);
  CHECK_THROWS_AS(log_loss(std::vector<double>{0.5}, std::vector<int>{1, 0}), ArgumentError);
}

TEST_CASE("information criteria") {
  auto ic = aic_bic(100.0, 0.0, 50.0);
  CHECK(ic.aic == 200.0);
  CHECK(ic.bic == 200.0);
  auto a = aic_bic(10.0, 3.0, 100.0);
  CHECK(a.aic == doctest::Approx(26.0));
  CHECK(a.bic == doctest::Approx(20.0 + 3.0 * std::log(100.0)));
}

TEST_CASE("pca") {
  Rng rng(3);
  SUBCASE("rank one") {
    Eigen::MatrixXd x(50, 2);
    for (int i = 0; i < 50; ++i) {
      double t = rng.normal();
      x.row(i) << 2 * t + 1, -t + 3;
    }
    auto m = pca_fit(x, 1);
    REQUIRE(m.dims() == 1);
    CHECK(m.explained_variance_ratio(0) == doctest::Approx(1.0).epsilon(1e-12));
    auto over = pca_fit(x, 2);
    CHECK(over.dims() == 1);
    CHECK_FALSE(over.warnings.empty());
  }
  SUBCASE("isotropic sample and round trip") {
    Eigen::MatrixXd x(4000, 3);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    auto m = pca_fit(x, 2);
    CHECK(m.explained_variance_ratio.sum() == doctest::Approx(2.0 / 3.0).epsilon(0.03));
    auto full = pca_fit(x, 3);
    auto back = pca_inverse_transform(full, pca_transform(full, x));
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-8);
    Eigen::MatrixXd mean = full.mean.transpose();
    CHECK(pca_transform(full, mean).cwiseAbs().maxCoeff() < 1e-12);
    // Components are orthonormal.
    CHECK((full.components * full.components.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("mlp gradient matches central differences") {
  Rng rng(11);
  Mlp net(3, {5, 4}, rng);
  Eigen::MatrixXd x(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
  const std::vector<int> y{1, 0, 1, 1, 0, 0};
  const double l2 = 1e-3;
  Eigen::VectorXd grad;
  net.loss_and_gradient(x, y, 0.0, std::nullopt, l2, grad, false);
  Eigen::VectorXd fd(grad.size()), scratch;
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    const double keep = net.parameters()(k);
    net.parameters()(k) = keep + h;
    const double up = net.loss_and_gradient(x, y, 0.0, std::nullopt, l2, scratch, false);
    net.parameters()(k) = keep - h;
    const double down = net.loss_and_gradient(x, y, 0.0, std::nullopt, l2, scratch, false);
    net.parameters()(k) = keep;
    fd(k) = (up - down) / (2 * h);
  }
  CHECK((grad - fd).norm() / std::max(grad.norm(), fd.norm()) < 1e-4);
  // Dropout masks are reproducible from their seed.
  Eigen::VectorXd g1, g2;
  const double a = net.loss_and_gradient(x, y, 0.5, 9u, l2, g1, false);
  const double b = net.loss_and_gradient(x, y, 0.5, 9u, l2, g2, false);
  CHECK(a == b);
  CHECK(g1 == g2);
}

TEST_CASE("checkpoint round trip and predictions") {
  auto d = synthetic(300, 1, 5);
  auto cfg = small_config(2);
  auto fit = fit_network(d.x, d.y, nullptr, {}, cfg, 2, 5);
  std::stringstream buf;
  save_checkpoint(fit.model, buf);
  auto back = load_checkpoint(buf);
  const Eigen::VectorXd p0 = fit.model.predict(d.x);
  const Eigen::VectorXd p1 = back.predict(d.x);
  // Stored as f32.
  CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-5);
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    CHECK(p0(i) > 0.0);
    CHECK(p0(i) < 1.0);
  }
  const std::vector<double> first{d.x(0, 0), d.x(0, 1), d.x(0, 2)};
  CHECK(predict_proba(fit.model, first) == predict_proba(fit.model, first));
  CHECK(predict_proba(fit.model, first) == doctest::Approx(p0(0)).epsilon(1e-12));
  CHECK_THROWS_AS(predict_proba(fit.model, std::vector<double>{1.0}), ArgumentError);

  std::stringstream junk("NOPE");
  CHECK_THROWS_AS(load_checkpoint(junk), DataError);
}

TEST_CASE("stratified folds balance the positives") {
  std::vector<int> y(103, 0);
  for (int i = 0; i < 37; ++i) y[static_cast<std::size_t>(i * 2)] = 1;
  auto f = stratified_folds(y, 5, 4);
  std::vector<int> pos(5, 0), all(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    all[static_cast<std::size_t>(f[i])]++;
    pos[static_cast<std::size_t>(f[i])] += y[i];
  }
  CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
  CHECK(*std::max_element(all.begin(), all.end()) - *std::min_element(all.begin(), all.end()) <= 1);
  CHECK(stratified_folds(y, 5, 4) == f);
  CHECK(stratified_folds(y, 5, 5) != f);
}

TEST_CASE("cross-validated training") {
  auto d = synthetic(600, 1, 8, 0.3);
  auto cfg = small_config(13);
  auto a = train_mlp_cv(d.x, d.y, cfg);
  CHECK(a.cv.f1 > 0.9);
  CHECK(a.cv.n == 600);
  CHECK(a.cv.k == 3 * 128);
  CHECK(a.final_model.has_value());
  auto b = train_mlp_cv(d.x, d.y, cfg);
  CHECK(a.cv.oof == b.cv.oof);
  CHECK(a.cv.total_nll == b.cv.total_nll);

  std::vector<int> constant(d.y.size(), 1);
  CHECK_THROWS_AS(train_mlp_cv(d.x, constant, cfg), TrainingError);

  auto base = intercept_only_cv(d.y, cfg);
  CHECK(base.cv.k == 0.0);
  CHECK_FALSE(base.final_model.has_value());
  CHECK(input_parameter_count(7, cfg) == 7 * 128);
}

TEST_CASE("lasso at zero penalty is least squares") {
  Rng rng(21);
  Eigen::MatrixXd x(80, 5);
  Eigen::VectorXd y(80);
  for (int i = 0; i < 80; ++i) {
    for (int j = 0; j < 5; ++j) x(i, j) = rng.normal();
    y(i) = 1.5 + 2 * x(i, 0) - x(i, 2) + 0.3 * rng.normal();
  }
  auto fit = lasso_fixed(x, y, 0.0);
  Eigen::MatrixXd design(80, 6);
  design << Eigen::VectorXd::Ones(80), x;
  Eigen::VectorXd ref = (design.transpose() * design).ldlt().solve(design.transpose() * y);
  CHECK(std::abs(fit.intercept - ref(0)) < 1e-6);
  CHECK((fit.coef - ref.tail(5)).cwiseAbs().maxCoeff() < 1e-6);

  const double lmax = lasso_lambda_max(x, y);
  CHECK(lasso_fixed(x, y, lmax).coef.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lasso_fixed(x, y, lmax * 0.99).coef.cwiseAbs().maxCoeff() > 0.0);

  LassoOptions tight;
  tight.max_sweeps = 1;
  tight.tolerance = 0.0;
  CHECK_THROWS_AS(lasso_fixed(x, y, 0.0, tight), ConvergenceError);
}

TEST_CASE("lasso recovers the true features") {
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(200, 7);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 7; ++j) x(i, j) = rng.normal();
      y(i) = 1.0 * x(i, 0) - 0.8 * x(i, 1) + rng.normal();
    }
    LassoOptions opt;
    opt.seed = seed;
    auto r = lasso(x, y, {}, opt);
    const bool both = std::count(r.selected.begin(), r.selected.end(), 0) && std::count(r.selected.begin(), r.selected.end(), 1);
    recovered += both ? 1 : 0;
    CHECK(std::is_sorted(r.lambda_grid.rbegin(), r.lambda_grid.rend()));
  }
  CHECK(recovered >= 18);
}

TEST_CASE("incremental selection with a stub trainer") {
  // The stub scores a model by how many informative columns it contains.
  std::vector<int> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0;
  auto trainer = [&](const Eigen::MatrixXd& x, std::span<const int> yy, const TrainConfig& cfg) {
    CVResult r;
    r.n = yy.size();
    r.k = input_parameter_count(static_cast<int>(x.cols()), cfg);
    int informative = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) informative += x(0, j) == 1.0 ? 1 : 0;
    // Baseline nll is about 636.5; one informative column has to beat a BIC
    // penalty of 128 ln 1000 / 2, about 442.
    r.total_nll = 636.0 - 500.0 * informative;
    r.f1 = 0.5;
    r.log_loss = r.total_nll / static_cast<double>(r.n);
    if (x(0, x.cols() - 1) == -9.0) throw TrainingError("boom");
    return r;
  };
  std::vector<Candidate> c{{"signal", Eigen::MatrixXd::Ones(1000, 1)},
                           {"noise", Eigen::MatrixXd::Zero(1000, 1)},
                           {"broken", Eigen::MatrixXd::Constant(1000, 1, -9.0)}};
  TrainConfig cfg;
  auto rep = incremental_selection(c, y, cfg, trainer);
  REQUIRE(rep.steps.size() == 3);
  CHECK(rep.steps[0].accepted);
  CHECK(rep.steps[0].delta_aic < 0);
  CHECK(rep.steps[0].delta_aic_zero_k.has_value());
  CHECK_FALSE(rep.steps[1].accepted);
  CHECK(rep.steps[1].delta_bic > 0);
  CHECK(rep.steps[1].delta_bic - rep.steps[1].delta_aic == doctest::Approx(128 * (std::log(1000.0) - 2)));
  CHECK_FALSE(rep.steps[1].delta_aic_zero_k.has_value());
  CHECK(rep.steps[2].failed);
  CHECK(rep.accepted == std::vector<std::string>{"signal"});
}

TEST_CASE("incremental selection with the network") {
  // The label is a threshold on one column, so that column alone nearly
  // removes the loss; a second copy adds nothing.
  auto d = synthetic(1000, 0, 17);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) y.push_back(d.x(i, 0) > 0 ? 1 : 0);
  auto cfg = small_config(3);
  std::vector<Candidate> c{{"x0", d.x.col(0)}, {"x0 again", d.x.col(0)}};
  auto rep = incremental_selection(c, y, cfg);
  CHECK(rep.steps[0].accepted);
  CHECK(rep.steps[0].delta_aic < 0);
  CHECK_FALSE(rep.steps[1].accepted);
  CHECK(rep.steps[1].delta_bic > 0);
}

TEST_CASE("pure-noise candidates are rejected") {
  int rejected = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7919);
    Eigen::MatrixXd noise(400, 1);
    std::vector<int> y(400);
    for (int i = 0; i < 400; ++i) {
      noise(i, 0) = rng.normal();
      y[static_cast<std::size_t>(i)] = rng.uniform() < 0.35;
    }
    auto cfg = small_config(seed);
    cfg.max_epochs = 10;
    auto rep = incremental_selection({{"noise", noise}}, y, cfg);
    rejected += rep.steps[0].accepted ? 0 : 1;
  }
  CHECK(rejected >= 19);
}
