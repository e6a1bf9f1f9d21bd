#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "abc/errors.hpp"
#include "abc/ffnn.hpp"
#include "abc/optimizer.hpp"
#include "abc/rng.hpp"

using namespace abc;

namespace {

FfnnModel random_model(Rng& rng, int h, int d, double scale = 1.0) {
  FfnnModel m(h, d);
  for (auto& w : m.w1()) w = rng.uniform(-scale, scale);
  for (auto& w : m.w2()) w = rng.uniform(-scale, scale);
  return m;
}

Eigen::MatrixXd random_inputs(Rng& rng, int rows, int d) {
  Eigen::MatrixXd x(rows, d);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < d; ++k) x(i, k) = rng.uniform(-2.0, 2.0);
  return x;
}

// Direct evaluation from the flat parameter layout, independent of ffnn_forward.
double hand_forward(const std::vector<double>& p, int h, int d, const double* s) {
  double out = p[static_cast<std::size_t>(h * (d + 1))];
  for (int j = 0; j < h; ++j) {
    double a = p[static_cast<std::size_t>(j * (d + 1))];
    for (int k = 0; k < d; ++k) a += p[static_cast<std::size_t>(j * (d + 1) + 1 + k)] * s[k];
    out += p[static_cast<std::size_t>(h * (d + 1) + 1 + j)] / (1.0 + std::exp(-a));
  }
  return out;
}

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST_SUITE("ffnn") {

TEST_CASE("forward pass examples") {
  FfnnModel zero(4, 3);
  const std::vector<double> s{0.3, -1.0, 2.0};
  CHECK(ffnn_forward(zero, s) == 0.0);

  FfnnModel one(1, 1);
  one.w2()[0] = 1.0;
  one.w2()[1] = 2.0;
  CHECK(ffnn_forward(one, std::vector<double>{5.0}) == 2.0);
  CHECK_THROWS_AS(ffnn_forward(one, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("forward pass matches a hand evaluation") {
  Rng rng(1, 0);
  for (int c = 0; c < 20; ++c) {
    const auto m = random_model(rng, 4, 7);
    const auto x = random_inputs(rng, 10, 7);
    const auto batch = ffnn_forward_batch(m, x);
    const auto p = m.parameters();
    for (int i = 0; i < 10; ++i) {
      std::vector<double> s(7);
      for (int k = 0; k < 7; ++k) s[static_cast<std::size_t>(k)] = x(i, k);
      const double oracle = hand_forward(p, 4, 7, s.data());
      CHECK(std::abs(ffnn_forward(m, s) - oracle) <= 1e-12 * (1 + std::abs(oracle)));
      CHECK(std::abs(batch(i) - oracle) <= 1e-12 * (1 + std::abs(oracle)));
    }
  }
}

TEST_CASE("gradient at zero residuals") {
  Rng rng(2, 0);
  const auto m = random_model(rng, 3, 2);
  const auto x = random_inputs(rng, 15, 2);
  const Eigen::VectorXd fitted = ffnn_forward_batch(m, x);
  const std::vector<double> y(fitted.data(), fitted.data() + fitted.size());
  std::vector<double> w(15);
  for (auto& v : w) v = rng.uniform(0.1, 1.0);

  const auto g0 = ffnn_loss_and_gradient(m, x, y, w, 0.0);
  CHECK(g0.loss == 0.0);
  for (double g : g0.gradient) CHECK(g == 0.0);

  const auto g1 = ffnn_loss_and_gradient(m, x, y, w, 0.01);
  const auto p = m.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(g1.gradient[i] == 2 * 0.01 * p[i]);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(3, 0);
  for (int c = 0; c < 50; ++c) {
    const int h = 1 + static_cast<int>(rng.index(5));
    const int d = 1 + static_cast<int>(rng.index(7));
    const auto m = random_model(rng, h, d);
    const auto x = random_inputs(rng, 30, d);
    std::vector<double> y(30), w(30);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    for (auto& v : w) v = rng.uniform(0.0, 1.0);
    const double lambda = rng.uniform(0.0, 0.01);

    const auto analytic = ffnn_loss_and_gradient(m, x, y, w, lambda);
    const auto p = m.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double step = 1e-5;
      auto plus = p, minus = p;
      plus[i] += step;
      minus[i] -= step;
      FfnnModel mp = m, mm = m;
      mp.set_parameters(plus);
      mm.set_parameters(minus);
      const double fd = (ffnn_loss_and_gradient(mp, x, y, w, lambda).loss -
                         ffnn_loss_and_gradient(mm, x, y, w, lambda).loss) / (2 * step);
      const double a = analytic.gradient[i];
      CAPTURE(c);
      CAPTURE(i);
      CHECK(std::abs(a - fd) <= 1e-4 * std::max({std::abs(a), std::abs(fd), 1e-3}));
    }
  }
}

TEST_CASE("optimizer minimises a quadratic and never increases the objective") {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2 * (x[0] - 3);
    g[1] = 20 * (x[1] + 1);
    return (x[0] - 3) * (x[0] - 3) + 10 * (x[1] + 1) * (x[1] + 1);
  };
  const auto r = minimize_bfgs(f, {0.0, 0.0}, 200, 1e-10);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 3) < 1e-8);
  CHECK(std::abs(r.x[1] + 1) < 1e-8);
  CHECK(r.value <= r.initial_value);
}

TEST_CASE("training fits a constant") {
  Rng data(4, 0);
  const auto x = random_inputs(data, 200, 2);
  const std::vector<double> y(200, 2.0), w(200, 1.0);
  Rng rng(4, 1);
  const auto res = train_net(x, y, w, TrainConfig{}, rng);
  const auto pred = res.model.predict_batch(x);
  CHECK((pred.array() - 2.0).abs().maxCoeff() < 1e-3);
  for (const auto& r : res.restarts) CHECK(r.final_loss <= r.initial_loss);
}

TEST_CASE("training recovers a logistic target") {
  Rng data(5, 0);
  const auto x = random_inputs(data, 1000, 2);
  std::vector<double> y(1000), w(1000, 1.0);
  for (int i = 0; i < 1000; ++i) y[static_cast<std::size_t>(i)] = logistic(x(i, 0));
  TrainConfig cfg;
  Rng rng(5, 1);
  const auto res = train_net(x, y, w, cfg, rng);
  const auto pred = res.model.predict_batch(x);
  double sse = 0;
  for (int i = 0; i < 1000; ++i) sse += std::pow(pred(i) - y[static_cast<std::size_t>(i)], 2);
  CHECK(std::sqrt(sse / 1000) <= 0.01);
}

TEST_CASE("training is deterministic") {
  Rng data(6, 0);
  const auto x = random_inputs(data, 100, 3);
  std::vector<double> y(100), w(100);
  for (int i = 0; i < 100; ++i) {
    y[static_cast<std::size_t>(i)] = std::sin(x(i, 0)) + 0.1 * data.uniform(-1, 1);
    w[static_cast<std::size_t>(i)] = data.uniform(0, 1);
  }
  Rng r1(7, 0), r2(7, 0);
  const auto a = train_net(x, y, w, TrainConfig{}, r1);
  const auto b = train_net(x, y, w, TrainConfig{}, r2);
  CHECK(a.model.net.parameters() == b.model.net.parameters());
  CHECK(a.model.to_json() == b.model.to_json());
}

TEST_CASE("stronger weight decay shrinks the weights") {
  Rng data(8, 0);
  const auto x = random_inputs(data, 150, 2);
  std::vector<double> y(150), w(150, 1.0);
  for (int i = 0; i < 150; ++i) y[static_cast<std::size_t>(i)] = 3 * std::tanh(2 * x(i, 1)) + data.uniform(-0.2, 0.2);
  TrainConfig lo, hi;
  lo.restarts = hi.restarts = 1;
  lo.lambda = 1e-4;
  hi.lambda = 1.0;
  Rng r1(9, 0), r2(9, 0);
  const auto a = train_net(x, y, w, lo, r1);
  const auto b = train_net(x, y, w, hi, r2);
  CHECK(norm2(b.model.net.parameters()) <= norm2(a.model.net.parameters()) + 1e-6);
}

TEST_CASE("few rows warn instead of failing") {
  Rng data(10, 0);
  const auto x = random_inputs(data, 5, 3);
  const std::vector<double> y{1, 2, 3, 4, 5}, w(5, 1.0);
  Rng rng(10, 1);
  const auto res = train_net(x, y, w, TrainConfig{}, rng);
  CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("log squared residuals are clamped") {
  const auto r = log_squared_residuals(std::vector<double>{1.0, 2.0, 5.0}, std::vector<double>{1.0, 1.0, 5.0 + 1e-12});
  CHECK(r[0] == std::log(kResidualFloor * kResidualFloor));
  CHECK(r[1] == 0.0);
  CHECK(r[2] == std::log(kResidualFloor * kResidualFloor));
}

TEST_CASE("mean and log-variance fits") {
  Rng data(11, 0);
  std::normal_distribution<double> normal;
  const int m = 4000;
  Eigen::MatrixXd x(m, 1);
  std::vector<double> y(m), w(m, 1.0);
  for (int i = 0; i < m; ++i) {
    x(i, 0) = data.uniform(-1.0, 1.0);
    y[static_cast<std::size_t>(i)] = 0.5 * x(i, 0) + std::exp(x(i, 0)) * normal(data);
  }
  Rng rng(11, 1);
  const auto fit = fit_mean_var(x, y, w, TrainConfig{}, rng);

  // slope of log sigma^2 against s by least squares on a grid
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = 41;
  for (int i = 0; i < n; ++i) {
    const double s = -0.9 + 1.8 * i / (n - 1);
    const double lv = 2 * std::log(fit.nets.sigma(std::vector<double>{s}));
    CHECK(fit.nets.sigma(std::vector<double>{s}) > 0.0);
    sx += s;
    sy += lv;
    sxx += s * s;
    sxy += s * lv;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.2));

  const auto back = MeanVarNets::from_json(fit.nets.to_json());
  for (double s : {-0.5, 0.0, 0.7}) {
    CHECK(back.mean(std::vector<double>{s}) == fit.nets.mean(std::vector<double>{s}));
    CHECK(back.sigma(std::vector<double>{s}) == fit.nets.sigma(std::vector<double>{s}));
  }
}

TEST_CASE("noiseless data drives the log-variance target to the floor") {
  Rng data(12, 0);
  Eigen::MatrixXd x(300, 1);
  std::vector<double> y(300), w(300, 1.0);
  for (int i = 0; i < 300; ++i) {
    x(i, 0) = data.uniform(-1, 1);
    y[static_cast<std::size_t>(i)] = 1.0;
  }
  Rng rng(12, 1);
  const auto fit = fit_mean_var(x, y, w, TrainConfig{}, rng);
  for (double s : {-0.8, 0.0, 0.8}) {
    const double sigma = fit.nets.sigma(std::vector<double>{s});
    CHECK(sigma > 0.0);
    CHECK(sigma < 1e-3);
  }
}

TEST_CASE("rescaling the weights leaves the unregularised fit unchanged") {
  Rng data(13, 0);
  const auto x = random_inputs(data, 120, 2);
  std::vector<double> y(120), w(120), w10(120);
  for (int i = 0; i < 120; ++i) {
    y[static_cast<std::size_t>(i)] = x(i, 0) * x(i, 1) + data.uniform(-0.1, 0.1);
    w[static_cast<std::size_t>(i)] = 0.5;
    w10[static_cast<std::size_t>(i)] = 5.0;
  }
  TrainConfig cfg;
  cfg.lambda = 0.0;
  Rng r1(14, 0), r2(14, 0);
  const auto a = fit_mean_var(x, y, w, cfg, r1);
  const auto b = fit_mean_var(x, y, w10, cfg, r2);
  for (double s : {-1.0, 0.0, 1.5}) {
    const std::vector<double> v{s, -s};
    CHECK(a.nets.mean(v) == doctest::Approx(b.nets.mean(v)).epsilon(1e-9));
    CHECK(a.nets.sigma(v) == doctest::Approx(b.nets.sigma(v)).epsilon(1e-9));
  }
}

TEST_CASE("train config json and validation") {
  TrainConfig c;
  CHECK(c.hidden_units == 4);
  CHECK(c.lambda == 0.001);
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.hidden_units == c.hidden_units);
  CHECK(back.restarts == c.restarts);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"hidden_units", 0}}), Error);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"lambda", -1.0}}), Error);
}

}
