#include <doctest.h>

#include <string>

#include <Eigen/Dense>

#include "abc/errors.hpp"
#include "abc/regression.hpp"
#include "abc/rng.hpp"

using namespace abc;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

// (X'WX)^-1 X'W y with an explicit inverse.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<double>& w) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::MatrixXd xtw = design.transpose() * wv.asDiagonal();
  return (xtw * design).inverse() * (xtw * y);
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("exact linear responses are recovered") {
  Rng rng(1, 0);
  const auto x = random_matrix(rng, 40, 3);
  Eigen::Vector3d beta0(0.5, -2.0, 3.25);
  const Eigen::VectorXd y = (x * beta0).array() + 1.5;
  std::vector<double> w(40);
  for (auto& v : w) v = rng.uniform(0.1, 1.0);
  const auto fit = fit_local_linear(x, y, w);
  CHECK(std::abs(fit.alpha(0) - 1.5) < 1e-8);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(fit.beta(k, 0) - beta0(k)) < 1e-8);
}

TEST_CASE("constant responses give zero slopes") {
  Rng rng(2, 0);
  const auto x = random_matrix(rng, 20, 2);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(20, 4.0);
  const auto fit = fit_local_linear(x, y, std::vector<double>(20, 1.0));
  CHECK(std::abs(fit.alpha(0) - 4.0) < 1e-12);
  CHECK(fit.beta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matches the weighted normal equations on random instances") {
  Rng rng(3, 0);
  for (int c = 0; c < 100; ++c) {
    const int d = 1 + static_cast<int>(rng.index(4));
    const auto x = random_matrix(rng, 50, d);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) y(i) = rng.uniform(-3.0, 3.0);
    std::vector<double> w(50);
    for (auto& v : w) v = rng.uniform(0.0, 1.0);
    const auto fit = fit_local_linear(x, y, w);
    const auto oracle = normal_equations(x, y, w);
    CHECK(std::abs(fit.alpha(0) - oracle(0)) < 1e-8);
    for (int k = 0; k < d; ++k) CHECK(std::abs(fit.beta(k, 0) - oracle(k + 1)) < 1e-8);
  }
}

TEST_CASE("zero-weight rows are ignored") {
  Rng rng(4, 0);
  auto x = random_matrix(rng, 30, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y(i) = 1.0 + x(i, 0) - x(i, 1);
  std::vector<double> w(30, 1.0);
  for (int i = 0; i < 5; ++i) {
    w[i] = 0.0;
    y(i) = 1e6;
  }
  const auto fit = fit_local_linear(x, y, w);
  CHECK(std::abs(fit.alpha(0) - 1.0) < 1e-10);
}

TEST_CASE("singular designs name the offending column") {
  Rng rng(5, 0);
  Eigen::MatrixXd x = random_matrix(rng, 20, 3);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(20);
  try {
    fit_local_linear(x, y, std::vector<double>(20, 1.0));
    FAIL("expected singular_design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_design);
    CHECK(std::string(e.what()).find("stat_3") != std::string::npos);
  }

  Eigen::MatrixXd c = random_matrix(rng, 20, 2);
  c.col(1).setConstant(0.7);  // collinear with the intercept
  try {
    fit_local_linear(c, y, std::vector<double>(20, 1.0));
    FAIL("expected singular_design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_design);
    CHECK(std::string(e.what()).find("stat_2") != std::string::npos);
  }

  // fewer positive-weight rows than coefficients
  std::vector<double> sparse(20, 0.0);
  sparse[0] = sparse[1] = 1.0;
  CHECK_THROWS_AS(fit_local_linear(random_matrix(rng, 20, 2), y, sparse), Error);
}

TEST_CASE("multiple response columns are fitted independently") {
  Rng rng(6, 0);
  const auto x = random_matrix(rng, 25, 2);
  Eigen::MatrixXd y(25, 2);
  y.col(0) = (x.col(0) * 2.0).array() + 1.0;
  y.col(1) = (x.col(1) * -3.0).array() - 1.0;
  const auto fit = fit_local_linear(x, y, std::vector<double>(25, 1.0));
  CHECK(fit.beta.rows() == 2);
  CHECK(fit.beta.cols() == 2);
  CHECK(std::abs(fit.beta(0, 0) - 2.0) < 1e-10);
  CHECK(std::abs(fit.beta(1, 1) + 3.0) < 1e-10);
  CHECK(std::abs(fit.alpha(1) + 1.0) < 1e-10);
}

}
