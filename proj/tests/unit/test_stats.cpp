#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "abc/errors.hpp"
#include "abc/rng.hpp"
#include "abc/stats.hpp"

using namespace abc;

namespace {

// Smallest sample whose cumulative weight reaches q, by enumeration over candidates.
double brute_weighted_quantile(const std::vector<double>& x, const std::vector<double>& w, double q) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> candidates = x;
  std::sort(candidates.begin(), candidates.end());
  for (double c : candidates) {
    double cum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] <= c) cum += w[i];
    if (cum >= q * total * (1.0 - 1e-12)) return c;
  }
  return candidates.back();
}

double f_density(double x, int d1, int d2) {
  const double a = d1 / 2.0, b = d2 / 2.0;
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return std::exp(a * std::log(d1 / static_cast<double>(d2)) + (a - 1) * std::log(x) -
                  (a + b) * std::log1p(d1 * x / d2) - log_beta);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("epanechnikov values and bandwidth errors") {
  CHECK(epanechnikov(0.0, 1.0) == 1.0);
  CHECK(epanechnikov(1.0, 1.0) == 0.0);
  CHECK(epanechnikov(0.5, 1.0) == 0.75);
  CHECK(epanechnikov(3.0, 1.0) == 0.0);
  CHECK_THROWS_AS(epanechnikov(0.1, 0.0), Error);
  CHECK_THROWS_AS(epanechnikov(0.1, -1.0), Error);
  try {
    epanechnikov(0.1, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_bandwidth);
  }
}

TEST_CASE("epanechnikov is nonincreasing and scale invariant") {
  Rng rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    const double delta = rng.uniform(0.01, 5.0);
    const double t1 = rng.uniform(0.0, 6.0);
    const double t2 = t1 + rng.uniform(0.0, 1.0);
    CHECK(epanechnikov(t2, delta) <= epanechnikov(t1, delta));
    const double c = std::ldexp(1.0, static_cast<int>(rng.index(20)) - 10);
    CHECK(epanechnikov(c * t1, c * delta) == epanechnikov(t1, delta));
    const double v = epanechnikov(t1, delta);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK((v == 0.0) == (t1 >= delta));
  }
}

TEST_CASE("batch kernel weights match the scalar kernel") {
  Rng rng(12, 0);
  std::vector<double> d(1001);
  for (auto& x : d) x = rng.uniform(0.0, 2.0);
  d[5] = 1.3;
  const auto w = epanechnikov_weights(d, 1.3);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(w[i] == epanechnikov(d[i], 1.3));
}

TEST_CASE("mad_scale") {
  CHECK(mad_scale(std::vector<double>{3, 3, 3}) == 0.0);
  CHECK(mad_scale(std::vector<double>{1, 2, 3, 4, 5}) == 1.0);
  CHECK_THROWS_AS(mad_scale(std::vector<double>{}), Error);
  Rng rng(13, 0);
  std::normal_distribution<double> normal;
  std::vector<double> z(10000);
  for (auto& v : z) v = normal(rng);
  CHECK(std::abs(mad_scale(z) - 0.6744897501960817) < 0.02);
}

TEST_CASE("weighted quantile examples") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> eq(5, 1.0);
  CHECK(weighted_quantile(x, eq, 0.5) == 3.0);
  for (double q : {0.01, 0.3, 0.5, 0.99})
    CHECK(weighted_quantile(std::vector<double>{1, 2}, std::vector<double>{0, 1}, q) == 2.0);
  CHECK(weighted_quantile(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 1, 1, 5}, 0.5) == 4.0);
  CHECK_THROWS_AS(weighted_quantile(x, std::vector<double>(5, 0.0), 0.5), Error);
  CHECK_THROWS_AS(weighted_quantile(x, std::vector<double>(4, 1.0), 0.5), Error);
}

TEST_CASE("weighted quantile matches brute force on random cases") {
  Rng rng(14, 0);
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + rng.index(30);
    std::vector<double> x(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so ties occur
      x[i] = std::floor(rng.uniform(0.0, 10.0));
      w[i] = rng.index(4) == 0 ? 0.0 : rng.uniform(0.0, 3.0);
    }
    if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) w[0] = 1.0;
    const double q = rng.uniform(0.001, 0.999);
    CHECK(weighted_quantile(x, w, q) == brute_weighted_quantile(x, w, q));
    const std::vector<double> probs{0.025, 0.25, 0.5, 0.75, 0.975};
    const auto many = weighted_quantiles(x, w, probs);
    for (std::size_t k = 0; k < probs.size(); ++k) CHECK(many[k] == brute_weighted_quantile(x, w, probs[k]));
    CHECK(std::is_sorted(many.begin(), many.end()));
  }
}

TEST_CASE("equal weights reproduce the empirical quantile") {
  Rng rng(15, 0);
  for (int c = 0; c < 200; ++c) {
    std::vector<double> x(1 + rng.index(50));
    for (auto& v : x) v = rng.uniform(-5.0, 5.0);
    const std::vector<double> w(x.size(), 2.5);
    const double q = rng.uniform(0.01, 0.99);
    CHECK(weighted_quantile(x, w, q) == empirical_quantile(x, q));
  }
}

TEST_CASE("response transforms") {
  const auto logit = ResponseTransform::logit(0.0, 1.0);
  CHECK(logit.forward(0.5) == 0.0);
  CHECK(logit.inverse(logit.forward(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(ResponseTransform::log().forward(1.0) == 0.0);
  CHECK_THROWS_AS(logit.forward(1.0), Error);
  CHECK_THROWS_AS(logit.forward(-0.1), Error);
  CHECK_THROWS_AS(ResponseTransform::log().forward(0.0), Error);
  CHECK_THROWS_AS(ResponseTransform::logit(2.0, 1.0), Error);
  // inverse lands strictly inside the interval even for extreme inputs
  CHECK(logit.inverse(1e6) < 1.0);
  CHECK(logit.inverse(-1e6) > 0.0);
  CHECK(ResponseTransform::log().inverse(-1e6) > 0.0);
}

TEST_CASE("transform roundtrip on random domain points") {
  Rng rng(16, 0);
  const auto logit = ResponseTransform::logit(-3.0, 7.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-2.9, 6.9);
    CHECK(std::abs(logit.inverse(logit.forward(a)) - a) <= 1e-12 * std::abs(a) + 1e-15);
    const double b = std::exp(rng.uniform(-20.0, 20.0));
    CHECK(std::abs(ResponseTransform::log().inverse(ResponseTransform::log().forward(b)) - b) <= 1e-12 * b);
    const double c = rng.uniform(-100.0, 100.0);
    CHECK(ResponseTransform::identity().inverse(ResponseTransform::identity().forward(c)) == c);
  }
  const auto back = ResponseTransform::from_json(logit.to_json());
  CHECK(back == logit);
}

TEST_CASE("F upper tail") {
  for (int d : {1, 2, 5, 19, 99}) CHECK(f_tail_p(1.0, d, d) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f_tail_p(1e6, 10, 10) < 1e-10);
  CHECK_THROWS_AS(f_tail_p(1.0, 0, 3), Error);
  CHECK_THROWS_AS(f_tail_p(1.0, 3, -1), Error);

  const double oracle = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double x) { return f_density(x, 99, 99); }, 1.5, std::numeric_limits<double>::infinity(), 15, 1e-13);
  CHECK(std::abs(f_tail_p(1.5, 99, 99) - oracle) < 1e-6);
  CHECK(std::abs(f_tail_p(1.5, 99, 99) - 0.022467362606315218) < 1e-9);
}

TEST_CASE("F reciprocal symmetry") {
  Rng rng(17, 0);
  for (int i = 0; i < 500; ++i) {
    const double r = std::exp(rng.uniform(-5.0, 5.0));
    const int d = 1 + static_cast<int>(rng.index(200));
    CHECK(std::abs(f_tail_p(r, d, d) + f_tail_p(1.0 / r, d, d) - 1.0) <= 1e-10);
  }
}

TEST_CASE("sample variance and KS statistic") {
  CHECK(sample_variance(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(5.0 / 3.0));
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, w(3, 1.0);
  CHECK(ks_statistic(a, w, b, w) == 1.0);
  CHECK(ks_statistic(a, w, a, w) == 0.0);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100000; ++i) {
    const auto x = a();
    REQUIRE(x == b());
    differs |= x != c();
  }
  CHECK(differs);
  CHECK(Rng::derive(1, {2, 3}) != Rng::derive(1, {3, 2}));
}

TEST_CASE("rng distributions have the right means") {
  Rng rng(18, 0);
  const int n = 200000;
  double su = 0, se = 0, sp = 0, sb = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    CHECK_FALSE((u <= 0.0 || u >= 1.0));
    su += u;
    se += rng.exponential(2.0);
    sp += static_cast<double>(rng.poisson(3.5));
    sb += static_cast<double>(rng.binomial(20, 0.3));
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(se / n - 0.5) < 4 * 0.5 / std::sqrt(n));
  CHECK(std::abs(sp / n - 3.5) < 4 * std::sqrt(3.5 / n));
  CHECK(std::abs(sb / n - 6.0) < 4 * std::sqrt(4.2 / n));
  CHECK(rng.poisson(0.0) == 0);
  for (int i = 0; i < 1000; ++i) CHECK(rng.index(7) < 7);
}

}
