#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "abc/errors.hpp"
#include "abc/rng.hpp"
#include "abc/simd.hpp"

using namespace abc;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("scalar kernels against plain loops") {
  const auto& k = simd::scalar_kernels();
  Rng rng(1, 0);
  const auto x = random_vector(rng, 37, -2, 2);
  auto y = random_vector(rng, 37, -2, 2);
  double dot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  CHECK(k.dot(x.data(), y.data(), x.size()) == doctest::Approx(dot).epsilon(1e-14));

  auto y2 = y;
  k.axpy(0.5, x.data(), y2.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y2[i] == y[i] + 0.5 * x[i]);

  std::vector<double> acc(x.size(), 1.0);
  k.accumulate_scaled_sq(x.data(), 0.25, 2.0, acc.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - 0.25) * 2.0;
    CHECK(acc[i] == 1.0 + z * z);
  }

  std::vector<double> d{0.0, 0.5, 1.0, 1.5}, w(4);
  k.epanechnikov(d.data(), 1.0, w.data(), 4);
  CHECK(w == std::vector<double>{1.0, 0.75, 0.0, 0.0});
}

TEST_CASE("every supported ISA matches the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2}) {
    if (!simd::isa_supported(isa)) {
      MESSAGE("skipping unsupported ISA " << simd::isa_name(isa));
      CHECK_THROWS_AS(simd::kernels_for(isa), Error);
      continue;
    }
    const auto& k = simd::kernels_for(isa);
    Rng rng(2, static_cast<std::uint64_t>(isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 16u, 31u, 1000u, 1023u}) {
      CAPTURE(n);
      const auto x = random_vector(rng, n, -3, 3);
      const auto y = random_vector(rng, n, -3, 3);
      const auto d = random_vector(rng, n, 0, 2);

      const double dr = ref.dot(x.data(), y.data(), n);
      const double dk = k.dot(x.data(), y.data(), n);
      double mag = 0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);
      CHECK(std::abs(dr - dk) <= 1e-14 * (mag + 1.0));

      auto a1 = y, a2 = y;
      ref.axpy(-1.7, x.data(), a1.data(), n);
      k.axpy(-1.7, x.data(), a2.data(), n);
      CHECK(bitwise_equal(a1, a2));

      std::vector<double> s1(n, 0.5), s2(n, 0.5);
      ref.accumulate_scaled_sq(x.data(), 0.1, 1.9, s1.data(), n);
      k.accumulate_scaled_sq(x.data(), 0.1, 1.9, s2.data(), n);
      CHECK(bitwise_equal(s1, s2));

      std::vector<double> e1(n), e2(n);
      ref.epanechnikov(d.data(), 0.8, e1.data(), n);
      k.epanechnikov(d.data(), 0.8, e2.data(), n);
      CHECK(bitwise_equal(e1, e2));

      std::vector<double> m1(n), m2(n);
      ref.multiply(x.data(), y.data(), m1.data(), n);
      k.multiply(x.data(), y.data(), m2.data(), n);
      CHECK(bitwise_equal(m1, m2));
    }
  }
}

TEST_CASE("active kernel table can be switched") {
  const auto before = simd::kernels().isa;
  simd::set_active(simd::Isa::scalar);
  CHECK(simd::kernels().isa == simd::Isa::scalar);
  simd::set_active(before);
  CHECK(simd::kernels().isa == before);
}

}
