#include <immintrin.h>

#include "abc/simd.hpp"

namespace abc::simd {
namespace {

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void accumulate_scaled_sq_avx2(const double* col, double center, double inv_scale, double* acc,
                               std::size_t n) {
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vs = _mm256_set1_pd(inv_scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(col + i), vc), vs);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(u, u)));
  }
  for (; i < n; ++i) {
    const double u = (col[i] - center) * inv_scale;
    acc[i] += u * u;
  }
}

void epanechnikov_avx2(const double* dist, double delta, double* out, std::size_t n) {
  const __m256d vd = _mm256_set1_pd(delta);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_loadu_pd(dist + i);
    const __m256d u = _mm256_div_pd(t, vd);
    const __m256d w = _mm256_sub_pd(one, _mm256_mul_pd(u, u));
    const __m256d inside = _mm256_cmp_pd(t, vd, _CMP_LT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(inside, w));
  }
  for (; i < n; ++i) {
    const double u = dist[i] / delta;
    out[i] = dist[i] < delta ? 1.0 - u * u : 0.0;
  }
}

void multiply_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels table{Isa::avx2,        dot_avx2,          axpy_avx2,
                             accumulate_scaled_sq_avx2, epanechnikov_avx2, multiply_avx2};
  return table;
}

}  // namespace abc::simd
