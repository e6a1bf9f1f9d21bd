#include "abc/simd.hpp"

namespace abc::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void accumulate_scaled_sq_scalar(const double* col, double center, double inv_scale, double* acc,
                                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (col[i] - center) * inv_scale;
    acc[i] += u * u;
  }
}

void epanechnikov_scalar(const double* dist, double delta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = dist[i] / delta;
    out[i] = dist[i] < delta ? 1.0 - u * u : 0.0;
  }
}

void multiply_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels table{Isa::scalar,       dot_scalar,         axpy_scalar,
                             accumulate_scaled_sq_scalar, epanechnikov_scalar, multiply_scalar};
  return table;
}

}  // namespace abc::simd
