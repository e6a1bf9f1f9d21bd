#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant picked at runtime. Elementwise kernels produce bitwise-equal
// results on every ISA; `dot` differs only by summation order.

namespace abc::simd {

enum class Isa { scalar, avx2 };

struct Kernels {
  Isa isa;
  /// sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// acc[i] += ((col[i] - center) * inv_scale)^2
  void (*accumulate_scaled_sq)(const double* col, double center, double inv_scale, double* acc,
                               std::size_t n);
  /// out[i] = dist[i] < delta ? 1 - (dist[i] / delta)^2 : 0
  void (*epanechnikov)(const double* dist, double delta, double* out, std::size_t n);
  /// out[i] = a[i] * b[i]
  void (*multiply)(const double* a, const double* b, double* out, std::size_t n);
};

const Kernels& scalar_kernels();
bool isa_supported(Isa isa);
/// Throws abc::Error(config) when the ISA is unavailable on this host/build.
const Kernels& kernels_for(Isa isa);

/// Active kernel table: the best supported ISA unless ABC_SIMD=scalar|avx2
/// overrides it at first use.
const Kernels& kernels();
void set_active(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace abc::simd
