#include <atomic>
#include <cstdlib>
#include <string>

#include "abc/errors.hpp"
#include "abc/simd.hpp"

namespace abc::simd {

#ifdef ABC_HAVE_AVX2
const Kernels& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(ABC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* initial_table() {
  if (const char* env = std::getenv("ABC_SIMD")) {
    const std::string choice(env);
    if (choice == "scalar") return &scalar_kernels();
    if (choice == "avx2" && isa_supported(Isa::avx2)) return &kernels_for(Isa::avx2);
  }
  return isa_supported(Isa::avx2) ? &kernels_for(Isa::avx2) : &scalar_kernels();
}

std::atomic<const Kernels*>& active_slot() {
  static std::atomic<const Kernels*> slot{initial_table()};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

const Kernels& kernels_for(Isa isa) {
  if (!isa_supported(isa))
    throw Error(ErrorCode::config, std::string("SIMD variant unavailable: ") +
                                       std::string(isa_name(isa)));
#ifdef ABC_HAVE_AVX2
  if (isa == Isa::avx2) return avx2_kernels();
#endif
  return scalar_kernels();
}

const Kernels& kernels() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace abc::simd
