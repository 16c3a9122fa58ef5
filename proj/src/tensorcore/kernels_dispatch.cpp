#include <cstdlib>
#include <cstring>

#include "tdq/kernels.hpp"

namespace tdq::kernels {

#if defined(TDQ_HAVE_AVX2)
const KernelTable& avx2_table_unchecked() noexcept;
#endif

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() noexcept {
#if defined(TDQ_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable* table = [] {
    const char* pin = std::getenv("TDQ_ISA");
    if (pin != nullptr && std::strcmp(pin, "scalar") == 0) {
      return &scalar_table();
    }
    const KernelTable* fast = avx2_table();
    return fast != nullptr ? fast : &scalar_table();
  }();
  return *table;
}

void gemm_nn(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av != 0.0) kt.axpy(n, av, b + p * n, crow);
    }
  }
}

void gemm_nt(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += kt.dot(k, arow, b + j * k);
  }
}

void gemm_tn(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av != 0.0) kt.axpy(n, av, brow, c + i * n);
    }
  }
}

}  // namespace tdq::kernels
