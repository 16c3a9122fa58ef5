#pragma once

// Dense double-precision inner loops. Every routine has a portable scalar
// reference; an AVX2/FMA variant is compiled when the toolchain allows it and
// selected at runtime when the CPU reports support. Set TDQ_ISA=scalar in the
// environment to pin the reference kernels.

#include <cstddef>
#include <span>

namespace tdq::kernels {

enum class Isa { Scalar, Avx2 };

const char* to_string(Isa isa) noexcept;

// y += a * x
using AxpyFn = void (*)(std::size_t n, double a, const double* x, double* y);
// sum_i x[i] * y[i]
using DotFn = double (*)(std::size_t n, const double* x, const double* y);
// y[i] += x[i] * z[i]
using FmaFn = void (*)(std::size_t n, const double* x, const double* z,
                       double* y);

struct KernelTable {
  Isa isa;
  AxpyFn axpy;
  DotFn dot;
  FmaFn fma;
};

const KernelTable& scalar_table() noexcept;

// nullptr when the AVX2 variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table() noexcept;

// Table used by the tensor engine. Resolved once on first call.
const KernelTable& active() noexcept;

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(const KernelTable& kt, std::size_t m, std::size_t n,
             std::size_t k, const double* a, const double* b, double* c);

inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  gemm_nn(active(), m, n, k, a, b, c);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  gemm_nt(active(), m, n, k, a, b, c);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  gemm_tn(active(), m, n, k, a, b, c);
}

}  // namespace tdq::kernels
