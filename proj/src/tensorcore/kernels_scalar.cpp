#include "tdq/kernels.hpp"

namespace tdq::kernels {
namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void fma_scalar(std::size_t n, const double* x, const double* z, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i] * z[i];
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar, &axpy_scalar, &dot_scalar,
                                 &fma_scalar};
  return table;
}

}  // namespace tdq::kernels
