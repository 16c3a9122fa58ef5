#include "tdq/tensor_io.hpp"

#include <cmath>

#include "tdq/binary_io.hpp"

namespace tdq::tensor {

namespace {
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  io::write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) io::write_u64(os, d);
  for (double v : t.values()) io::write_f64(os, v);
}

Tensor read_tensor(std::istream& is) {
  const std::uint32_t rank = io::read_u32(is, "tensor rank");
  if (rank == 0 || rank > kMaxRank) fail(ErrorKind::Format, "implausible tensor rank");
  Shape shape;
  std::uint64_t total = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = io::read_u64(is, "tensor dims");
    if (d == 0 || d > kMaxElements) fail(ErrorKind::Format, "implausible tensor dimension");
    total *= d;
    if (total > kMaxElements) fail(ErrorKind::Format, "tensor too large");
    shape.push_back(static_cast<std::size_t>(d));
  }
  std::vector<double> values(static_cast<std::size_t>(total));
  for (double& v : values) {
    v = io::read_f64(is, "tensor payload");
    if (!std::isfinite(v)) fail(ErrorKind::Format, "non-finite value in tensor payload");
  }
  return Tensor::from(std::move(shape), std::move(values));
}

}  // namespace tdq::tensor
