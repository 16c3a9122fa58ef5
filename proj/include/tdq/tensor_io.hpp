#pragma once

#include <istream>
#include <ostream>

#include "tdq/tensor.hpp"

namespace tdq::tensor {

// Block layout: u32 rank, rank x u64 dims, then product(dims) x f64, all
// little-endian.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

}  // namespace tdq::tensor
