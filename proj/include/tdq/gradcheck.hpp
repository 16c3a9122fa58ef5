#pragma once

#include <functional>
#include <span>

#include "tdq/tensor.hpp"

namespace tdq::tensor {

// Builds a scalar objective on the given tape.
using Objective = std::function<Tensor(Tape&)>;

// Compares reverse-mode gradients against central differences and returns
// max over every parameter entry of |analytic - numeric| / max(1, |a| + |n|).
// Existing gradients on `params` are restored afterwards.
double gradient_check(const Objective& objective, std::span<Tensor> params,
                      double epsilon = 1e-4);

}  // namespace tdq::tensor
