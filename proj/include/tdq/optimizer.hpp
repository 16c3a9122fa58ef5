#pragma once

#include <cstdint>
#include <vector>

#include "tdq/tensor.hpp"

namespace tdq::tensor {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

// Adam with global-norm gradient clipping. Gradients are zeroed after every
// step.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  // Throws State if any parameter has no gradient.
  void step();

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  double last_grad_norm() const noexcept { return last_norm_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  double last_norm_ = 0.0;
};

}  // namespace tdq::tensor
