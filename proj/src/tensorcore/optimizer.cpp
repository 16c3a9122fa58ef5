#include "tdq/optimizer.hpp"

#include <cmath>

#include "tdq/error.hpp"

namespace tdq::tensor {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate >= 0.0)) {
    fail(ErrorKind::InvalidInput, "learning rate must be non-negative");
  }
  if (!(config_.clip_norm > 0.0)) {
    fail(ErrorKind::InvalidInput, "clip norm must be positive");
  }
  for (const Tensor& p : params_) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  double sq = 0.0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      fail(ErrorKind::State, "parameter " + std::to_string(i) +
                                 " has no gradient; run backward first");
    }
    for (double g : params_[i].grad()) sq += g * g;
  }
  last_norm_ = std::sqrt(sq);
  if (!std::isfinite(last_norm_)) fail(ErrorKind::Numeric, "non-finite gradient norm");
  const double clip =
      last_norm_ > config_.clip_norm ? config_.clip_norm / last_norm_ : 1.0;

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_values();
    auto g = params_[i].mutable_grad();
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    params_[i].zero_grad();
  }
}

}  // namespace tdq::tensor
