#include "tdq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tdq/error.hpp"

namespace tdq::tensor {

namespace {

double evaluate(const Objective& objective) {
  Tape tape(false);
  Tensor loss = objective(tape);
  return loss.item();
}

}  // namespace

double gradient_check(const Objective& objective, std::span<Tensor> params,
                      double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    fail(ErrorKind::InvalidInput, "gradient_check epsilon must lie in (0, 1e-2]");
  }

  std::vector<std::vector<double>> saved(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad()) {
      saved[i].assign(params[i].grad().begin(), params[i].grad().end());
    }
    params[i].clear_grad();
  }

  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    Tensor loss = objective(tape);
    if (loss.size() != 1) {
      fail(ErrorKind::InvalidInput, "gradient_check objective must be scalar");
    }
    if (tape.size() > 0) tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].has_grad()) {
        analytic[i].assign(params[i].grad().begin(), params[i].grad().end());
      } else {
        analytic[i].assign(params[i].size(), 0.0);
      }
    }
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double original = values[j];
      values[j] = original + epsilon;
      const double plus = evaluate(objective);
      values[j] = original - epsilon;
      const double minus = evaluate(objective);
      values[j] = original;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[i][j];
      const double err =
          std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].clear_grad();
    if (!saved[i].empty()) {
      auto g = params[i].ensure_grad();
      std::copy(saved[i].begin(), saved[i].end(), g.begin());
    }
  }
  return worst;
}

}  // namespace tdq::tensor
