#include "coclust/adam.hpp"

#include <cmath>
#include <utility>

#include "coclust/error.hpp"

namespace coclust {

Adam::Adam(std::vector<NamedTensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.beta1 > 0.0 && options_.beta1 < 1.0 && options_.beta2 > 0.0 &&
        options_.beta2 < 1.0)) {
    throw UsageError("adam: betas must lie in (0, 1)");
  }
  if (!(options_.learning_rate > 0.0) || !(options_.epsilon > 0.0)) {
    throw UsageError("adam: learning rate and epsilon must be positive");
  }
  for (const NamedTensor& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step() {
  for (const NamedTensor& p : params_) {
    if (!p.tensor->has_grad()) continue;
    for (double g : p.tensor->grad()) {
      if (!std::isfinite(g)) throw NumericalError("adam: non-finite gradient in " + p.name);
    }
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& param = *params_[i].tensor;
    const bool has = param.has_grad();
    std::span<const double> grad = has ? std::as_const(param).grad() : std::span<const double>{};
    std::span<double> values = param.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has ? grad[k] : 0.0;
      m_[i][k] = b1 * m_[i][k] + (1.0 - b1) * g;
      v_[i][k] = b2 * v_[i][k] + (1.0 - b2) * g * g;
      const double m_hat = m_[i][k] / correction1;
      const double v_hat = v_[i][k] / correction2;
      values[k] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
    param.clear_grad();
  }
}

}  // namespace coclust
