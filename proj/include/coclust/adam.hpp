#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coclust/tensor.hpp"

namespace coclust {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameters.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamOptions options);

  /// Applies one update from each parameter's grad buffer (a missing buffer
  /// counts as zero), then clears the gradients. A non-finite gradient
  /// aborts the step before any parameter changes and throws NumericalError
  /// naming the parameter.
  void step();

  std::uint64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<NamedTensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace coclust
