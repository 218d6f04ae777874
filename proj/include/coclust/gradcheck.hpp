#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "coclust/tape.hpp"
#include "coclust/tensor.hpp"

namespace coclust {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Pass/fail bound on relative error |a - n| / max(|a|, |n|, scale_floor).
  double tol = 1e-4;
  double scale_floor = 1e-6;
  /// One-sided slopes that disagree by more than this (relative) mark a kink.
  double kink_tol = 1e-2;
};

struct CoordinateCheck {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;
};

struct GradCheckReport {
  std::size_t coordinates = 0;
  std::size_t kinks = 0;
  double max_rel_error = 0.0;
  CoordinateCheck worst;
  std::vector<CoordinateCheck> kink_coordinates;
  bool passed = true;
};

/// Builds a scalar loss on the given tape from the bound parameters.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences for every
/// coordinate of every parameter. The builder must be deterministic; a
/// repeated evaluation that differs throws NumericalError. Coordinates where
/// the left and right slopes disagree are reported as kinks and excluded from
/// the pass/fail decision. Parameter values are restored on return.
GradCheckReport grad_check(const LossBuilder& loss_fn, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

/// Evaluates the loss on a fresh tape without backward.
double evaluate_loss(const LossBuilder& loss_fn);

}  // namespace coclust
