#include "coclust/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>

#include "coclust/error.hpp"

namespace coclust {

double evaluate_loss(const LossBuilder& loss_fn) {
  Tape tape;
  Var loss = loss_fn(tape);
  const Tensor& value = tape.value(loss);
  if (value.size() != 1) throw UsageError("grad_check: loss must be a scalar");
  return value[0];
}

GradCheckReport grad_check(const LossBuilder& loss_fn, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0) || !(options.tol > 0.0)) {
    throw UsageError("grad_check: eps and tol must be positive");
  }
  for (const NamedTensor& p : params) {
    p.tensor->set_requires_grad(true);
    p.tensor->zero_grad();
  }
  double base = 0.0;
  {
    Tape tape;
    Var loss = loss_fn(tape);
    base = tape.value(loss)[0];
    tape.backward(loss);
  }
  const double again = evaluate_loss(loss_fn);
  if (std::bit_cast<std::uint64_t>(again) != std::bit_cast<std::uint64_t>(base)) {
    throw NumericalError("grad_check: loss function is not deterministic");
  }
  if (!std::isfinite(base)) throw NumericalError("grad_check: loss is not finite");

  GradCheckReport report;
  for (const NamedTensor& p : params) {
    std::vector<double> analytic(p.tensor->grad().begin(), p.tensor->grad().end());
    std::span<double> values = p.tensor->data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + options.eps;
      const double plus = evaluate_loss(loss_fn);
      values[k] = saved - options.eps;
      const double minus = evaluate_loss(loss_fn);
      values[k] = saved;

      CoordinateCheck c;
      c.param = p.name;
      c.index = k;
      c.analytic = analytic[k];
      c.numeric = (plus - minus) / (2.0 * options.eps);
      const double right = (plus - base) / options.eps;
      const double left = (base - minus) / options.eps;
      const double slope_scale = std::max({1.0, std::abs(right), std::abs(left)});
      c.kink = std::abs(right - left) > options.kink_tol * slope_scale;
      const double denom =
          std::max({std::abs(c.analytic), std::abs(c.numeric), options.scale_floor});
      c.rel_error = std::abs(c.analytic - c.numeric) / denom;

      ++report.coordinates;
      if (c.kink) {
        ++report.kinks;
        report.kink_coordinates.push_back(c);
        continue;
      }
      if (c.rel_error >= report.max_rel_error) {
        report.max_rel_error = c.rel_error;
        report.worst = c;
      }
    }
    p.tensor->clear_grad();
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

}  // namespace coclust
