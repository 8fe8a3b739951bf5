#include "nti/numkit/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nti::numkit {
namespace {

double evaluate(const std::function<Var(Tape&)>& loss_fn) {
  Tape tape;
  return loss_fn(tape).value().item();
}

}  // namespace

GradCheckReport grad_check(std::span<Parameter* const> params,
                           const std::function<Var(Tape&)>& loss_fn, double tolerance,
                           GradCheckOptions options) {
  Gradients analytic;
  {
    Tape tape;
    const Var loss = loss_fn(tape);
    analytic = backward(tape, loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  const double h = options.step;
  for (Parameter* p : params) {
    GradCheckBlock block;
    block.name = p->name;
    block.count = p->value.size();
    const Tensor zeros(p->value.shape(), 0.0);
    const Tensor& g = analytic.contains(*p) ? analytic.of(*p) : zeros;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value[i] = original + h;
      const double up = evaluate(loss_fn);
      p->value[i] = original - h;
      const double down = evaluate(loss_fn);
      p->value[i] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double diff = std::abs(numeric - g[i]);
      const double scale = std::max({std::abs(numeric), std::abs(g[i]), options.magnitude_floor});
      block.max_absolute_error = std::max(block.max_absolute_error, diff);
      block.max_relative_error = std::max(block.max_relative_error, diff / scale);
    }
    report.max_relative_error = std::max(report.max_relative_error, block.max_relative_error);
    report.blocks.push_back(std::move(block));
  }
  report.within_tolerance = report.max_relative_error < tolerance;
  return report;
}

}  // namespace nti::numkit
