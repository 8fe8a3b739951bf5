#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nti/numkit/tape.hpp"

namespace nti::numkit {

struct GradCheckBlock {
  std::string name;
  std::size_t count = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = true;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Entries whose analytic and numeric magnitudes are both below this are compared absolutely.
  double magnitude_floor = 1e-6;
};

// Compares analytic gradients of `loss_fn` against central differences, element by element.
// `loss_fn` must build its graph on the supplied tape and return a scalar.
GradCheckReport grad_check(std::span<Parameter* const> params,
                           const std::function<Var(Tape&)>& loss_fn, double tolerance,
                           GradCheckOptions options = {});

}  // namespace nti::numkit
