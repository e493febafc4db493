#pragma once

#include <functional>
#include <vector>

#include "mage/params.hpp"
#include "mage/tape.hpp"

namespace mage {

/// Builds a scalar loss on the given (fresh) tape. The closure binds whatever
/// parameters it checks; it must be deterministic across calls.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = 0;
  double analytic = 0.0, numeric = 0.0;
};

/// Central-difference check of the tape gradient for every entry of every
/// parameter in `params`. Relative error per entry is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const LossBuilder& f, std::vector<Parameter*> params,
                           double step = 1e-5);

}  // namespace mage
