#pragma once

#include <functional>
#include <span>
#include <string>

#include "pc/tape.hpp"

namespace pc {

struct GradCheckConfig {
  double h = 1e-5;          // central-difference step
  double abs_floor = 1e-8;  // below this magnitude, compare absolutely
};

struct GradCheckResult {
  double max_rel_err = 0;
  double max_abs_err = 0;  // plain |analytic - numeric| over all coordinates
  std::string worst_param;
  size_t worst_flat_index = 0;
  double analytic = 0;
  double numeric = 0;
  size_t checked = 0;
};

// Compares tape gradients against central finite differences for every scalar
// in `params`. build_loss must rebuild the same deterministic scalar loss on a
// fresh tape each call, binding parameters through the given Binder so their
// analytic gradients can be found. Parameters are perturbed in place and
// restored.
GradCheckResult finite_diff_check(
    const std::function<Var(Tape&, Binder&)>& build_loss,
    std::span<const NamedParam> params, const GradCheckConfig& cfg = {});

}  // namespace pc
