#include "pc/gradcheck.hpp"

#include <cmath>

namespace pc {

namespace {

double eval_loss(const std::function<Var(Tape&, Binder&)>& build_loss) {
  Tape tape;
  Binder binder(tape);
  Var loss = build_loss(tape, binder);
  const Tensor& v = tape.value(loss);
  if (v.numel() != 1)
    throw ContractError("finite_diff_check: loss must be scalar, have " +
                        v.shape_str());
  return static_cast<double>(v[0]);
}

}  // namespace

GradCheckResult finite_diff_check(
    const std::function<Var(Tape&, Binder&)>& build_loss,
    std::span<const NamedParam> params, const GradCheckConfig& cfg) {
  if (!(cfg.h > 0))
    throw ContractError("finite_diff_check: step h must be positive");

  Tape tape;
  Binder binder(tape);
  Var loss = build_loss(tape, binder);
  if (tape.value(loss).numel() != 1)
    throw ContractError("finite_diff_check: loss must be scalar, have " +
                        tape.value(loss).shape_str());
  Gradients grads = tape.backward(loss);

  GradCheckResult result;
  for (const NamedParam& p : params) {
    auto leaf = binder.lookup(p.tensor);
    const Tensor* analytic = nullptr;
    if (leaf && grads.has(*leaf)) analytic = &grads.at(*leaf);

    Tensor& param = *p.tensor;
    for (size_t i = 0; i < param.numel(); ++i) {
      const real saved = param[i];
      param[i] = saved + static_cast<real>(cfg.h);
      double f_plus = eval_loss(build_loss);
      param[i] = saved - static_cast<real>(cfg.h);
      double f_minus = eval_loss(build_loss);
      param[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw NumericError("finite_diff_check: non-finite loss at " + p.name);

      double numeric = (f_plus - f_minus) / (2.0 * cfg.h);
      double an = analytic ? static_cast<double>((*analytic)[i]) : 0.0;
      double denom = std::max(std::fabs(an), std::fabs(numeric));
      double err = denom < cfg.abs_floor ? std::fabs(an - numeric)
                                         : std::fabs(an - numeric) / denom;
      result.max_abs_err = std::max(result.max_abs_err, std::fabs(an - numeric));
      ++result.checked;
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_param = p.name;
        result.worst_flat_index = i;
        result.analytic = an;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace pc
