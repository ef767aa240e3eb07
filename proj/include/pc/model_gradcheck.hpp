#pragma once

#include "pc/gradcheck.hpp"
#include "pc/model.hpp"

namespace pc {

// End-to-end gradient check on a deliberately tiny model (2 layers, 2 heads,
// d = 8, one 6-token sequence, 31-slot tables, 17-word vocab) so central
// differences stay cheap and well-conditioned. Dropout is off: the loss must
// be deterministic for finite differences to mean anything.
struct ModelGradCheckSpec {
  ModelKind kind = ModelKind::kPairConnect;
  PoolMode pool = PoolMode::kPoolThenMlp;  // ignored by the baseline
  double h = 1e-5;
  uint64_t seed = 7;
};

GradCheckResult run_model_gradcheck(const ModelGradCheckSpec& spec);

}  // namespace pc
