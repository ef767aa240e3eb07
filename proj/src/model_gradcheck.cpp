#include "pc/model_gradcheck.hpp"

#include "pc/training.hpp"

namespace pc {

GradCheckResult run_model_gradcheck(const ModelGradCheckSpec& spec) {
  constexpr size_t kSeqLen = 6;
  constexpr size_t kVocabTotal = 17;

  ModelConfig mc;
  mc.kind = spec.kind;
  mc.layers = 2;
  mc.heads = 2;
  mc.dim = 8;
  mc.hidden = 8;
  mc.table_size = 31;
  mc.pool = spec.pool;
  mc.dropout = 0.0;
  mc.vocab_total = kVocabTotal;
  mc.seq_len_fixed = spec.pool == PoolMode::kConcatProject ? kSeqLen : 0;
  mc.hash_seed = static_cast<uint32_t>(spec.seed);

  Model model = Model::make(mc, spec.seed);

  Rng rng(derive_seed(spec.seed, seed_stream::kMask));
  MaskedBatch batch;
  batch.batch = 1;
  batch.seq_len = kSeqLen;
  batch.inputs.resize(kSeqLen);
  batch.targets.assign(kSeqLen, MaskedBatch::kIgnore);
  for (auto& id : batch.inputs)
    id = kFirstWordId +
         static_cast<int32_t>(rng.below(kVocabTotal - kFirstWordId));
  for (size_t pos : {size_t(1), size_t(4)}) {
    batch.targets[pos] = batch.inputs[pos];
    batch.inputs[pos] = kMaskId;
  }
  batch.mask_positions.push_back({1, 4});

  auto build_loss = [&](Tape& tape, Binder& binder) {
    Var logits =
        model.forward(binder, batch.inputs, batch.batch, nullptr, false);
    return mlm_loss(tape, logits, batch);
  };

  std::vector<NamedParam> params = model.parameters();
  GradCheckConfig gc;
  gc.h = spec.h;
  return finite_diff_check(build_loss, params, gc);
}

}  // namespace pc
