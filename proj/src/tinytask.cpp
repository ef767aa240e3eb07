#include "pc/tinytask.hpp"

namespace pc {

TrainConfig tiny_task_train_config(const TinyTaskConfig& cfg) {
  TrainConfig tc;
  tc.model.kind = cfg.kind;
  tc.model.layers = 1;
  tc.model.heads = 1;
  tc.model.dim = tiny::kDim;
  tc.model.hidden = tiny::kHidden;
  tc.model.table_size = cfg.table_size;
  tc.model.pool = cfg.pool;
  tc.model.dropout = tiny::kDropout;
  tc.model.vocab_total = tiny::kVocabWords + 2;
  tc.model.hash_seed = static_cast<uint32_t>(cfg.seed);
  if (cfg.pool == PoolMode::kConcatProject)
    tc.model.seq_len_fixed = tiny::kSeqLen;
  tc.adam.lr = tiny::kLr;
  tc.seq_len = tiny::kSeqLen;
  tc.batch = tiny::kBatch;
  tc.seed = cfg.seed;
  tc.steps = cfg.steps;
  tc.eval_every = cfg.eval_every > 0 ? cfg.eval_every : cfg.steps;
  return tc;
}

Dataset tiny_task_train_data(uint64_t seed) {
  return make_cycle_dataset(tiny::kVocabWords, tiny::kSeqLen,
                            tiny::kTrainSequences,
                            derive_seed(seed, seed_stream::kTrainData));
}

Dataset tiny_task_eval_data(uint64_t seed) {
  return make_cycle_dataset(tiny::kVocabWords, tiny::kSeqLen,
                            tiny::kEvalSequences,
                            derive_seed(seed, seed_stream::kEvalData));
}

TinyTaskOutcome run_tiny_task(const TinyTaskConfig& cfg) {
  TrainConfig tc = tiny_task_train_config(cfg);
  Dataset train = tiny_task_train_data(cfg.seed);
  Dataset eval = tiny_task_eval_data(cfg.seed);

  TrainSession session = TrainSession::fresh(tc);
  BatchStream stream(train, tc.data_config());
  std::vector<MaskedBatch> eval_batches =
      make_eval_batches(eval, tc.data_config());

  MetricsLog log = cfg.metrics_path.empty() ? MetricsLog()
                                            : MetricsLog(cfg.metrics_path);
  train_steps(session, stream, tc.steps, eval_batches, &log);

  TinyTaskOutcome out{evaluate(session.model, eval_batches), std::move(log),
                      std::move(session)};
  return out;
}

}  // namespace pc
