#pragma once

#include <string>

#include "pc/checkpoint.hpp"
#include "pc/training.hpp"

namespace pc {

// Small deterministic-cycle MLM task both model families can master in a few
// hundred steps: every sequence walks the successor cycle over a 20-word
// vocabulary from a random starting word, so a masked slot is implied by any
// visible neighbor. Used by quick experiments (table-size ablations, resume
// checks) and as a convergence smoke test.
namespace tiny {
constexpr size_t kVocabWords = 20;
constexpr size_t kSeqLen = 6;
constexpr size_t kBatch = 32;
constexpr size_t kDim = 32;
constexpr size_t kHidden = 64;
constexpr size_t kTrainSequences = 512;
constexpr size_t kEvalSequences = 128;
constexpr double kLr = 1e-3;
constexpr double kDropout = 0.0;
constexpr uint64_t kDefaultSteps = 2000;
}  // namespace tiny

struct TinyTaskConfig {
  ModelKind kind = ModelKind::kPairConnect;
  PoolMode pool = PoolMode::kPoolThenMlp;
  size_t table_size = 1024;
  uint64_t seed = 42;
  uint64_t steps = tiny::kDefaultSteps;
  uint64_t eval_every = 0;  // 0: evaluate only at the end
  std::string metrics_path;
};

TrainConfig tiny_task_train_config(const TinyTaskConfig& cfg);
Dataset tiny_task_train_data(uint64_t seed);
Dataset tiny_task_eval_data(uint64_t seed);

struct TinyTaskOutcome {
  EvalResult eval;
  MetricsLog log;
  TrainSession session;
};

TinyTaskOutcome run_tiny_task(const TinyTaskConfig& cfg);

}  // namespace pc
