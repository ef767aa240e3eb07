#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pc/mlmdata.hpp"
#include "pc/model.hpp"

namespace pc {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;
};

// First and second moment estimates, aligned with a fixed parameter order.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  uint64_t t = 0;
  AdamConfig cfg;

  static AdamState make(std::span<const NamedParam> params, AdamConfig cfg);
};

// One bias-corrected Adam update. Rejects the whole step (no mutation) if any
// gradient is non-finite.
void adam_step(std::span<const NamedParam> params,
               std::span<const Tensor> grads, AdamState& st);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  size_t seq_len = 128;
  size_t batch = 32;
  double mask_fraction = 0.15;
  double seq_mask_fraction = 0.90;
  uint64_t seed = 42;
  uint64_t steps = 1000;
  uint64_t eval_every = 100;

  DataConfig data_config() const {
    return DataConfig{seq_len, batch, mask_fraction, seq_mask_fraction, seed};
  }
  void validate() const;
};

// Mean masked-token cross-entropy; exactly zero when nothing is masked.
Var mlm_loss(Tape& t, Var logits, const MaskedBatch& batch);
real mlm_loss(const Tensor& logits, const MaskedBatch& batch);

struct MetricsRow {
  uint64_t step;
  std::string split;  // "train" or "eval"
  double loss;
  double wall_ms;
};

// In-memory metrics with an optional CSV sink, appended row by row.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::string& csv_path);
  void add(const MetricsRow& row);
  const std::vector<MetricsRow>& rows() const { return rows_; }

  static std::string format_row(const MetricsRow& row);
  static constexpr const char* kHeader = "step,split,loss,wall_ms";

 private:
  std::vector<MetricsRow> rows_;
  std::string path_;
};

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  size_t masked = 0;
};

EvalResult evaluate(const Model& model, std::span<const MaskedBatch> batches);

// A training run in progress: everything needed to take the next step.
struct TrainSession {
  TrainConfig cfg;
  Model model;
  AdamState adam;
  uint64_t step = 0;

  static TrainSession fresh(const TrainConfig& cfg);
};

// Advances the session to `until_step`, drawing batches from the stream
// (which is seeked to the session's step first). Per-step dropout streams are
// derived from (cfg.seed, step), so a resumed session replays the identical
// trajectory. Evaluation runs every cfg.eval_every steps and at the end.
void train_steps(TrainSession& s, BatchStream& stream, uint64_t until_step,
                 std::span<const MaskedBatch> eval_batches, MetricsLog* log);

}  // namespace pc
