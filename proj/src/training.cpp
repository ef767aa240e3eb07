#include "pc/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace pc {

void AdamConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("AdamConfig: lr must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ConfigError("AdamConfig: betas must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("AdamConfig: eps must be positive");
}

AdamState AdamState::make(std::span<const NamedParam> params, AdamConfig cfg) {
  cfg.validate();
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const NamedParam& p : params) {
    st.m.emplace_back(p.tensor->shape());
    st.v.emplace_back(p.tensor->shape());
  }
  return st;
}

void adam_step(std::span<const NamedParam> params,
               std::span<const Tensor> grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw ContractError("adam_step: " + std::to_string(params.size()) +
                        " params, " + std::to_string(grads.size()) +
                        " grads, state for " + std::to_string(st.m.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].tensor->same_shape(grads[i]))
      throw ShapeError("adam_step: param " + params[i].name + " " +
                       params[i].tensor->shape_str() + " vs grad " +
                       grads[i].shape_str());
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient for " +
                         params[i].name);
  }

  ++st.t;
  const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (size_t k = 0, n = p.numel(); k < n; ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<real>(mk);
      v[k] = static_cast<real>(vk);
      const double update =
          st.cfg.lr * (mk / bc1) / (std::sqrt(vk / bc2) + st.cfg.eps);
      p[k] = static_cast<real>(static_cast<double>(p[k]) - update);
    }
  }
}

void TrainConfig::validate() const {
  model.validate();
  adam.validate();
  data_config().validate();
  if (model.pool == PoolMode::kConcatProject &&
      model.seq_len_fixed != seq_len)
    throw ConfigError("TrainConfig: concat-project seq_len_fixed " +
                      std::to_string(model.seq_len_fixed) + " vs seq_len " +
                      std::to_string(seq_len));
}

Var mlm_loss(Tape& t, Var logits, const MaskedBatch& batch) {
  const Tensor& lv = t.value(logits);
  if (lv.rank() != 2 || lv.rows() != batch.targets.size())
    throw ShapeError("mlm_loss: logits " + lv.shape_str() + " vs " +
                     std::to_string(batch.targets.size()) + " positions");
  return cross_entropy_rows(t, logits, batch.targets, batch.ignore_mask());
}

real mlm_loss(const Tensor& logits, const MaskedBatch& batch) {
  if (logits.rank() != 2 || logits.rows() != batch.targets.size())
    throw ShapeError("mlm_loss: logits " + logits.shape_str() + " vs " +
                     std::to_string(batch.targets.size()) + " positions");
  return ops::cross_entropy_rows(logits, batch.targets, batch.ignore_mask())
      .loss;
}

MetricsLog::MetricsLog(const std::string& csv_path) : path_(csv_path) {
  bool need_header = true;
  if (std::filesystem::exists(path_) &&
      std::filesystem::file_size(path_) > 0)
    need_header = false;
  if (need_header) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("MetricsLog: cannot open " + path_);
    out << kHeader << '\n';
  }
}

std::string MetricsLog::format_row(const MetricsRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.3f",
                static_cast<unsigned long long>(row.step), row.split.c_str(),
                row.loss, row.wall_ms);
  return buf;
}

void MetricsLog::add(const MetricsRow& row) {
  rows_.push_back(row);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("MetricsLog: cannot open " + path_);
    out << format_row(row) << '\n';
  }
}

EvalResult evaluate(const Model& model, std::span<const MaskedBatch> batches) {
  double total_ce = 0;
  size_t total_masked = 0, correct = 0;
  for (const MaskedBatch& batch : batches) {
    if (batch.masked_count() == 0) continue;
    Tensor logits = model.forward(batch.inputs, batch.batch);
    ops::CeResult ce =
        ops::cross_entropy_rows(logits, batch.targets, batch.ignore_mask());
    total_ce += static_cast<double>(ce.loss) * static_cast<double>(ce.counted);
    total_masked += ce.counted;
    const size_t v = logits.cols();
    for (size_t r = 0; r < logits.rows(); ++r) {
      if (batch.targets[r] == MaskedBatch::kIgnore) continue;
      const real* row = logits.row_ptr(r);
      size_t best = 0;
      for (size_t j = 1; j < v; ++j)
        if (row[j] > row[best]) best = j;
      if (static_cast<int32_t>(best) == batch.targets[r]) ++correct;
    }
  }
  EvalResult res;
  res.masked = total_masked;
  if (total_masked) {
    res.loss = total_ce / static_cast<double>(total_masked);
    res.accuracy =
        static_cast<double>(correct) / static_cast<double>(total_masked);
  }
  return res;
}

TrainSession TrainSession::fresh(const TrainConfig& cfg) {
  cfg.validate();
  Model model = Model::make(cfg.model, cfg.seed);
  AdamState adam = AdamState::make(model.parameters(), cfg.adam);
  return TrainSession{cfg, std::move(model), std::move(adam), 0};
}

void train_steps(TrainSession& s, BatchStream& stream, uint64_t until_step,
                 std::span<const MaskedBatch> eval_batches, MetricsLog* log) {
  using clock = std::chrono::steady_clock;
  if (until_step < s.step)
    throw ContractError("train_steps: target step " +
                        std::to_string(until_step) + " behind session at " +
                        std::to_string(s.step));
  stream.seek(s.step);
  std::vector<NamedParam> params = s.model.parameters();

  while (s.step < until_step) {
    auto t0 = clock::now();
    MaskedBatch batch = stream.next();

    Tape tape;
    Binder binder(tape);
    Rng drop_rng(derive_seed(s.cfg.seed, seed_stream::kDropout, s.step));
    Var logits =
        s.model.forward(binder, batch.inputs, batch.batch, &drop_rng, true);
    Var loss = mlm_loss(tape, logits, batch);
    Gradients grads = tape.backward(loss);

    std::vector<Tensor> g;
    g.reserve(params.size());
    for (const NamedParam& p : params) {
      auto leaf = binder.lookup(p.tensor);
      if (leaf && grads.has(*leaf))
        g.push_back(grads.at(*leaf));
      else
        g.emplace_back(p.tensor->shape());
    }
    adam_step(params, g, s.adam);
    ++s.step;

    if (log) {
      double wall = std::chrono::duration<double, std::milli>(clock::now() - t0)
                        .count();
      log->add(MetricsRow{s.step, "train",
                          static_cast<double>(tape.value(loss)[0]), wall});
    }

    const bool cadence =
        s.cfg.eval_every > 0 && (s.step % s.cfg.eval_every == 0 ||
                                 s.step == until_step);
    if (cadence && !eval_batches.empty() && log) {
      auto e0 = clock::now();
      EvalResult ev = evaluate(s.model, eval_batches);
      double wall =
          std::chrono::duration<double, std::milli>(clock::now() - e0).count();
      log->add(MetricsRow{s.step, "eval", ev.loss, wall});
    }
  }
}

}  // namespace pc
