#include "pc/pairconnect.hpp"

#include <array>
#include <cstring>
#include <string>

namespace pc {

namespace {

std::vector<int32_t> all_pair_slots(std::span<const int32_t> tokens,
                                    const PairHasher& h) {
  const size_t m = tokens.size();
  std::vector<int32_t> idx;
  idx.reserve(m * m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      idx.push_back(static_cast<int32_t>(pair_index(tokens[i], tokens[j], h)));
  return idx;
}

// Ordered pairs with j != i (positionwise); row i keeps its m-1 partners in
// position order, which is exactly the concatenation layout after a reshape.
std::vector<int32_t> cross_pair_slots(std::span<const int32_t> tokens,
                                      const PairHasher& h) {
  const size_t m = tokens.size();
  std::vector<int32_t> idx;
  idx.reserve(m * (m - 1));
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      idx.push_back(static_cast<int32_t>(pair_index(tokens[i], tokens[j], h)));
    }
  return idx;
}

void check_concat_m(size_t m, size_t fixed_m) {
  if (m != fixed_m)
    throw ShapeError("head_forward: concat-project head is built for m = " +
                     std::to_string(fixed_m) + ", got " + std::to_string(m));
}

}  // namespace

PairConnectModel PairConnectModel::make(const ModelConfig& cfg,
                                        uint64_t init_seed) {
  if (cfg.kind != ModelKind::kPairConnect)
    throw ConfigError("PairConnectModel: config kind is " +
                      std::string(to_string(cfg.kind)));
  cfg.validate();
  if (cfg.table_size > UINT32_MAX)
    throw ConfigError("PairConnectModel: table_size does not fit 32 bits");

  PairConnectModel m;
  m.cfg = cfg;
  Rng rng(derive_seed(init_seed, seed_stream::kParamInit));
  const size_t d = cfg.dim;

  m.word_emb = uniform_scaled({cfg.vocab_total, d}, d, rng);
  m.out_proj = uniform_scaled({d, cfg.vocab_total}, d, rng);

  const size_t head_in = cfg.pool == PoolMode::kConcatProject
                             ? (cfg.seq_len_fixed - 1) * d
                             : d;
  m.layers.resize(cfg.layers);
  for (size_t li = 0; li < cfg.layers; ++li) {
    PairConnectLayerParams& layer = m.layers[li];
    layer.heads.resize(cfg.heads);
    for (size_t h = 0; h < cfg.heads; ++h) {
      PairHead& head = layer.heads[h];
      head.pairs.table = uniform_scaled({cfg.table_size, d}, d, rng);
      head.pairs.hasher =
          PairHasher{table_hash_seed(cfg.hash_seed, li, h),
                     static_cast<uint32_t>(cfg.table_size)};
      head.mlp = Mlp2::make(head_in, cfg.hidden, d, cfg.dropout, rng);
    }
    layer.unigram = Mlp2::make(d, cfg.hidden, d, cfg.dropout, rng);
    layer.pair_proj = Mlp2::make(cfg.heads * d, cfg.hidden, d, cfg.dropout, rng);
    layer.combiner = Mlp2::make(2 * d, cfg.hidden, d, cfg.dropout, rng);
  }
  return m;
}

std::vector<NamedParam> PairConnectModel::parameters() {
  std::vector<NamedParam> out;
  out.push_back({"word_emb", &word_emb});
  out.push_back({"out_proj", &out_proj});
  for (size_t li = 0; li < layers.size(); ++li) {
    const std::string p = "layer" + std::to_string(li) + ".";
    PairConnectLayerParams& layer = layers[li];
    for (size_t h = 0; h < layer.heads.size(); ++h) {
      const std::string hp = p + "head" + std::to_string(h) + ".";
      out.push_back({hp + "table", &layer.heads[h].pairs.table});
      out.push_back({hp + "mlp.w0", &layer.heads[h].mlp.w0});
      out.push_back({hp + "mlp.w1", &layer.heads[h].mlp.w1});
    }
    out.push_back({p + "unigram.w0", &layer.unigram.w0});
    out.push_back({p + "unigram.w1", &layer.unigram.w1});
    out.push_back({p + "pair_proj.w0", &layer.pair_proj.w0});
    out.push_back({p + "pair_proj.w1", &layer.pair_proj.w1});
    out.push_back({p + "combiner.w0", &layer.combiner.w0});
    out.push_back({p + "combiner.w1", &layer.combiner.w1});
  }
  return out;
}

Var pair_lookup(Binder& b, std::span<const int32_t> tokens,
                const PairTable& pt) {
  const size_t m = tokens.size();
  const size_t d = pt.table.cols();
  Var w = gather_rows(b.tape(), b.var(pt.table), all_pair_slots(tokens, pt.hasher));
  return reshape(b.tape(), w, {m, m, d});
}

Tensor pair_lookup(std::span<const int32_t> tokens, const PairTable& pt) {
  const size_t m = tokens.size();
  const size_t d = pt.table.cols();
  return ops::gather_rows(pt.table, all_pair_slots(tokens, pt.hasher))
      .reshaped({m, m, d});
}

Var head_forward(Binder& b, std::span<const int32_t> tokens,
                 const PairHead& head, PoolMode mode, size_t fixed_m,
                 Rng* rng, bool training) {
  Tape& t = b.tape();
  const size_t m = tokens.size();
  if (m == 0) throw ContractError("head_forward: empty token sequence");
  switch (mode) {
    case PoolMode::kPerPairMlp: {
      Var w = gather_rows(t, b.var(head.pairs.table),
                          all_pair_slots(tokens, head.pairs.hasher));
      Var v = head.mlp.forward(b, w, rng, training);  // [m*m x d]
      return sum_row_groups(t, v, m);
    }
    case PoolMode::kPoolThenMlp: {
      Var w = gather_rows(t, b.var(head.pairs.table),
                          all_pair_slots(tokens, head.pairs.hasher));
      Var pooled = sum_row_groups(t, w, m);
      return head.mlp.forward(b, pooled, rng, training);
    }
    case PoolMode::kConcatProject: {
      check_concat_m(m, fixed_m);
      const size_t d = head.pairs.table.cols();
      Var w = gather_rows(t, b.var(head.pairs.table),
                          cross_pair_slots(tokens, head.pairs.hasher));
      Var rows = reshape(t, w, {m, (m - 1) * d});
      return head.mlp.forward(b, rows, rng, training);
    }
  }
  throw ContractError("head_forward: bad pooling mode");
}

Tensor head_forward(std::span<const int32_t> tokens, const PairHead& head,
                    PoolMode mode, size_t fixed_m) {
  const size_t m = tokens.size();
  if (m == 0) throw ContractError("head_forward: empty token sequence");
  switch (mode) {
    case PoolMode::kPerPairMlp: {
      Tensor w = ops::gather_rows(head.pairs.table,
                                  all_pair_slots(tokens, head.pairs.hasher));
      return ops::sum_row_groups(head.mlp.forward(w), m);
    }
    case PoolMode::kPoolThenMlp: {
      Tensor w = ops::gather_rows(head.pairs.table,
                                  all_pair_slots(tokens, head.pairs.hasher));
      Tensor pooled = ops::sum_row_groups(w, m);
      return head.mlp.forward(pooled);
    }
    case PoolMode::kConcatProject: {
      check_concat_m(m, fixed_m);
      const size_t d = head.pairs.table.cols();
      Tensor w = ops::gather_rows(head.pairs.table,
                                  cross_pair_slots(tokens, head.pairs.hasher));
      return head.mlp.forward(std::move(w).reshaped({m, (m - 1) * d}));
    }
  }
  throw ContractError("head_forward: bad pooling mode");
}

Var multihead_forward(Binder& b, std::span<const int32_t> tokens,
                      const PairConnectLayerParams& layer, PoolMode mode,
                      size_t fixed_m, Rng* rng, bool training) {
  std::vector<Var> heads;
  heads.reserve(layer.heads.size());
  for (const PairHead& h : layer.heads)
    heads.push_back(head_forward(b, tokens, h, mode, fixed_m, rng, training));
  Var cat = concat_cols(b.tape(), heads);
  return layer.pair_proj.forward(b, cat, rng, training);
}

Tensor multihead_forward(std::span<const int32_t> tokens,
                         const PairConnectLayerParams& layer, PoolMode mode,
                         size_t fixed_m) {
  std::vector<Tensor> heads;
  heads.reserve(layer.heads.size());
  for (const PairHead& h : layer.heads)
    heads.push_back(head_forward(tokens, h, mode, fixed_m));
  std::vector<const Tensor*> ptrs;
  for (const Tensor& h : heads) ptrs.push_back(&h);
  return layer.pair_proj.forward(ops::concat_cols(ptrs));
}

Var layer_forward(Binder& b, std::span<const int32_t> tokens, Var hidden,
                  const PairConnectLayerParams& layer, PoolMode mode,
                  size_t fixed_m, Rng* rng, bool training) {
  Var unigram = layer.unigram.forward(b, hidden, rng, training);
  Var pair = multihead_forward(b, tokens, layer, mode, fixed_m, rng, training);
  std::array<Var, 2> both{unigram, pair};
  Var cat = concat_cols(b.tape(), both);
  return layer.combiner.forward(b, cat, rng, training);
}

Tensor layer_forward(std::span<const int32_t> tokens, const Tensor& hidden,
                     const PairConnectLayerParams& layer, PoolMode mode,
                     size_t fixed_m) {
  Tensor unigram = layer.unigram.forward(hidden);
  Tensor pair = multihead_forward(tokens, layer, mode, fixed_m);
  Tensor cat = ops::concat_cols({&unigram, &pair});
  return layer.combiner.forward(cat);
}

namespace {

size_t check_ids(std::span<const int32_t> ids, size_t batch) {
  if (batch == 0) throw ContractError("model_forward: empty batch");
  if (ids.empty() || ids.size() % batch != 0)
    throw ShapeError("model_forward: " + std::to_string(ids.size()) +
                     " ids do not form " + std::to_string(batch) + " rows");
  return ids.size() / batch;
}

}  // namespace

Var model_forward(Binder& b, const PairConnectModel& model,
                  std::span<const int32_t> ids, size_t batch, Rng* rng,
                  bool training) {
  const size_t m = check_ids(ids, batch);
  std::vector<Var> logits;
  logits.reserve(batch);
  for (size_t s = 0; s < batch; ++s) {
    std::span<const int32_t> tokens = ids.subspan(s * m, m);
    Var x = embed_sequence(b, model.word_emb, tokens);
    for (const PairConnectLayerParams& layer : model.layers)
      x = layer_forward(b, tokens, x, layer, model.cfg.pool,
                        model.cfg.seq_len_fixed, rng, training);
    logits.push_back(matmul(b.tape(), x, b.var(model.out_proj)));
  }
  if (batch == 1) return logits[0];
  return concat_rows(b.tape(), logits);
}

Tensor model_forward(const PairConnectModel& model,
                     std::span<const int32_t> ids, size_t batch) {
  const size_t m = check_ids(ids, batch);
  Tensor out({batch * m, model.cfg.vocab_total});
  for (size_t s = 0; s < batch; ++s) {
    std::span<const int32_t> tokens = ids.subspan(s * m, m);
    Tensor x = embed_sequence(model.word_emb, tokens);
    for (const PairConnectLayerParams& layer : model.layers)
      x = layer_forward(tokens, x, layer, model.cfg.pool,
                        model.cfg.seq_len_fixed);
    Tensor lg = ops::matmul(x, model.out_proj);
    std::memcpy(out.row_ptr(s * m), lg.data(), lg.numel() * sizeof(real));
  }
  return out;
}

}  // namespace pc
