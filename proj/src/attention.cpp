#include "pc/attention.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace pc {

TransformerModel TransformerModel::make(const ModelConfig& cfg,
                                        uint64_t init_seed) {
  if (cfg.kind != ModelKind::kTransformer)
    throw ConfigError("TransformerModel: config kind is " +
                      std::string(to_string(cfg.kind)));
  cfg.validate();

  TransformerModel m;
  m.cfg = cfg;
  Rng rng(derive_seed(init_seed, seed_stream::kParamInit));
  const size_t d = cfg.dim;
  const size_t dh = d / cfg.heads;

  m.word_emb = uniform_scaled({cfg.vocab_total, d}, d, rng);
  m.out_proj = uniform_scaled({d, cfg.vocab_total}, d, rng);

  m.layers.resize(cfg.layers);
  for (EncoderLayerParams& layer : m.layers) {
    layer.heads.resize(cfg.heads);
    for (AttentionHeadParams& h : layer.heads) {
      h.wq = uniform_scaled({d, dh}, d, rng);
      h.wk = uniform_scaled({d, dh}, d, rng);
      h.wv = uniform_scaled({d, dh}, d, rng);
    }
    layer.w_out = uniform_scaled({d, d}, d, rng);
    layer.ff = Mlp2::make(d, cfg.hidden, d, cfg.dropout, rng);
    layer.ln1 = LayerNormParams::make(d);
    layer.ln2 = LayerNormParams::make(d);
  }
  return m;
}

std::vector<NamedParam> TransformerModel::parameters() {
  std::vector<NamedParam> out;
  out.push_back({"word_emb", &word_emb});
  out.push_back({"out_proj", &out_proj});
  for (size_t li = 0; li < layers.size(); ++li) {
    const std::string p = "layer" + std::to_string(li) + ".";
    EncoderLayerParams& layer = layers[li];
    for (size_t h = 0; h < layer.heads.size(); ++h) {
      const std::string hp = p + "head" + std::to_string(h) + ".";
      out.push_back({hp + "wq", &layer.heads[h].wq});
      out.push_back({hp + "wk", &layer.heads[h].wk});
      out.push_back({hp + "wv", &layer.heads[h].wv});
    }
    out.push_back({p + "w_out", &layer.w_out});
    out.push_back({p + "ff.w0", &layer.ff.w0});
    out.push_back({p + "ff.w1", &layer.ff.w1});
    out.push_back({p + "ln1.gamma", &layer.ln1.gamma});
    out.push_back({p + "ln1.beta", &layer.ln1.beta});
    out.push_back({p + "ln2.gamma", &layer.ln2.gamma});
    out.push_back({p + "ln2.beta", &layer.ln2.beta});
  }
  return out;
}

Var attention_head_forward(Binder& b, Var x, const AttentionHeadParams& head) {
  Tape& t = b.tape();
  Var q = matmul(t, x, b.var(head.wq));
  Var k = matmul(t, x, b.var(head.wk));
  Var v = matmul(t, x, b.var(head.wv));
  const real inv_sqrt_dh =
      static_cast<real>(1.0 / std::sqrt(static_cast<double>(head.wq.cols())));
  Var scores = scale(t, matmul_nt(t, q, k), inv_sqrt_dh);
  Var a = softmax_rows(t, scores);
  return matmul(t, a, v);
}

Tensor attention_head_forward(const Tensor& x, const AttentionHeadParams& head) {
  Tensor q = ops::matmul(x, head.wq);
  Tensor k = ops::matmul(x, head.wk);
  Tensor v = ops::matmul(x, head.wv);
  const real inv_sqrt_dh =
      static_cast<real>(1.0 / std::sqrt(static_cast<double>(head.wq.cols())));
  Tensor a = ops::softmax_rows(ops::scale(ops::matmul_nt(q, k), inv_sqrt_dh));
  return ops::matmul(a, v);
}

Var mha_forward(Binder& b, Var x, const EncoderLayerParams& layer) {
  std::vector<Var> heads;
  heads.reserve(layer.heads.size());
  for (const AttentionHeadParams& h : layer.heads)
    heads.push_back(attention_head_forward(b, x, h));
  Var cat = concat_cols(b.tape(), heads);
  return matmul(b.tape(), cat, b.var(layer.w_out));
}

Tensor mha_forward(const Tensor& x, const EncoderLayerParams& layer) {
  std::vector<Tensor> heads;
  heads.reserve(layer.heads.size());
  for (const AttentionHeadParams& h : layer.heads)
    heads.push_back(attention_head_forward(x, h));
  std::vector<const Tensor*> ptrs;
  for (const Tensor& h : heads) ptrs.push_back(&h);
  return ops::matmul(ops::concat_cols(ptrs), layer.w_out);
}

Var encoder_layer_forward(Binder& b, Var x, const EncoderLayerParams& layer,
                          Rng* rng, bool training) {
  Tape& t = b.tape();
  Var att = dropout(t, mha_forward(b, x, layer), layer.ff.dropout_rate, rng,
                    training);
  Var y = layernorm_rows(t, add(t, x, att), b.var(layer.ln1.gamma),
                         b.var(layer.ln1.beta));
  Var ff = layer.ff.forward(b, y, rng, training);
  return layernorm_rows(t, add(t, y, ff), b.var(layer.ln2.gamma),
                        b.var(layer.ln2.beta));
}

Tensor encoder_layer_forward(const Tensor& x, const EncoderLayerParams& layer) {
  Tensor y = ops::layernorm_rows(ops::add(x, mha_forward(x, layer)),
                                 layer.ln1.gamma, layer.ln1.beta);
  return ops::layernorm_rows(ops::add(y, layer.ff.forward(y)),
                             layer.ln2.gamma, layer.ln2.beta);
}

namespace {

size_t check_ids(std::span<const int32_t> ids, size_t batch) {
  if (batch == 0) throw ContractError("transformer_forward: empty batch");
  if (ids.empty() || ids.size() % batch != 0)
    throw ShapeError("transformer_forward: " + std::to_string(ids.size()) +
                     " ids do not form " + std::to_string(batch) + " rows");
  return ids.size() / batch;
}

}  // namespace

Var transformer_forward(Binder& b, const TransformerModel& model,
                        std::span<const int32_t> ids, size_t batch, Rng* rng,
                        bool training) {
  const size_t m = check_ids(ids, batch);
  std::vector<Var> logits;
  logits.reserve(batch);
  for (size_t s = 0; s < batch; ++s) {
    std::span<const int32_t> tokens = ids.subspan(s * m, m);
    Var x = embed_sequence(b, model.word_emb, tokens);
    for (const EncoderLayerParams& layer : model.layers)
      x = encoder_layer_forward(b, x, layer, rng, training);
    logits.push_back(matmul(b.tape(), x, b.var(model.out_proj)));
  }
  if (batch == 1) return logits[0];
  return concat_rows(b.tape(), logits);
}

Tensor transformer_forward(const TransformerModel& model,
                           std::span<const int32_t> ids, size_t batch) {
  const size_t m = check_ids(ids, batch);
  Tensor out({batch * m, model.cfg.vocab_total});
  for (size_t s = 0; s < batch; ++s) {
    std::span<const int32_t> tokens = ids.subspan(s * m, m);
    Tensor x = embed_sequence(model.word_emb, tokens);
    for (const EncoderLayerParams& layer : model.layers)
      x = encoder_layer_forward(x, layer);
    Tensor lg = ops::matmul(x, model.out_proj);
    std::memcpy(out.row_ptr(s * m), lg.data(), lg.numel() * sizeof(real));
  }
  return out;
}

}  // namespace pc
