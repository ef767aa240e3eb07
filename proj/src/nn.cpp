#include "pc/nn.hpp"

#include "pc/errors.hpp"

namespace pc {

const char* to_string(PoolMode m) {
  switch (m) {
    case PoolMode::kPerPairMlp: return "per-pair-mlp";
    case PoolMode::kPoolThenMlp: return "pool-then-mlp";
    case PoolMode::kConcatProject: return "concat-project";
  }
  return "?";
}

const char* to_string(ModelKind k) {
  return k == ModelKind::kPairConnect ? "pairconnect" : "transformer";
}

PoolMode pool_mode_from_string(const std::string& s) {
  if (s == "per-pair-mlp") return PoolMode::kPerPairMlp;
  if (s == "pool-then-mlp") return PoolMode::kPoolThenMlp;
  if (s == "concat-project") return PoolMode::kConcatProject;
  throw ConfigError("unknown pooling mode '" + s + "'");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "pairconnect") return ModelKind::kPairConnect;
  if (s == "transformer") return ModelKind::kTransformer;
  throw ConfigError("unknown model kind '" + s + "'");
}

void ModelConfig::validate() const {
  // layers == 0 is legal: the model degenerates to projected embeddings
  if (heads < 1) throw ConfigError("ModelConfig: heads must be positive");
  if (dim < 1) throw ConfigError("ModelConfig: dim must be positive");
  if (hidden < 1) throw ConfigError("ModelConfig: hidden must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("ModelConfig: dropout " + std::to_string(dropout) +
                      " outside [0, 1)");
  if (vocab_total < 3)
    throw ConfigError("ModelConfig: vocab_total " +
                      std::to_string(vocab_total) +
                      " too small (pad + mask + at least one word)");
  if (kind == ModelKind::kPairConnect) {
    if (table_size < 2)
      throw ConfigError("ModelConfig: table_size " +
                        std::to_string(table_size) + " below 2");
    if (pool == PoolMode::kConcatProject && seq_len_fixed < 2)
      throw ConfigError(
          "ModelConfig: concat-project needs seq_len_fixed of at least 2");
  } else {
    if (dim % heads != 0)
      throw ConfigError("ModelConfig: dim " + std::to_string(dim) +
                        " not divisible by " + std::to_string(heads) +
                        " heads");
  }
}

Mlp2 Mlp2::make(size_t d_in, size_t d_hidden, size_t d_out,
                double dropout_rate, Rng& rng) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("Mlp2: dropout rate outside [0, 1)");
  Mlp2 m;
  m.w0 = uniform_scaled({d_in, d_hidden}, d_in, rng);
  m.w1 = uniform_scaled({d_hidden, d_out}, d_hidden, rng);
  m.dropout_rate = dropout_rate;
  return m;
}

Tensor Mlp2::forward(const Tensor& x) const {
  return ops::matmul(ops::gelu(ops::matmul(x, w0)), w1);
}

Var Mlp2::forward(Binder& b, Var x, Rng* rng, bool training) const {
  Tape& t = b.tape();
  Var h = gelu(t, matmul(t, x, b.var(w0)));
  h = dropout(t, h, dropout_rate, rng, training);
  h = matmul(t, h, b.var(w1));
  return dropout(t, h, dropout_rate, rng, training);
}

LayerNormParams LayerNormParams::make(size_t d) {
  LayerNormParams p;
  p.gamma = Tensor::full({d}, real(1));
  p.beta = Tensor({d});
  return p;
}

Tensor embed_sequence(const Tensor& word_emb, std::span<const int32_t> ids) {
  Tensor x = ops::gather_rows(word_emb, ids);
  ops::add_inplace(x, ops::positional_encoding(ids.size(), word_emb.cols()));
  return x;
}

Var embed_sequence(Binder& b, const Tensor& word_emb,
                   std::span<const int32_t> ids) {
  Tape& t = b.tape();
  Var x = gather_rows(t, b.var(word_emb),
                      std::vector<int32_t>(ids.begin(), ids.end()));
  Var pe = t.constant(ops::positional_encoding(ids.size(), word_emb.cols()));
  return add(t, x, pe);
}

}  // namespace pc
