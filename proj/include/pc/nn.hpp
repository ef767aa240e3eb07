#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pc/tape.hpp"

namespace pc {

enum class PoolMode { kPerPairMlp, kPoolThenMlp, kConcatProject };
enum class ModelKind { kPairConnect, kTransformer };

const char* to_string(PoolMode m);
const char* to_string(ModelKind k);
PoolMode pool_mode_from_string(const std::string& s);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kPairConnect;
  size_t layers = 6;
  size_t heads = 4;
  size_t dim = 256;
  size_t hidden = 256;
  size_t table_size = 1000;  // slots per pair table
  PoolMode pool = PoolMode::kPoolThenMlp;
  double dropout = 0.1;
  size_t vocab_total = 0;    // includes pad and mask ids
  size_t seq_len_fixed = 0;  // required by concat-project heads
  uint32_t hash_seed = 0;

  void validate() const;
};

// Two-layer position-wise MLP: dropout(dropout(gelu(x W0)) W1). No biases.
struct Mlp2 {
  Tensor w0;  // [d_in x d_hidden]
  Tensor w1;  // [d_hidden x d_out]
  double dropout_rate = 0.0;

  static Mlp2 make(size_t d_in, size_t d_hidden, size_t d_out,
                   double dropout_rate, Rng& rng);

  Tensor forward(const Tensor& x) const;  // inference: dropout is identity
  Var forward(Binder& b, Var x, Rng* rng, bool training) const;
};

struct LayerNormParams {
  Tensor gamma;  // init ones
  Tensor beta;   // init zeros
  static LayerNormParams make(size_t d);
};

// Token embedding plus sinusoidal positions for one sequence.
Tensor embed_sequence(const Tensor& word_emb, std::span<const int32_t> ids);
Var embed_sequence(Binder& b, const Tensor& word_emb,
                   std::span<const int32_t> ids);

}  // namespace pc
