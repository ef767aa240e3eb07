#pragma once

#include <span>
#include <vector>

#include "pc/hashing.hpp"
#include "pc/nn.hpp"

namespace pc {

struct PairTable {
  Tensor table;  // [table_size x d], one giant contiguous array per head
  PairHasher hasher;
};

struct PairHead {
  PairTable pairs;
  Mlp2 mlp;  // d -> hidden -> d, or (m-1)*d -> hidden -> d for concat-project
};

struct PairConnectLayerParams {
  std::vector<PairHead> heads;
  Mlp2 unigram;    // d -> hidden -> d
  Mlp2 pair_proj;  // heads*d -> hidden -> d
  Mlp2 combiner;   // 2d -> hidden -> d
};

// MLP-only token mixer: attention is replaced by hashed lookups into learned
// pair-embedding tables. Pair keys are always the original token ids, at
// every layer.
struct PairConnectModel {
  ModelConfig cfg;
  Tensor word_emb;  // [vocab_total x dim]
  Tensor out_proj;  // [dim x vocab_total]
  std::vector<PairConnectLayerParams> layers;

  static PairConnectModel make(const ModelConfig& cfg, uint64_t init_seed);
  std::vector<NamedParam> parameters();
};

// Hashed table rows for every ordered position pair (i, j), shape [m, m, d];
// row (i, j) holds the embedding of key (tokens[i], tokens[j]).
Var pair_lookup(Binder& b, std::span<const int32_t> tokens,
                const PairTable& pt);
Tensor pair_lookup(std::span<const int32_t> tokens, const PairTable& pt);

// One head's pair-path output [m x d] under the given pooling mode.
// fixed_m is only consulted by concat-project, whose input width is baked in.
Var head_forward(Binder& b, std::span<const int32_t> tokens,
                 const PairHead& head, PoolMode mode, size_t fixed_m,
                 Rng* rng, bool training);
Tensor head_forward(std::span<const int32_t> tokens, const PairHead& head,
                    PoolMode mode, size_t fixed_m);

// Concatenates all heads and projects back to d.
Var multihead_forward(Binder& b, std::span<const int32_t> tokens,
                      const PairConnectLayerParams& layer, PoolMode mode,
                      size_t fixed_m, Rng* rng, bool training);
Tensor multihead_forward(std::span<const int32_t> tokens,
                         const PairConnectLayerParams& layer, PoolMode mode,
                         size_t fixed_m);

// Unigram path and pair path, fused by the combiner MLP.
Var layer_forward(Binder& b, std::span<const int32_t> tokens, Var hidden,
                  const PairConnectLayerParams& layer, PoolMode mode,
                  size_t fixed_m, Rng* rng, bool training);
Tensor layer_forward(std::span<const int32_t> tokens, const Tensor& hidden,
                     const PairConnectLayerParams& layer, PoolMode mode,
                     size_t fixed_m);

// ids is a row-major [batch x m] id block; returns [batch*m x vocab_total]
// logits. The recorded overload is for training, the plain one for
// inference (dropout off, intermediates freed as they go dead).
Var model_forward(Binder& b, const PairConnectModel& model,
                  std::span<const int32_t> ids, size_t batch, Rng* rng,
                  bool training);
Tensor model_forward(const PairConnectModel& model,
                     std::span<const int32_t> ids, size_t batch);

}  // namespace pc
