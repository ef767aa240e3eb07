#pragma once

#include <span>
#include <vector>

#include "pc/nn.hpp"

namespace pc {

struct AttentionHeadParams {
  Tensor wq, wk, wv;  // [dim x dim/heads]
};

struct EncoderLayerParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_out;  // [dim x dim]
  Mlp2 ff;       // dim -> hidden -> dim
  LayerNormParams ln1, ln2;
};

// Post-norm Transformer encoder, the attention baseline the pair tables are
// matched against.
struct TransformerModel {
  ModelConfig cfg;
  Tensor word_emb;  // [vocab_total x dim]
  Tensor out_proj;  // [dim x vocab_total]
  std::vector<EncoderLayerParams> layers;

  static TransformerModel make(const ModelConfig& cfg, uint64_t init_seed);
  std::vector<NamedParam> parameters();
};

// softmax(Q K^T / sqrt(d_head)) V for one head, x is [m x dim].
Var attention_head_forward(Binder& b, Var x, const AttentionHeadParams& head);
Tensor attention_head_forward(const Tensor& x, const AttentionHeadParams& head);

// Heads concatenated and mixed by w_out.
Var mha_forward(Binder& b, Var x, const EncoderLayerParams& layer);
Tensor mha_forward(const Tensor& x, const EncoderLayerParams& layer);

// y = LN(x + dropout(mha(x))); z = LN(y + dropout(ff(y)))
Var encoder_layer_forward(Binder& b, Var x, const EncoderLayerParams& layer,
                          Rng* rng, bool training);
Tensor encoder_layer_forward(const Tensor& x, const EncoderLayerParams& layer);

// ids is row-major [batch x m]; returns [batch*m x vocab_total] logits.
Var transformer_forward(Binder& b, const TransformerModel& model,
                        std::span<const int32_t> ids, size_t batch, Rng* rng,
                        bool training);
Tensor transformer_forward(const TransformerModel& model,
                           std::span<const int32_t> ids, size_t batch);

}  // namespace pc
