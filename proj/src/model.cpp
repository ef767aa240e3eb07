#include "pc/model.hpp"

namespace pc {

Model Model::make(const ModelConfig& cfg, uint64_t init_seed) {
  if (cfg.kind == ModelKind::kPairConnect)
    return Model(PairConnectModel::make(cfg, init_seed));
  return Model(TransformerModel::make(cfg, init_seed));
}

const ModelConfig& Model::config() const {
  return std::visit([](const auto& m) -> const ModelConfig& { return m.cfg; },
                    impl_);
}

std::vector<NamedParam> Model::parameters() {
  return std::visit([](auto& m) { return m.parameters(); }, impl_);
}

Var Model::forward(Binder& b, std::span<const int32_t> ids, size_t batch,
                   Rng* rng, bool training) const {
  if (const auto* pcm = std::get_if<PairConnectModel>(&impl_))
    return model_forward(b, *pcm, ids, batch, rng, training);
  return transformer_forward(b, std::get<TransformerModel>(impl_), ids, batch,
                             rng, training);
}

Tensor Model::forward(std::span<const int32_t> ids, size_t batch) const {
  if (const auto* pcm = std::get_if<PairConnectModel>(&impl_))
    return model_forward(*pcm, ids, batch);
  return transformer_forward(std::get<TransformerModel>(impl_), ids, batch);
}

PairConnectModel* Model::pairconnect() {
  return std::get_if<PairConnectModel>(&impl_);
}
const PairConnectModel* Model::pairconnect() const {
  return std::get_if<PairConnectModel>(&impl_);
}
TransformerModel* Model::transformer() {
  return std::get_if<TransformerModel>(&impl_);
}
const TransformerModel* Model::transformer() const {
  return std::get_if<TransformerModel>(&impl_);
}

size_t Model::parameter_count() const {
  size_t n = 0;
  for (const NamedParam& p : const_cast<Model*>(this)->parameters())
    n += p.tensor->numel();
  return n;
}

size_t Model::table_bytes() const {
  const PairConnectModel* m = pairconnect();
  if (!m) return 0;
  size_t n = 0;
  for (const PairConnectLayerParams& layer : m->layers)
    for (const PairHead& h : layer.heads) n += h.pairs.table.numel();
  return n * sizeof(real);
}

}  // namespace pc
