#pragma once

#include <variant>

#include "pc/attention.hpp"
#include "pc/pairconnect.hpp"

namespace pc {

// Owns either model family behind one training/inference surface.
class Model {
 public:
  static Model make(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const;
  std::vector<NamedParam> parameters();

  Var forward(Binder& b, std::span<const int32_t> ids, size_t batch, Rng* rng,
              bool training) const;
  Tensor forward(std::span<const int32_t> ids, size_t batch) const;

  PairConnectModel* pairconnect();
  const PairConnectModel* pairconnect() const;
  TransformerModel* transformer();
  const TransformerModel* transformer() const;

  size_t parameter_count() const;
  size_t table_bytes() const;  // pair-table storage; zero for the baseline

 private:
  explicit Model(std::variant<PairConnectModel, TransformerModel> impl)
      : impl_(std::move(impl)) {}
  std::variant<PairConnectModel, TransformerModel> impl_;
};

}  // namespace pc
