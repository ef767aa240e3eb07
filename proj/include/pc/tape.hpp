#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pc/ops.hpp"
#include "pc/tensor.hpp"

namespace pc {

using NodeId = uint32_t;

// Handle into one Tape. Vars from different tapes must not be mixed; ids are
// only bounds-checked, so keep each Tape and its Vars together.
struct Var {
  NodeId id = UINT32_MAX;
};

class Tape;

// Per-node gradient accumulator produced by Tape::backward.
class Gradients {
 public:
  explicit Gradients(size_t nodes) : g_(nodes), present_(nodes, 0) {}
  bool has(Var v) const {
    return v.id < present_.size() && present_[v.id] != 0;
  }
  const Tensor& at(Var v) const;
  void accumulate(NodeId id, Tensor&& t);

 private:
  std::vector<Tensor> g_;
  std::vector<uint8_t> present_;
};

// Append-only record of a forward computation. Each recorded op validates
// shapes on entry and checks its result for NaN/Inf; backward() replays the
// record once in reverse. A tape is confined to a single thread.
class Tape {
 public:
  using PullFn =
      std::function<void(const Tape&, NodeId self, const Tensor& gout,
                         Gradients& grads)>;

  Var leaf(Tensor value);      // differentiable input
  Var constant(Tensor value);  // tracked value, no gradient flows in

  const Tensor& value(Var v) const;
  size_t size() const { return nodes_.size(); }

  // Single reverse sweep from a scalar loss node. Gradients of nodes the
  // loss does not depend on are simply absent from the result.
  Gradients backward(Var loss) const;

  Var emplace(const char* op, Tensor value, std::vector<NodeId> inputs,
              PullFn pull);

 private:
  struct Node {
    const char* op;
    Tensor value;
    std::vector<NodeId> inputs;
    PullFn pull;
  };
  std::vector<Node> nodes_;

  const Node& node(NodeId id) const;
};

// Binds parameter tensors to tape leaves, one leaf per distinct tensor no
// matter how many times it is used in the forward pass.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}
  Var var(const Tensor& param);
  std::optional<Var> lookup(const Tensor* param) const;
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  std::unordered_map<const Tensor*, Var> bound_;
};

// Recorded ops. Forward semantics match the kernels in pc::ops.
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, real c);
Var matmul(Tape& t, Var a, Var b);
Var matmul_nt(Tape& t, Var a, Var b);
Var gelu(Tape& t, Var x);
Var softmax_rows(Tape& t, Var x);
Var dropout(Tape& t, Var x, double rate, Rng* rng, bool training);
Var gather_rows(Tape& t, Var table, std::vector<int32_t> idx);
Var sum_row_groups(Tape& t, Var x, size_t group);
Var concat_cols(Tape& t, std::span<const Var> xs);
Var concat_rows(Tape& t, std::span<const Var> xs);
Var slice_rows(Tape& t, Var x, size_t r0, size_t r1);
Var reshape(Tape& t, Var x, Shape shape);
Var layernorm_rows(Tape& t, Var x, Var gamma, Var beta);
Var cross_entropy_rows(Tape& t, Var logits, std::vector<int32_t> targets,
                       std::vector<uint8_t> ignore);

}  // namespace pc
