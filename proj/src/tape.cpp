#include "pc/tape.hpp"

#include <cstring>
#include <string>
#include <utility>

namespace pc {

const Tensor& Gradients::at(Var v) const {
  if (!has(v))
    throw ContractError("Gradients::at: no gradient recorded for node " +
                        std::to_string(v.id));
  return g_[v.id];
}

void Gradients::accumulate(NodeId id, Tensor&& t) {
  if (id >= g_.size())
    throw ContractError("Gradients::accumulate: node " + std::to_string(id) +
                        " out of range");
  if (!present_[id]) {
    g_[id] = std::move(t);
    present_[id] = 1;
  } else {
    ops::add_inplace(g_[id], t);
  }
}

Var Tape::emplace(const char* op, Tensor value, std::vector<NodeId> inputs,
                  PullFn pull) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + ": non-finite result");
  for (NodeId in : inputs) node(in);  // bounds check
  nodes_.push_back(
      Node{op, std::move(value), std::move(inputs), std::move(pull)});
  return Var{static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value) {
  return emplace("leaf", std::move(value), {}, nullptr);
}

Var Tape::constant(Tensor value) {
  return emplace("constant", std::move(value), {}, nullptr);
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size())
    throw ContractError("Tape: node id " + std::to_string(id) +
                        " out of range (tape has " +
                        std::to_string(nodes_.size()) + " nodes)");
  return nodes_[id];
}

const Tensor& Tape::value(Var v) const { return node(v.id).value; }

Gradients Tape::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.numel() != 1)
    throw ContractError("Tape::backward: loss must be scalar, have " +
                        lv.shape_str());
  Gradients grads(nodes_.size());
  grads.accumulate(loss.id, Tensor::full(lv.shape(), 1));
  for (NodeId id = loss.id + 1; id-- > 0;) {
    if (!grads.has(Var{id})) continue;
    const Node& n = nodes_[id];
    if (n.pull) n.pull(*this, id, grads.at(Var{id}), grads);
  }
  return grads;
}

Var Binder::var(const Tensor& param) {
  auto it = bound_.find(&param);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(param);
  bound_.emplace(&param, v);
  return v;
}

std::optional<Var> Binder::lookup(const Tensor* param) const {
  auto it = bound_.find(param);
  if (it == bound_.end()) return std::nullopt;
  return it->second;
}

Var add(Tape& t, Var a, Var b) {
  Tensor v = ops::add(t.value(a), t.value(b));
  NodeId ai = a.id, bi = b.id;
  return t.emplace("add", std::move(v), {ai, bi},
                   [ai, bi](const Tape&, NodeId, const Tensor& gout,
                            Gradients& g) {
                     g.accumulate(ai, Tensor(gout));
                     g.accumulate(bi, Tensor(gout));
                   });
}

Var scale(Tape& t, Var a, real c) {
  Tensor v = ops::scale(t.value(a), c);
  NodeId ai = a.id;
  return t.emplace("scale", std::move(v), {ai},
                   [ai, c](const Tape&, NodeId, const Tensor& gout,
                           Gradients& g) {
                     g.accumulate(ai, ops::scale(gout, c));
                   });
}

Var matmul(Tape& t, Var a, Var b) {
  Tensor v = ops::matmul(t.value(a), t.value(b));
  NodeId ai = a.id, bi = b.id;
  return t.emplace("matmul", std::move(v), {ai, bi},
                   [ai, bi](const Tape& tp, NodeId, const Tensor& gout,
                            Gradients& g) {
                     g.accumulate(ai, ops::matmul_nt(gout, tp.value(Var{bi})));
                     g.accumulate(bi, ops::matmul_tn(tp.value(Var{ai}), gout));
                   });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Tensor v = ops::matmul_nt(t.value(a), t.value(b));
  NodeId ai = a.id, bi = b.id;
  return t.emplace("matmul_nt", std::move(v), {ai, bi},
                   [ai, bi](const Tape& tp, NodeId, const Tensor& gout,
                            Gradients& g) {
                     g.accumulate(ai, ops::matmul(gout, tp.value(Var{bi})));
                     g.accumulate(bi, ops::matmul_tn(gout, tp.value(Var{ai})));
                   });
}

Var gelu(Tape& t, Var x) {
  Tensor v = ops::gelu(t.value(x));
  NodeId xi = x.id;
  return t.emplace("gelu", std::move(v), {xi},
                   [xi](const Tape& tp, NodeId, const Tensor& gout,
                        Gradients& g) {
                     g.accumulate(xi,
                                  ops::gelu_grad_mul(tp.value(Var{xi}), gout));
                   });
}

Var softmax_rows(Tape& t, Var x) {
  Tensor v = ops::softmax_rows(t.value(x));
  NodeId xi = x.id;
  return t.emplace("softmax_rows", std::move(v), {xi},
                   [xi](const Tape& tp, NodeId self, const Tensor& gout,
                        Gradients& g) {
                     g.accumulate(xi, ops::softmax_rows_grad(
                                          tp.value(Var{self}), gout));
                   });
}

Var dropout(Tape& t, Var x, double rate, Rng* rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate " + std::to_string(rate) +
                      " outside [0, 1)");
  NodeId xi = x.id;
  if (!training || rate == 0.0) {
    Tensor v = t.value(x);
    return t.emplace("dropout", std::move(v), {xi},
                     [xi](const Tape&, NodeId, const Tensor& gout,
                          Gradients& g) { g.accumulate(xi, Tensor(gout)); });
  }
  if (rng == nullptr)
    throw ContractError("dropout: training with rate > 0 needs an rng");
  std::vector<uint8_t> mask;
  Tensor v = ops::dropout(t.value(x), rate, *rng, true, &mask);
  return t.emplace(
      "dropout", std::move(v), {xi},
      [xi, rate, mask = std::move(mask)](const Tape&, NodeId,
                                         const Tensor& gout, Gradients& g) {
        g.accumulate(xi, ops::apply_dropout_mask(gout, mask, rate));
      });
}

Var gather_rows(Tape& t, Var table, std::vector<int32_t> idx) {
  Tensor v = ops::gather_rows(t.value(table), idx);
  NodeId ti = table.id;
  return t.emplace(
      "gather_rows", std::move(v), {ti},
      [ti, idx = std::move(idx)](const Tape& tp, NodeId, const Tensor& gout,
                                 Gradients& g) {
        Tensor gt(tp.value(Var{ti}).shape());
        ops::scatter_add_rows(gt, idx, gout);
        g.accumulate(ti, std::move(gt));
      });
}

Var sum_row_groups(Tape& t, Var x, size_t group) {
  Tensor v = ops::sum_row_groups(t.value(x), group);
  NodeId xi = x.id;
  return t.emplace(
      "sum_row_groups", std::move(v), {xi},
      [xi, group](const Tape& tp, NodeId, const Tensor& gout, Gradients& g) {
        const Tensor& xv = tp.value(Var{xi});
        const size_t d = xv.cols();
        Tensor gx({xv.rows(), d});
        for (size_t r = 0; r < xv.rows(); ++r)
          std::memcpy(gx.row_ptr(r), gout.row_ptr(r / group),
                      d * sizeof(real));
        g.accumulate(xi, std::move(gx));
      });
}

Var concat_cols(Tape& t, std::span<const Var> xs) {
  std::vector<const Tensor*> vals;
  std::vector<NodeId> ids;
  std::vector<size_t> widths;
  for (Var x : xs) {
    vals.push_back(&t.value(x));
    ids.push_back(x.id);
    widths.push_back(vals.back()->cols());
  }
  Tensor v = ops::concat_cols(vals);
  std::vector<NodeId> inputs = ids;
  return t.emplace(
      "concat_cols", std::move(v), std::move(inputs),
      [ids, widths](const Tape&, NodeId, const Tensor& gout, Gradients& g) {
        size_t off = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
          Tensor part({gout.rows(), widths[k]});
          for (size_t r = 0; r < gout.rows(); ++r)
            std::memcpy(part.row_ptr(r), gout.row_ptr(r) + off,
                        widths[k] * sizeof(real));
          g.accumulate(ids[k], std::move(part));
          off += widths[k];
        }
      });
}

Var concat_rows(Tape& t, std::span<const Var> xs) {
  std::vector<const Tensor*> vals;
  std::vector<NodeId> ids;
  std::vector<size_t> heights;
  for (Var x : xs) {
    vals.push_back(&t.value(x));
    ids.push_back(x.id);
    heights.push_back(vals.back()->rows());
  }
  Tensor v = ops::concat_rows(vals);
  std::vector<NodeId> inputs = ids;
  return t.emplace(
      "concat_rows", std::move(v), std::move(inputs),
      [ids, heights](const Tape&, NodeId, const Tensor& gout, Gradients& g) {
        size_t off = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
          g.accumulate(ids[k], ops::slice_rows(gout, off, off + heights[k]));
          off += heights[k];
        }
      });
}

Var slice_rows(Tape& t, Var x, size_t r0, size_t r1) {
  Tensor v = ops::slice_rows(t.value(x), r0, r1);
  NodeId xi = x.id;
  return t.emplace(
      "slice_rows", std::move(v), {xi},
      [xi, r0](const Tape& tp, NodeId, const Tensor& gout, Gradients& g) {
        const Tensor& xv = tp.value(Var{xi});
        Tensor gx({xv.rows(), xv.cols()});
        if (gout.numel())
          std::memcpy(gx.row_ptr(r0), gout.data(),
                      gout.numel() * sizeof(real));
        g.accumulate(xi, std::move(gx));
      });
}

Var reshape(Tape& t, Var x, Shape shape) {
  Tensor v = t.value(x).reshaped(std::move(shape));
  NodeId xi = x.id;
  return t.emplace(
      "reshape", std::move(v), {xi},
      [xi](const Tape& tp, NodeId, const Tensor& gout, Gradients& g) {
        g.accumulate(xi, gout.reshaped(tp.value(Var{xi}).shape()));
      });
}

Var layernorm_rows(Tape& t, Var x, Var gamma, Var beta) {
  Tensor v = ops::layernorm_rows(t.value(x), t.value(gamma), t.value(beta));
  NodeId xi = x.id, gi = gamma.id, bi = beta.id;
  return t.emplace(
      "layernorm_rows", std::move(v), {xi, gi, bi},
      [xi, gi, bi](const Tape& tp, NodeId, const Tensor& gout, Gradients& g) {
        Tensor gx, ggamma, gbeta;
        ops::layernorm_rows_grad(tp.value(Var{xi}), tp.value(Var{gi}), gout,
                                 gx, ggamma, gbeta);
        g.accumulate(xi, std::move(gx));
        g.accumulate(gi, std::move(ggamma));
        g.accumulate(bi, std::move(gbeta));
      });
}

Var cross_entropy_rows(Tape& t, Var logits, std::vector<int32_t> targets,
                       std::vector<uint8_t> ignore) {
  ops::CeResult ce = ops::cross_entropy_rows(t.value(logits), targets, ignore);
  NodeId li = logits.id;
  const size_t counted = ce.counted;
  return t.emplace(
      "cross_entropy_rows", Tensor::scalar(ce.loss), {li},
      [li, counted, targets = std::move(targets), ignore = std::move(ignore)](
          const Tape& tp, NodeId, const Tensor& gout, Gradients& g) {
        g.accumulate(li, ops::cross_entropy_rows_grad(tp.value(Var{li}),
                                                      targets, ignore, counted,
                                                      gout[0]));
      });
}

}  // namespace pc
