#include "pc/ops.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <string>

namespace pc::ops {

namespace {

void want_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": want rank 2, have " + t.shape_str());
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  want_rank2(a, "matmul");
  want_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape_str() + " vs " + b.shape_str());
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (size_t i = 0; i < m; ++i) {
    const real* arow = a.row_ptr(i);
    real* crow = c.row_ptr(i);
    for (size_t p = 0; p < k; ++p) {
      const real av = arow[p];
      const real* brow = b.row_ptr(p);
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  counters().flops += 2ull * m * k * n;
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  want_rank2(a, "matmul_nt");
  want_rank2(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + a.shape_str() + " vs " + b.shape_str() +
                     " transposed");
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c({m, n});
  for (size_t i = 0; i < m; ++i) {
    const real* arow = a.row_ptr(i);
    real* crow = c.row_ptr(i);
    for (size_t j = 0; j < n; ++j) {
      const real* brow = b.row_ptr(j);
      real s = 0;
      for (size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
  counters().flops += 2ull * m * k * n;
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  want_rank2(a, "matmul_tn");
  want_rank2(b, "matmul_tn");
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: " + a.shape_str() + " transposed vs " +
                     b.shape_str());
  const size_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (size_t p = 0; p < k; ++p) {
    const real* arow = a.row_ptr(p);
    const real* brow = b.row_ptr(p);
    for (size_t i = 0; i < m; ++i) {
      const real av = arow[i];
      real* crow = c.row_ptr(i);
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  counters().flops += 2ull * m * k * n;
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("add: " + a.shape_str() + " vs " + b.shape_str());
  Tensor c = a;
  const real* bp = b.data();
  real* cp = c.data();
  for (size_t i = 0, n = c.numel(); i < n; ++i) cp[i] += bp[i];
  counters().flops += c.numel();
  return c;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("add_inplace: " + a.shape_str() + " vs " + b.shape_str());
  real* ap = a.data();
  const real* bp = b.data();
  for (size_t i = 0, n = a.numel(); i < n; ++i) ap[i] += bp[i];
  counters().flops += a.numel();
}

Tensor scale(const Tensor& a, real c) {
  Tensor out = a;
  for (real& x : out.flat()) x *= c;
  counters().flops += out.numel();
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("mul: " + a.shape_str() + " vs " + b.shape_str());
  Tensor c = a;
  const real* bp = b.data();
  real* cp = c.data();
  for (size_t i = 0, n = c.numel(); i < n; ++i) cp[i] *= bp[i];
  counters().flops += c.numel();
  return c;
}

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (real& v : y.flat()) {
    double xv = static_cast<double>(v);
    v = static_cast<real>(0.5 * xv * (1.0 + std::erf(xv * kInvSqrt2)));
  }
  counters().flops += y.numel();
  return y;
}

Tensor gelu_grad_mul(const Tensor& x, const Tensor& gout) {
  if (!x.same_shape(gout))
    throw ShapeError("gelu_grad_mul: " + x.shape_str() + " vs " +
                     gout.shape_str());
  Tensor g = gout;
  const real* xp = x.data();
  real* gp = g.data();
  for (size_t i = 0, n = g.numel(); i < n; ++i) {
    double xv = static_cast<double>(xp[i]);
    double cdf = 0.5 * (1.0 + std::erf(xv * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv * xv);
    gp[i] *= static_cast<real>(cdf + xv * pdf);
  }
  counters().flops += g.numel();
  return g;
}

Tensor softmax_rows(const Tensor& x) {
  want_rank2(x, "softmax_rows");
  Tensor y = x;
  const size_t rows = x.rows(), cols = x.cols();
  if (cols == 0) throw ShapeError("softmax_rows: zero-width rows");
  for (size_t r = 0; r < rows; ++r) {
    real* row = y.row_ptr(r);
    real mx = row[0];
    for (size_t j = 1; j < cols; ++j) mx = row[j] > mx ? row[j] : mx;
    real sum = 0;
    for (size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const real inv = real(1) / sum;
    for (size_t j = 0; j < cols; ++j) row[j] *= inv;
  }
  counters().flops += 3ull * x.numel();
  return y;
}

Tensor softmax_rows_grad(const Tensor& y, const Tensor& gout) {
  if (!y.same_shape(gout))
    throw ShapeError("softmax_rows_grad: " + y.shape_str() + " vs " +
                     gout.shape_str());
  Tensor gx = gout;
  const size_t rows = y.rows(), cols = y.cols();
  for (size_t r = 0; r < rows; ++r) {
    const real* yr = y.row_ptr(r);
    real* gr = gx.row_ptr(r);
    real dot = 0;
    for (size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
    for (size_t j = 0; j < cols; ++j) gr[j] = yr[j] * (gr[j] - dot);
  }
  counters().flops += 4ull * y.numel();
  return gx;
}

Tensor gather_rows(const Tensor& table, std::span<const int32_t> idx) {
  want_rank2(table, "gather_rows");
  const size_t k = table.rows(), d = table.cols();
  Tensor out({idx.size(), d});
  for (size_t r = 0; r < idx.size(); ++r) {
    int32_t i = idx[r];
    if (i < 0 || static_cast<size_t>(i) >= k)
      throw IndexError("gather_rows: index " + std::to_string(i) +
                       " out of range [0, " + std::to_string(k) + ")");
    std::memcpy(out.row_ptr(r), table.row_ptr(static_cast<size_t>(i)),
                d * sizeof(real));
  }
  counters().lookups += idx.size();
  return out;
}

void scatter_add_rows(Tensor& acc, std::span<const int32_t> idx,
                      const Tensor& rows) {
  want_rank2(acc, "scatter_add_rows");
  want_rank2(rows, "scatter_add_rows");
  if (rows.rows() != idx.size() || rows.cols() != acc.cols())
    throw ShapeError("scatter_add_rows: " + rows.shape_str() + " with " +
                     std::to_string(idx.size()) + " indices into " +
                     acc.shape_str());
  const size_t k = acc.rows(), d = acc.cols();
  for (size_t r = 0; r < idx.size(); ++r) {
    int32_t i = idx[r];
    if (i < 0 || static_cast<size_t>(i) >= k)
      throw IndexError("scatter_add_rows: index " + std::to_string(i) +
                       " out of range [0, " + std::to_string(k) + ")");
    real* dst = acc.row_ptr(static_cast<size_t>(i));
    const real* src = rows.row_ptr(r);
    for (size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  counters().flops += rows.numel();
}

Tensor sum_row_groups(const Tensor& x, size_t group) {
  want_rank2(x, "sum_row_groups");
  if (group == 0 || x.rows() % group != 0)
    throw ShapeError("sum_row_groups: " + x.shape_str() +
                     " not divisible into groups of " + std::to_string(group));
  const size_t n = x.rows() / group, d = x.cols();
  Tensor out({n, d});
  for (size_t g = 0; g < n; ++g) {
    real* dst = out.row_ptr(g);
    for (size_t r = 0; r < group; ++r) {
      const real* src = x.row_ptr(g * group + r);
      for (size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  }
  counters().flops += x.numel();
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training,
               std::vector<uint8_t>* mask_out) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate " + std::to_string(rate) +
                      " outside [0, 1)");
  if (!training || rate == 0.0) {
    if (mask_out) mask_out->assign(x.numel(), 1);
    return x;
  }
  std::vector<uint8_t> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() >= rate ? 1 : 0;
  Tensor y = apply_dropout_mask(x, mask, rate);
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

Tensor apply_dropout_mask(const Tensor& x, const std::vector<uint8_t>& mask,
                          double rate) {
  if (mask.size() != x.numel())
    throw ShapeError("apply_dropout_mask: mask size " +
                     std::to_string(mask.size()) + " vs " + x.shape_str());
  const real keep_scale = static_cast<real>(1.0 / (1.0 - rate));
  Tensor y = x;
  real* yp = y.data();
  for (size_t i = 0, n = y.numel(); i < n; ++i)
    yp[i] = mask[i] ? yp[i] * keep_scale : real(0);
  counters().flops += y.numel();
  return y;
}

Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      real eps) {
  want_rank2(x, "layernorm_rows");
  const size_t rows = x.rows(), d = x.cols();
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layernorm_rows: gamma " + gamma.shape_str() + ", beta " +
                     beta.shape_str() + " vs width " + std::to_string(d));
  Tensor y = x;
  const real* gp = gamma.data();
  const real* bp = beta.data();
  for (size_t r = 0; r < rows; ++r) {
    real* row = y.row_ptr(r);
    real mean = 0;
    for (size_t j = 0; j < d; ++j) mean += row[j];
    mean /= real(d);
    real var = 0;
    for (size_t j = 0; j < d; ++j) {
      real c = row[j] - mean;
      var += c * c;
    }
    var /= real(d);
    const real rstd = real(1) / std::sqrt(var + eps);
    for (size_t j = 0; j < d; ++j)
      row[j] = (row[j] - mean) * rstd * gp[j] + bp[j];
  }
  counters().flops += 5ull * x.numel();
  return y;
}

void layernorm_rows_grad(const Tensor& x, const Tensor& gamma,
                         const Tensor& gout, Tensor& gx, Tensor& ggamma,
                         Tensor& gbeta, real eps) {
  const size_t rows = x.rows(), d = x.cols();
  if (!x.same_shape(gout))
    throw ShapeError("layernorm_rows_grad: " + x.shape_str() + " vs " +
                     gout.shape_str());
  gx = Tensor({rows, d});
  ggamma = Tensor({d});
  gbeta = Tensor({d});
  const real* gp = gamma.data();
  for (size_t r = 0; r < rows; ++r) {
    const real* xr = x.row_ptr(r);
    const real* gr = gout.row_ptr(r);
    real* dxr = gx.row_ptr(r);
    real mean = 0;
    for (size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= real(d);
    real var = 0;
    for (size_t j = 0; j < d; ++j) {
      real c = xr[j] - mean;
      var += c * c;
    }
    var /= real(d);
    const real rstd = real(1) / std::sqrt(var + eps);
    // dxhat accumulated in two row-level sums, then distributed.
    real sum_dxhat = 0, sum_dxhat_xhat = 0;
    for (size_t j = 0; j < d; ++j) {
      real xhat = (xr[j] - mean) * rstd;
      real dxhat = gr[j] * gp[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      ggamma[j] += gr[j] * xhat;
      gbeta[j] += gr[j];
    }
    for (size_t j = 0; j < d; ++j) {
      real xhat = (xr[j] - mean) * rstd;
      real dxhat = gr[j] * gp[j];
      dxr[j] = rstd * (dxhat - sum_dxhat / real(d) -
                       xhat * sum_dxhat_xhat / real(d));
    }
  }
  counters().flops += 9ull * x.numel();
}

CeResult cross_entropy_rows(const Tensor& logits,
                            std::span<const int32_t> targets,
                            std::span<const uint8_t> ignore) {
  want_rank2(logits, "cross_entropy_rows");
  const size_t rows = logits.rows(), v = logits.cols();
  if (targets.size() != rows)
    throw ShapeError("cross_entropy_rows: " + std::to_string(targets.size()) +
                     " targets for " + logits.shape_str());
  if (!ignore.empty() && ignore.size() != rows)
    throw ShapeError("cross_entropy_rows: ignore mask size " +
                     std::to_string(ignore.size()) + " vs " +
                     std::to_string(rows) + " rows");
  double total = 0;
  size_t counted = 0;
  for (size_t r = 0; r < rows; ++r) {
    if (!ignore.empty() && ignore[r]) continue;
    int32_t t = targets[r];
    if (t < 0 || static_cast<size_t>(t) >= v)
      throw IndexError("cross_entropy_rows: target " + std::to_string(t) +
                       " out of range [0, " + std::to_string(v) + ")");
    const real* row = logits.row_ptr(r);
    real mx = row[0];
    for (size_t j = 1; j < v; ++j) mx = row[j] > mx ? row[j] : mx;
    double lse = 0;
    for (size_t j = 0; j < v; ++j)
      lse += std::exp(static_cast<double>(row[j] - mx));
    lse = std::log(lse) + static_cast<double>(mx);
    total += lse - static_cast<double>(row[static_cast<size_t>(t)]);
    ++counted;
  }
  counters().flops += 3ull * logits.numel();
  if (counted == 0) return {real(0), 0};
  return {static_cast<real>(total / static_cast<double>(counted)), counted};
}

Tensor cross_entropy_rows_grad(const Tensor& logits,
                               std::span<const int32_t> targets,
                               std::span<const uint8_t> ignore, size_t counted,
                               real gout) {
  const size_t rows = logits.rows(), v = logits.cols();
  Tensor gx({rows, v});
  if (counted == 0) return gx;
  const real w = gout / static_cast<real>(counted);
  for (size_t r = 0; r < rows; ++r) {
    if (!ignore.empty() && ignore[r]) continue;
    const real* row = logits.row_ptr(r);
    real* grow = gx.row_ptr(r);
    real mx = row[0];
    for (size_t j = 1; j < v; ++j) mx = row[j] > mx ? row[j] : mx;
    real sum = 0;
    for (size_t j = 0; j < v; ++j) {
      grow[j] = std::exp(row[j] - mx);
      sum += grow[j];
    }
    const real inv = real(1) / sum;
    for (size_t j = 0; j < v; ++j) grow[j] *= inv * w;
    grow[static_cast<size_t>(targets[r])] -= w;
  }
  counters().flops += 4ull * logits.numel();
  return gx;
}

Tensor concat_cols(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: no inputs");
  const size_t rows = xs[0]->rows();
  size_t total = 0;
  for (const Tensor* t : xs) {
    if (t->rank() != 2 || t->rows() != rows)
      throw ShapeError("concat_cols: " + t->shape_str() + " vs " +
                       xs[0]->shape_str());
    total += t->cols();
  }
  Tensor out({rows, total});
  for (size_t r = 0; r < rows; ++r) {
    real* dst = out.row_ptr(r);
    for (const Tensor* t : xs) {
      std::memcpy(dst, t->row_ptr(r), t->cols() * sizeof(real));
      dst += t->cols();
    }
  }
  return out;
}

Tensor concat_rows(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: no inputs");
  const size_t cols = xs[0]->cols();
  size_t total = 0;
  for (const Tensor* t : xs) {
    if (t->rank() != 2 || t->cols() != cols)
      throw ShapeError("concat_rows: " + t->shape_str() + " vs " +
                       xs[0]->shape_str());
    total += t->rows();
  }
  Tensor out({total, cols});
  real* dst = out.data();
  for (const Tensor* t : xs) {
    std::memcpy(dst, t->data(), t->numel() * sizeof(real));
    dst += t->numel();
  }
  return out;
}

Tensor slice_rows(const Tensor& x, size_t r0, size_t r1) {
  want_rank2(x, "slice_rows");
  if (r0 > r1 || r1 > x.rows())
    throw IndexError("slice_rows: [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") of " + x.shape_str());
  Tensor out({r1 - r0, x.cols()});
  std::memcpy(out.data(), x.row_ptr(r0), out.numel() * sizeof(real));
  return out;
}

const Tensor& positional_encoding(size_t m, size_t d) {
  static thread_local std::map<std::pair<size_t, size_t>, Tensor> cache;
  auto key = std::make_pair(m, d);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Tensor pe({m, d});
  for (size_t t = 0; t < m; ++t) {
    real* row = pe.row_ptr(t);
    for (size_t j = 0; j < d; j += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(j) /
                                          static_cast<double>(d));
      double angle = static_cast<double>(t) * freq;
      row[j] = static_cast<real>(std::sin(angle));
      if (j + 1 < d) row[j + 1] = static_cast<real>(std::cos(angle));
    }
  }
  return cache.emplace(key, std::move(pe)).first->second;
}

}  // namespace pc::ops
