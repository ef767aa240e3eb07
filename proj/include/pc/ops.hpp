#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pc/rng.hpp"
#include "pc/tensor.hpp"

// Raw single-threaded kernels. No finiteness checks here (the autodiff layer
// adds them); shape and index contracts are always enforced.
namespace pc::ops {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a [m x k], b [n x k] -> a * b^T, [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a [k x m], b [k x n] -> a^T * b, [m x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real c);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise

// Exact GELU: 0.5 * x * (1 + erf(x / sqrt(2))).
Tensor gelu(const Tensor& x);
// gout ⊙ gelu'(x)
Tensor gelu_grad_mul(const Tensor& x, const Tensor& gout);

Tensor softmax_rows(const Tensor& x);
// y = softmax_rows(x); returns dL/dx given dL/dy.
Tensor softmax_rows_grad(const Tensor& y, const Tensor& gout);

// Copies table rows into a fresh contiguous [idx.size() x d] buffer.
Tensor gather_rows(const Tensor& table, std::span<const int32_t> idx);
// acc[idx[r]] += rows[r] for every r; adjoint of gather_rows.
void scatter_add_rows(Tensor& acc, std::span<const int32_t> idx,
                      const Tensor& rows);

// [g*n x d] -> [n x d], summing each run of `group` consecutive rows.
Tensor sum_row_groups(const Tensor& x, size_t group);

// Inverted dropout. Identity when training is false (rng untouched). When
// training, zeroes each element with probability rate and scales survivors
// by 1/(1-rate); the survivor mask is written to *mask_out when given.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training,
               std::vector<uint8_t>* mask_out = nullptr);
Tensor apply_dropout_mask(const Tensor& x, const std::vector<uint8_t>& mask,
                          double rate);

Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      real eps = real(1e-5));
void layernorm_rows_grad(const Tensor& x, const Tensor& gamma,
                         const Tensor& gout, Tensor& gx, Tensor& ggamma,
                         Tensor& gbeta, real eps = real(1e-5));

// Mean cross-entropy over non-ignored rows via a row-wise log-softmax.
// ignore is a per-row byte mask (nonzero = skip); empty means keep all rows.
// With every row ignored the loss is exactly zero.
struct CeResult {
  real loss = 0;
  size_t counted = 0;
};
CeResult cross_entropy_rows(const Tensor& logits,
                            std::span<const int32_t> targets,
                            std::span<const uint8_t> ignore);
Tensor cross_entropy_rows_grad(const Tensor& logits,
                               std::span<const int32_t> targets,
                               std::span<const uint8_t> ignore, size_t counted,
                               real gout);

Tensor concat_cols(const std::vector<const Tensor*>& xs);
Tensor concat_rows(const std::vector<const Tensor*>& xs);
Tensor slice_rows(const Tensor& x, size_t r0, size_t r1);

// Sinusoidal positional table [m x d], cached per thread.
const Tensor& positional_encoding(size_t m, size_t d);

}  // namespace pc::ops
