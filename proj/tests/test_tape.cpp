#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pc/gradcheck.hpp"
#include "pc/tape.hpp"

using namespace pc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<real>(rng.uniform_open(-scale, scale));
  return t;
}

// Reduce any node to a scalar by a fixed random projection so every entry
// contributes to the checked gradient.
Var project(Tape& t, Binder& b, Var x, const Tensor& weights) {
  Var w = b.tape().constant(weights);
  Var flat = reshape(t, x, {1, weights.numel()});
  Var wcol = reshape(t, w, {weights.numel(), 1});
  return matmul(t, flat, wcol);
}

double check(const std::function<Var(Tape&, Binder&)>& f,
             std::span<const NamedParam> params) {
  GradCheckConfig cfg;
  return finite_diff_check(f, params, cfg).max_rel_err;
}

}  // namespace

TEST_SUITE("tape") {

TEST_CASE("per-op gradients match finite differences") {
  Rng rng(21);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor bm = random_tensor({4, 5}, rng);
  Tensor proj_a = random_tensor({3, 4}, rng);
  Tensor proj35 = random_tensor({3, 5}, rng);

  SUBCASE("matmul, both operands") {
    std::vector<NamedParam> params = {{"a", &a}, {"b", &bm}};
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, matmul(t, b.var(a), b.var(bm)), proj35);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("matmul_nt") {
    Tensor c = random_tensor({5, 4}, rng);
    std::vector<NamedParam> params = {{"a", &a}, {"c", &c}};
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, matmul_nt(t, b.var(a), b.var(c)), proj35);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("add and scale") {
    Tensor d = random_tensor({3, 4}, rng);
    std::vector<NamedParam> params = {{"a", &a}, {"d", &d}};
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, scale(t, add(t, b.var(a), b.var(d)), real(1.7)),
                     proj_a);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("gelu") {
    std::vector<NamedParam> params = {{"a", &a}};
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, gelu(t, b.var(a)), proj_a);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("softmax_rows") {
    std::vector<NamedParam> params = {{"a", &a}};
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, softmax_rows(t, b.var(a)), proj_a);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("gather then sum_row_groups") {
    Tensor table = random_tensor({6, 4}, rng);
    std::vector<int32_t> idx = {0, 5, 2, 2, 1, 0};  // repeats on purpose
    Tensor proj_sum = random_tensor({2, 4}, rng);
    std::vector<NamedParam> params = {{"table", &table}};
    auto f = [&](Tape& t, Binder& b) {
      Var g = gather_rows(t, b.var(table), idx);
      return project(t, b, sum_row_groups(t, g, 3), proj_sum);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("concat_cols and slice_rows") {
    Tensor e = random_tensor({3, 2}, rng);
    Tensor proj_slice = random_tensor({2, 6}, rng);
    std::vector<NamedParam> params = {{"a", &a}, {"e", &e}};
    auto f = [&](Tape& t, Binder& b) {
      std::vector<Var> parts = {b.var(a), b.var(e)};
      Var cat = concat_cols(t, parts);
      return project(t, b, slice_rows(t, cat, 1, 3), proj_slice);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("concat_rows") {
    Tensor e = random_tensor({2, 4}, rng);
    Tensor proj_cat = random_tensor({5, 4}, rng);
    std::vector<NamedParam> params = {{"a", &a}, {"e", &e}};
    auto f = [&](Tape& t, Binder& b) {
      std::vector<Var> parts = {b.var(a), b.var(e)};
      return project(t, b, concat_rows(t, parts), proj_cat);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("layernorm_rows") {
    Tensor gamma = random_tensor({4}, rng);
    Tensor beta = random_tensor({4}, rng);
    std::vector<NamedParam> params = {
        {"a", &a}, {"gamma", &gamma}, {"beta", &beta}};
    auto f = [&](Tape& t, Binder& b) {
      return project(
          t, b, layernorm_rows(t, b.var(a), b.var(gamma), b.var(beta)),
          proj_a);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("cross_entropy_rows") {
    std::vector<int32_t> targets = {1, 3, 0};
    std::vector<uint8_t> ignore = {0, 1, 0};
    std::vector<NamedParam> params = {{"a", &a}};
    auto f = [&](Tape& t, Binder& b) {
      return cross_entropy_rows(t, b.var(a), targets, ignore);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("dropout with a fixed per-build mask") {
    std::vector<NamedParam> params = {{"a", &a}};
    auto f = [&](Tape& t, Binder& b) {
      Rng drop(99);  // same mask on every rebuild, so FD stays valid
      return project(t, b, dropout(t, b.var(a), 0.35, &drop, true), proj_a);
    };
    CHECK(check(f, params) < 1e-6);
  }
  SUBCASE("reshape is transparent to gradients") {
    std::vector<NamedParam> params = {{"a", &a}};
    Tensor proj_r = random_tensor({6, 2}, rng);
    auto f = [&](Tape& t, Binder& b) {
      return project(t, b, reshape(t, b.var(a), {6, 2}), proj_r);
    };
    CHECK(check(f, params) < 1e-6);
  }
}

TEST_CASE("a composite expression gradchecks below 1e-6") {
  Rng rng(22);
  Tensor w0 = random_tensor({4, 6}, rng);
  Tensor w1 = random_tensor({6, 4}, rng);
  Tensor x = random_tensor({3, 4}, rng);
  std::vector<int32_t> targets = {2, 0, 3};
  std::vector<uint8_t> keep;
  std::vector<NamedParam> params = {{"w0", &w0}, {"w1", &w1}, {"x", &x}};
  auto f = [&](Tape& t, Binder& b) {
    Var h = gelu(t, matmul(t, b.var(x), b.var(w0)));
    Var logits = matmul(t, h, b.var(w1));
    return cross_entropy_rows(t, logits, targets, keep);
  };
  CHECK(check(f, params) < 1e-6);
}

TEST_CASE("binder caches one leaf per tensor and grads accumulate over reuse") {
  Tensor w = Tensor::matrix({{2, 0}, {0, 3}});
  Tape t;
  Binder b(t);
  Var v1 = b.var(w);
  Var v2 = b.var(w);
  CHECK(v1.id == v2.id);
  // loss = sum(w @ w): dL/dw = (w @ 1)^T-ish; just compare against FD
  std::vector<NamedParam> params = {{"w", &w}};
  auto f = [&](Tape& tape, Binder& bind) {
    Var ww = matmul(tape, bind.var(w), bind.var(w));
    Var flat = reshape(tape, ww, {1, 4});
    Var ones = tape.constant(Tensor::matrix({{1}, {1}, {1}, {1}}));
    return matmul(tape, flat, ones);
  };
  GradCheckConfig cfg;
  auto res = finite_diff_check(f, params, cfg);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("backward requires a scalar and reports absent grads") {
  Tape t;
  Binder b(t);
  Tensor x = Tensor::matrix({{1, 2}});
  Var vx = b.var(x);
  CHECK_THROWS_AS(t.backward(vx), ContractError);

  Tensor unused = Tensor::matrix({{5}});
  Var vu = b.var(unused);
  Var loss = matmul(t, vx, t.constant(Tensor::matrix({{1}, {1}})));
  Gradients g = t.backward(loss);
  CHECK(g.has(vx));
  CHECK_FALSE(g.has(vu));
  CHECK_THROWS_AS(g.at(vu), ContractError);
}

TEST_CASE("non-finite results are rejected with the op name") {
  Tape t;
  Binder b(t);
  Tensor x = Tensor::matrix({{1e308, 1e308}});
  Tensor w = Tensor::matrix({{1e308}, {1e308}});
  Var vx = b.var(x);
  Var vw = b.var(w);
  CHECK_THROWS_WITH_AS(matmul(t, vx, vw),
                       doctest::Contains("matmul"), NumericError);
}

TEST_CASE("tape values are exact kernel outputs") {
  Rng rng(23);
  Tensor x = random_tensor({2, 3}, rng);
  Tensor w = random_tensor({3, 3}, rng);
  Tape t;
  Binder b(t);
  Var y = gelu(t, matmul(t, b.var(x), b.var(w)));
  Tensor plain = ops::gelu(ops::matmul(x, w));
  CHECK(t.value(y) == plain);  // bitwise
}

}  // TEST_SUITE
