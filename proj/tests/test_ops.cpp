#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pc/ops.hpp"

using namespace pc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<real>(rng.uniform_open(-scale, scale));
  return t;
}

}  // namespace

TEST_SUITE("ops") {

TEST_CASE("matmul agrees with the naive oracle") {
  Rng rng(1);
  const size_t dims[4][3] = {{1, 1, 1}, {3, 4, 5}, {8, 2, 7}, {5, 16, 3}};
  for (const auto& mkn : dims) {
    const size_t m = mkn[0], k = mkn[1], n = mkn[2];
    Tensor a = random_tensor({m, k}, rng);
    Tensor b = random_tensor({k, n}, rng);
    CHECK(oracle::max_abs_diff(ops::matmul(a, b), oracle::naive_matmul(a, b)) <
          1e-12);
  }
  Tensor a = random_tensor({2, 3}, rng);
  Tensor bad = random_tensor({4, 2}, rng);
  CHECK_THROWS_AS(ops::matmul(a, bad), ShapeError);
}

TEST_CASE("matmul counts 2mkn flops") {
  Rng rng(2);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  counters().reset();
  ops::matmul(a, b);
  CHECK(counters().flops == 2 * 3 * 4 * 5);
}

TEST_CASE("matmul_nt and matmul_tn transpose the right operand") {
  Rng rng(3);
  Tensor a = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({5, 6}, rng);  // b^T is [6 x 5]
  Tensor bt({6, 5});
  for (size_t i = 0; i < 5; ++i)
    for (size_t j = 0; j < 6; ++j) bt.at(j, i) = b.at(i, j);
  CHECK(oracle::max_abs_diff(ops::matmul_nt(a, b),
                             oracle::naive_matmul(a, bt)) < 1e-12);

  Tensor c = random_tensor({6, 4}, rng);  // c^T is [4 x 6]
  Tensor d = random_tensor({6, 3}, rng);
  Tensor ct({4, 6});
  for (size_t i = 0; i < 6; ++i)
    for (size_t j = 0; j < 4; ++j) ct.at(j, i) = c.at(i, j);
  CHECK(oracle::max_abs_diff(ops::matmul_tn(c, d),
                             oracle::naive_matmul(ct, d)) < 1e-12);
}

TEST_CASE("elementwise add, scale, mul") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{10, 20}, {30, 40}});
  CHECK(ops::add(a, b) == Tensor::matrix({{11, 22}, {33, 44}}));
  CHECK(ops::scale(a, 2) == Tensor::matrix({{2, 4}, {6, 8}}));
  CHECK(ops::mul(a, b) == Tensor::matrix({{10, 40}, {90, 160}}));
  Tensor c({1, 2});
  CHECK_THROWS_AS(ops::add(a, c), ShapeError);
  ops::add_inplace(a, b);
  CHECK(a == Tensor::matrix({{11, 22}, {33, 44}}));
}

TEST_CASE("gelu matches the erf oracle") {
  CHECK(static_cast<double>(ops::gelu(Tensor::scalar(1))[0]) ==
        doctest::Approx(0.8413447460685429).epsilon(1e-15));
  Rng rng(4);
  Tensor x = random_tensor({3, 7}, rng, 4.0);
  Tensor y = ops::gelu(x);
  for (size_t i = 0; i < x.numel(); ++i)
    CHECK(static_cast<double>(y[i]) ==
          doctest::Approx(oracle::gelu_scalar(x[i])).epsilon(1e-14));
  // limits: large negative -> 0, large positive -> x
  Tensor ex = Tensor::vec({-40, 40, 0});
  Tensor ey = ops::gelu(ex);
  CHECK(ey[0] == real(0));
  CHECK(ey[1] == real(40));
  CHECK(ey[2] == real(0));
}

TEST_CASE("gelu_grad_mul matches central differences") {
  Rng rng(5);
  Tensor x = random_tensor({2, 5}, rng, 3.0);
  Tensor ones = Tensor::full({2, 5}, 1);
  Tensor g = ops::gelu_grad_mul(x, ones);
  const double h = 1e-6;
  for (size_t i = 0; i < x.numel(); ++i) {
    double fd = (oracle::gelu_scalar(x[i] + h) - oracle::gelu_scalar(x[i] - h)) /
                (2 * h);
    CHECK(static_cast<double>(g[i]) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("softmax rows sum to one, even at magnitude 1e4") {
  Rng rng(6);
  Tensor x = random_tensor({4, 9}, rng, 1.0);
  x.at(1, 3) = 1e4;
  x.at(2, 0) = -1e4;
  Tensor y = ops::softmax_rows(x);
  for (size_t r = 0; r < 4; ++r) {
    long double sum = 0;
    for (size_t c = 0; c < 9; ++c) {
      CHECK(y.at(r, c) >= real(0));
      sum += y.at(r, c);
    }
    CHECK(static_cast<double>(sum) == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::vector<double> want = oracle::softmax_row(
      std::span<const real>(x.row_ptr(0), 9));
  for (size_t c = 0; c < 9; ++c)
    CHECK(static_cast<double>(y.at(0, c)) ==
          doctest::Approx(want[c]).epsilon(1e-13));
  CHECK_THROWS_AS(ops::softmax_rows(Tensor({2, 0})), ShapeError);
}

TEST_CASE("softmax_rows_grad matches finite differences") {
  Rng rng(7);
  Tensor x = random_tensor({2, 5}, rng, 2.0);
  Tensor gout = random_tensor({2, 5}, rng);
  Tensor y = ops::softmax_rows(x);
  Tensor gx = ops::softmax_rows_grad(y, gout);
  const double h = 1e-6;
  for (size_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += static_cast<real>(h);
    xm[i] -= static_cast<real>(h);
    Tensor yp = ops::softmax_rows(xp), ym = ops::softmax_rows(xm);
    long double fp = 0, fm = 0;  // loss = <gout, softmax(x)>
    for (size_t j = 0; j < x.numel(); ++j) {
      fp += static_cast<long double>(gout[j]) * yp[j];
      fm += static_cast<long double>(gout[j]) * ym[j];
    }
    CHECK(static_cast<double>(gx[i]) ==
          doctest::Approx(static_cast<double>((fp - fm) / (2 * h)))
              .epsilon(1e-5));
  }
}

TEST_CASE("gather_rows copies rows and counts lookups") {
  Tensor table = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  std::vector<int32_t> idx = {2, 0, 2, 1};
  counters().reset();
  Tensor out = ops::gather_rows(table, idx);
  CHECK(counters().lookups == 4);
  CHECK(out == Tensor::matrix({{5, 6}, {1, 2}, {5, 6}, {3, 4}}));
  CHECK(oracle::max_abs_diff(out, oracle::one_hot_gather(table, idx)) == 0.0);
  std::vector<int32_t> bad = {3};
  CHECK_THROWS_AS(ops::gather_rows(table, bad), IndexError);
  std::vector<int32_t> neg = {-1};
  CHECK_THROWS_AS(ops::gather_rows(table, neg), IndexError);
}

TEST_CASE("scatter_add_rows is the one-hot transpose, brute force") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t k = 1 + rng.below(16), d = 1 + rng.below(8);
    const size_t n = 1 + rng.below(24);
    std::vector<int32_t> idx(n);
    for (auto& v : idx) v = static_cast<int32_t>(rng.below(k));
    Tensor grad = random_tensor({n, d}, rng);
    Tensor acc({k, d});
    ops::scatter_add_rows(acc, idx, grad);
    CHECK(oracle::max_abs_diff(acc, oracle::one_hot_scatter(grad, idx, k)) <
          1e-12);
  }
}

TEST_CASE("sum_row_groups sums consecutive runs") {
  Tensor x = Tensor::matrix({{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}, {6, 6}});
  Tensor y = ops::sum_row_groups(x, 3);
  CHECK(y == Tensor::matrix({{6, 6}, {15, 15}}));
  CHECK_THROWS_AS(ops::sum_row_groups(x, 4), ShapeError);
  CHECK_THROWS_AS(ops::sum_row_groups(x, 0), ShapeError);
}

TEST_CASE("dropout semantics") {
  Rng rng(9);
  Tensor x = Tensor::full({10, 10}, 2);

  SUBCASE("identity when not training, rng untouched") {
    Rng::State before = rng.state();
    Tensor y = ops::dropout(x, 0.5, rng, false);
    CHECK(y == x);
    CHECK(rng.state().s[0] == before.s[0]);
  }
  SUBCASE("identity at rate zero") {
    Tensor y = ops::dropout(x, 0.0, rng, true);
    CHECK(y == x);
  }
  SUBCASE("rate outside [0,1) rejected") {
    CHECK_THROWS_AS(ops::dropout(x, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(ops::dropout(x, -0.1, rng, true), ConfigError);
  }
  SUBCASE("inverted scaling and plausible drop fraction") {
    std::vector<uint8_t> mask;
    Tensor y = ops::dropout(x, 0.4, rng, true, &mask);
    REQUIRE(mask.size() == x.numel());
    size_t kept = 0;
    for (size_t i = 0; i < x.numel(); ++i) {
      if (mask[i]) {
        ++kept;
        CHECK(static_cast<double>(y[i]) ==
              doctest::Approx(2.0 / 0.6).epsilon(1e-12));
      } else {
        CHECK(y[i] == real(0));
      }
    }
    // 100 Bernoulli(0.6) draws: mean 60, sd ~4.9; 5 sigma margin
    CHECK(kept > 35);
    CHECK(kept < 85);
    CHECK(ops::apply_dropout_mask(x, mask, 0.4) == y);
  }
}

TEST_CASE("layernorm_rows normalizes and applies gamma/beta") {
  Rng rng(10);
  Tensor x = random_tensor({3, 8}, rng, 5.0);
  Tensor gamma = Tensor::full({8}, 1);
  Tensor beta = Tensor({8});
  Tensor y = ops::layernorm_rows(x, gamma, beta);
  for (size_t r = 0; r < 3; ++r) {
    long double mean = 0, var = 0;
    for (size_t c = 0; c < 8; ++c) mean += y.at(r, c);
    mean /= 8;
    for (size_t c = 0; c < 8; ++c) {
      long double d = y.at(r, c) - mean;
      var += d * d;
    }
    var /= 8;
    CHECK(static_cast<double>(mean) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(static_cast<double>(var) == doctest::Approx(1.0).epsilon(1e-3));
  }
  Tensor gamma2 = Tensor::full({8}, 2);
  Tensor beta2 = Tensor::full({8}, -1);
  Tensor y2 = ops::layernorm_rows(x, gamma2, beta2);
  for (size_t i = 0; i < y.numel(); ++i)
    CHECK(static_cast<double>(y2[i]) ==
          doctest::Approx(2.0 * y[i] - 1.0).epsilon(1e-12));
  Tensor short_gamma({4});
  CHECK_THROWS_AS(ops::layernorm_rows(x, short_gamma, beta), ShapeError);
}

TEST_CASE("layernorm_rows_grad matches finite differences") {
  Rng rng(11);
  Tensor x = random_tensor({2, 6}, rng, 2.0);
  Tensor gamma = random_tensor({6}, rng, 1.0);
  Tensor beta = random_tensor({6}, rng, 1.0);
  Tensor gout = random_tensor({2, 6}, rng);
  Tensor gx, ggamma, gbeta;
  ops::layernorm_rows_grad(x, gamma, gout, gx, ggamma, gbeta);

  auto loss = [&](const Tensor& xx, const Tensor& gg, const Tensor& bb) {
    Tensor y = ops::layernorm_rows(xx, gg, bb);
    long double acc = 0;
    for (size_t i = 0; i < y.numel(); ++i)
      acc += static_cast<long double>(gout[i]) * y[i];
    return static_cast<double>(acc);
  };
  const double h = 1e-6;
  for (size_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += static_cast<real>(h);
    xm[i] -= static_cast<real>(h);
    double fd = (loss(xp, gamma, beta) - loss(xm, gamma, beta)) / (2 * h);
    CHECK(static_cast<double>(gx[i]) == doctest::Approx(fd).epsilon(1e-4));
  }
  for (size_t i = 0; i < gamma.numel(); ++i) {
    Tensor gp = gamma, gm = gamma;
    gp[i] += static_cast<real>(h);
    gm[i] -= static_cast<real>(h);
    double fd = (loss(x, gp, beta) - loss(x, gm, beta)) / (2 * h);
    CHECK(static_cast<double>(ggamma[i]) == doctest::Approx(fd).epsilon(1e-5));
    Tensor bp = beta, bm = beta;
    bp[i] += static_cast<real>(h);
    bm[i] -= static_cast<real>(h);
    fd = (loss(x, gamma, bp) - loss(x, gamma, bm)) / (2 * h);
    CHECK(static_cast<double>(gbeta[i]) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("cross_entropy_rows matches the log-softmax oracle") {
  Rng rng(12);
  Tensor logits = random_tensor({4, 8}, rng, 3.0);
  std::vector<int32_t> targets = {3, 0, 7, 5};
  std::vector<uint8_t> keep_all;
  auto res = ops::cross_entropy_rows(logits, targets, keep_all);
  CHECK(res.counted == 4);
  long double want = 0;
  for (size_t r = 0; r < 4; ++r)
    want -= oracle::log_softmax_at(
        std::span<const real>(logits.row_ptr(r), 8),
        static_cast<size_t>(targets[r]));
  want /= 4;
  CHECK(static_cast<double>(res.loss) ==
        doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
}

TEST_CASE("cross_entropy_rows respects the ignore mask") {
  Tensor logits = Tensor::matrix({{1, 2, 3}, {3, 2, 1}, {0, 0, 0}});
  std::vector<int32_t> targets = {0, 0, 1};
  std::vector<uint8_t> ignore = {1, 0, 1};
  auto res = ops::cross_entropy_rows(logits, targets, ignore);
  CHECK(res.counted == 1);
  CHECK(static_cast<double>(res.loss) ==
        doctest::Approx(-oracle::log_softmax_at(
                            std::span<const real>(logits.row_ptr(1), 3), 0))
            .epsilon(1e-12));

  std::vector<uint8_t> all = {1, 1, 1};
  auto zero = ops::cross_entropy_rows(logits, targets, all);
  CHECK(zero.counted == 0);
  CHECK(zero.loss == real(0));  // exactly zero, not approximately

  // target range is validated only on counted rows
  std::vector<int32_t> bad = {9, 0, 9};
  CHECK_NOTHROW(ops::cross_entropy_rows(logits, bad, ignore));
  std::vector<uint8_t> none;
  CHECK_THROWS_AS(ops::cross_entropy_rows(logits, bad, none), IndexError);
}

TEST_CASE("cross_entropy grad is zero on ignored rows, matches FD on counted") {
  Rng rng(13);
  Tensor logits = random_tensor({3, 5}, rng, 2.0);
  std::vector<int32_t> targets = {2, 4, 0};
  std::vector<uint8_t> ignore = {0, 1, 0};
  auto res = ops::cross_entropy_rows(logits, targets, ignore);
  Tensor g = ops::cross_entropy_rows_grad(logits, targets, ignore, res.counted,
                                          1.0);
  for (size_t c = 0; c < 5; ++c) CHECK(g.at(1, c) == real(0));
  const double h = 1e-6;
  for (size_t i = 0; i < logits.numel(); ++i) {
    Tensor lp = logits, lm = logits;
    lp[i] += static_cast<real>(h);
    lm[i] -= static_cast<real>(h);
    double fd = (ops::cross_entropy_rows(lp, targets, ignore).loss -
                 ops::cross_entropy_rows(lm, targets, ignore).loss) /
                (2 * h);
    CHECK(static_cast<double>(g[i]) == doctest::Approx(fd).epsilon(1e-5));
  }
  Tensor gz = ops::cross_entropy_rows_grad(logits, targets, ignore, 0, 1.0);
  for (size_t i = 0; i < gz.numel(); ++i) CHECK(gz[i] == real(0));
}

TEST_CASE("concat and slice") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{5}, {6}});
  Tensor c = ops::concat_cols({&a, &b});
  CHECK(c == Tensor::matrix({{1, 2, 5}, {3, 4, 6}}));
  Tensor r = ops::concat_rows({&a, &a});
  CHECK(r.rows() == 4);
  CHECK(ops::slice_rows(r, 2, 4) == a);
  CHECK_THROWS_AS(ops::slice_rows(r, 3, 2), IndexError);
  CHECK_THROWS_AS(ops::slice_rows(r, 2, 5), IndexError);
  Tensor tall = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  CHECK_THROWS_AS(ops::concat_cols({&a, &tall}), ShapeError);
  CHECK_THROWS_AS(ops::concat_rows({&a, &b}), ShapeError);
}

TEST_CASE("positional encoding values and cache identity") {
  const Tensor& pe = ops::positional_encoding(10, 8);
  CHECK(pe.rows() == 10);
  CHECK(pe.cols() == 8);
  for (size_t c = 0; c < 8; c += 2) CHECK(pe.at(0, c) == real(0));
  for (size_t c = 1; c < 8; c += 2) CHECK(pe.at(0, c) == real(1));
  // pos 3, pair j: sin/cos(3 / 10000^(2j/8)); spot check j=1
  const double freq = std::pow(10000.0, -2.0 / 8.0);
  CHECK(static_cast<double>(pe.at(3, 2)) ==
        doctest::Approx(std::sin(3 * freq)).epsilon(1e-12));
  CHECK(static_cast<double>(pe.at(3, 3)) ==
        doctest::Approx(std::cos(3 * freq)).epsilon(1e-12));
  const Tensor& again = ops::positional_encoding(10, 8);
  CHECK(&again == &pe);  // cached
}

}  // TEST_SUITE
