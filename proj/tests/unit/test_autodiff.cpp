#include <cmath>

#include <gtest/gtest.h>

#include "cotdrive/nn/layers.hpp"
#include "cotdrive/nn/optim.hpp"
#include "gradcheck.hpp"

using namespace cotdrive;
using namespace cotdrive::nn;
using testutil::all_coordinates;
using testutil::grad_check;
using testutil::random_matrix;

namespace {

Var param(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  return Var(random_matrix(r, c, rng, s), true);
}

void expect_grad_ok(const std::function<Var()>& f, const std::vector<Var>& vars,
                    double tol = 1e-7) {
  const auto res = grad_check(f, all_coordinates(vars));
  EXPECT_LT(res.rel_error, tol) << "max abs diff " << res.max_abs_diff;
}

}  // namespace

TEST(Autodiff, ElementwiseAndMatmul) {
  Rng rng(1);
  Var a = param(3, 4, rng), b = param(4, 2, rng), c = param(3, 2, rng), row = param(1, 2, rng);
  expect_grad_ok(
      [&] {
        Var x = matmul(a, b);
        x = add_row(mul(x, tanh(c)), row);
        x = add(elu(x), sigmoid(scale(x, 0.3)));
        x = sub(softplus(x), exp(scale(x, 0.1)));
        return sum(gelu(add_scalar(x, 0.2)));
      },
      {a, b, c, row});
}

TEST(Autodiff, ShapeOps) {
  Rng rng(2);
  Var a = param(5, 3, rng), b = param(5, 2, rng), col = param(5, 1, rng);
  const std::vector<int> idx = {4, -1, 0, 0, 2};
  const std::vector<int> pk = {0, 3, 2, 1, 3};
  const std::vector<int> seg = {0, 2, 5};
  expect_grad_ok(
      [&] {
        Var parts[] = {a, b};
        Var x = concat_cols(parts);
        Var y = gather_rows(x, idx);
        Var rows[] = {slice_rows(y, 1, 3), slice_rows(x, 0, 2)};
        Var z = concat_rows(rows);
        Var w = mul_col(slice_cols(x, 1, 4), col);
        Var s = segment_mean(w, seg);
        return add(add(sum(mul(z, z)), sum(pick(w, pk))), mean(mul(s, s)));
      },
      {a, b, col});
}

TEST(Autodiff, SoftmaxFamilyAndLayerNorm) {
  Rng rng(3);
  Var a = param(4, 6, rng), g = param(1, 6, rng), bta = param(1, 6, rng), w = param(4, 6, rng);
  const std::vector<int> targets = {0, 5, 2, 3};
  expect_grad_ok(
      [&] {
        Var s = softmax_rows(a);
        Var ls = log_softmax_rows(layer_norm(a, g, bta));
        Var t = token_nll(mul(a, w), targets);
        return add(add(sum(mul(s, w)), sum(mul(ls, w))), add(sum(t), sum(row_sum(log_floor(s, 1e-12)))));
      },
      {a, g, bta, w});
}

TEST(Autodiff, AttentionAndTimeMix) {
  Rng rng(4);
  auto layout = std::make_shared<kernels::AttentionLayout>();
  layout->heads = 2;
  layout->q_offsets = {0, 3, 5};
  layout->k_offsets = {0, 3, 5};
  layout->key_valid = {1, 0, 1, 1, 1};
  Var q = param(5, 4, rng), k = param(5, 4, rng), v = param(5, 4, rng);
  Var tw = param(3, 2, rng), tb = param(3, 1, rng), x = param(4, 4, rng);
  expect_grad_ok(
      [&] {
        Var o = attention(q, k, v, layout);
        Var m = time_mix(x, tw, tb, 2);
        return add(sum(mul(o, o)), sum(mul(m, tanh(m))));
      },
      {q, k, v, tw, tb, x});
}

TEST(Autodiff, BivariateNllThroughOutputTransforms) {
  Rng rng(5);
  Var raw = param(6, 5, rng);
  const Matrix truth = random_matrix(6, 2, rng, 2.0);
  expect_grad_ok(
      [&] {
        Var mu = slice_cols(raw, 0, 2);
        Var sigma = add_scalar(softplus(slice_cols(raw, 2, 2)), 1e-3);
        Var rho = scale(tanh(slice_cols(raw, 4, 1)), 0.99);
        Var parts[] = {mu, sigma, rho};
        return sum(bivariate_nll(concat_cols(parts), truth, kernels::NllForm::standard));
      },
      {raw});
}

TEST(Autodiff, LstmAndLayers) {
  Rng rng(6);
  ParameterStore store;
  Lstm lstm(store, "lstm", 3, 4, rng);
  Linear lin(store, "lin", 4, 2, rng);
  SelfAttention att(store, "att", 4, 2, rng);
  LayerNorm ln(store, "ln", 4);
  std::vector<Var> inputs;
  for (int t = 0; t < 3; ++t) inputs.push_back(constant(random_matrix(2, 3, rng)));
  auto layout = std::make_shared<kernels::AttentionLayout>(kernels::AttentionLayout::uniform(2, 3, 3, 2));
  std::vector<Var> vars;
  for (const auto& e : store.entries()) vars.push_back(e.second);
  expect_grad_ok(
      [&] {
        auto hs = lstm.run(inputs);
        Var seq = concat_rows(hs);  // time-major: rows t*2 + b
        const std::vector<int> perm = {0, 2, 4, 1, 3, 5};
        Var per_sample = gather_rows(seq, perm);
        Var y = ln(add(per_sample, att(per_sample, layout)));
        return sum(mul(lin(y), lin(y)));
      },
      vars, 1e-6);
}

TEST(Autodiff, NoGradGuardSkipsTape) {
  Var a(Matrix::Ones(2, 2), true);
  NoGradGuard guard;
  Var b = mul(a, a);
  EXPECT_FALSE(b.requires_grad());
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  Var a(Matrix::Constant(1, 1, 3.0), true);
  Var y = add(mul(a, a), a);  // dy/da = 2a + 1
  backward(y);
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 7.0);
}

TEST(Optim, AdamMovesAgainstGradient) {
  ParameterStore store;
  Var w = store.add("w", Matrix::Constant(1, 1, 1.0));
  Adam opt(store);
  for (int i = 0; i < 200; ++i) {
    store.zero_grad();
    backward(mul(w, w));
    opt.step(0.05);
  }
  EXPECT_LT(std::abs(w.value()(0, 0)), 0.05);
}

TEST(Optim, CosineWarmRestartsSchedule) {
  CosineWarmRestarts s{1e-3, 1e-5, 10};
  EXPECT_DOUBLE_EQ(s.rate(0), 1e-3);
  EXPECT_NEAR(s.rate(5), 0.5 * (1e-3 + 1e-5), 1e-15);
  EXPECT_DOUBLE_EQ(s.rate(10), 1e-3);
  EXPECT_GT(s.rate(9), 1e-5);
}
