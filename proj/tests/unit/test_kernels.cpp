#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cotdrive/core/rng.hpp"
#include "cotdrive/kernels/attention.hpp"
#include "cotdrive/kernels/gaussian.hpp"
#include "gradcheck.hpp"

using namespace cotdrive;
using kernels::AttentionLayout;
using kernels::RowMatrix;

namespace {

AttentionLayout ragged_layout(Rng& rng, int groups, int heads, bool self) {
  AttentionLayout l;
  l.heads = heads;
  l.q_offsets = {0};
  l.k_offsets = {0};
  for (int g = 0; g < groups; ++g) {
    const int nk = 1 + static_cast<int>(rng.below(6));
    const int nq = self ? nk : 1 + static_cast<int>(rng.below(4));
    l.q_offsets.push_back(l.q_offsets.back() + nq);
    l.k_offsets.push_back(l.k_offsets.back() + nk);
  }
  return l;
}

}  // namespace

TEST(AttentionKernel, ParallelMatchesSerialReference) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int heads = 1 + static_cast<int>(rng.below(3));
    auto layout = ragged_layout(rng, 7, heads, trial % 2 == 0);
    layout.causal = trial % 4 == 0;
    layout.self_fallback = trial % 2 == 0;
    const int nq = layout.q_offsets.back(), nk = layout.k_offsets.back();
    if (trial % 3 == 0) {
      layout.key_valid.resize(static_cast<std::size_t>(nk));
      for (auto& v : layout.key_valid) v = rng.bernoulli(0.6);
    }
    const RowMatrix q = testutil::random_matrix(nq, 4 * heads, rng);
    const RowMatrix k = testutil::random_matrix(nk, 4 * heads, rng);
    const RowMatrix v = testutil::random_matrix(nk, 2 * heads, rng);
    const RowMatrix dout = testutil::random_matrix(nq, 2 * heads, rng);
    const auto fast = kernels::attention_forward(q, k, v, layout);
    const auto ref = kernels::serial::attention_forward(q, k, v, layout);
    EXPECT_LT((fast.out - ref.out).cwiseAbs().maxCoeff(), 1e-12);
    RowMatrix gq1, gk1, gv1, gq2, gk2, gv2;
    kernels::attention_backward(q, k, v, layout, fast.probs, dout, &gq1, &gk1, &gv1);
    kernels::serial::attention_backward(q, k, v, layout, ref.probs, dout, &gq2, &gk2, &gv2);
    EXPECT_LT((gq1 - gq2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((gk1 - gk2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((gv1 - gv2).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AttentionKernel, SingleKeyReturnsThatValue) {
  auto layout = AttentionLayout::uniform(1, 2, 1);
  RowMatrix q(2, 3), k(1, 3), v(1, 2);
  q << 1, 2, 3, -1, 0, 5;
  k << 0.3, -0.2, 0.9;
  v << 7, -4;
  const auto r = kernels::attention_forward(q, k, v, layout);
  EXPECT_DOUBLE_EQ(r.out(0, 0), 7);
  EXPECT_DOUBLE_EQ(r.out(1, 1), -4);
}

TEST(AttentionKernel, AllMaskedFallsBackToSelf) {
  auto layout = AttentionLayout::uniform(1, 3, 3);
  layout.key_valid = {0, 0, 0};
  layout.self_fallback = true;
  Rng rng(1);
  const RowMatrix x = testutil::random_matrix(3, 4, rng);
  const auto r = kernels::attention_forward(x, x, x, layout);
  EXPECT_LT((r.out - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AttentionKernel, RejectsZeroWidth) {
  auto layout = AttentionLayout::uniform(1, 1, 1);
  RowMatrix q(1, 0), k(1, 0), v(1, 2);
  EXPECT_ANY_THROW(kernels::attention_forward(q, k, v, layout));
}

namespace {

double nll_of(double mx, double my, double sx, double sy, double rho, double x, double y,
              kernels::NllForm form) {
  double out;
  kernels::GaussianBatch b{{&mx, 1}, {&my, 1}, {&sx, 1}, {&sy, 1}, {&rho, 1}, {&x, 1}, {&y, 1}};
  kernels::serial::bivariate_nll(b, form, {&out, 1}, nullptr);
  return out;
}

}  // namespace

TEST(GaussianKernel, AnalyticValues) {
  const auto std_form = kernels::NllForm::standard;
  EXPECT_NEAR(nll_of(0, 0, 1, 1, 0, 0, 0, std_form), std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(nll_of(0, 0, 1, 1, 0, 1, 0, std_form), std::log(2 * std::numbers::pi) + 0.5, 1e-15);
}

TEST(GaussianKernel, LiteralFormDiffersOnlyInCrossTerm) {
  // With rho = 0 the two forms agree; with rho != 0 and a correlated residual they differ.
  EXPECT_DOUBLE_EQ(nll_of(0, 0, 1, 2, 0, 1, 1, kernels::NllForm::standard),
                   nll_of(0, 0, 1, 2, 0, 1, 1, kernels::NllForm::literal));
  const double s = nll_of(0, 0, 1, 1, 0.5, 1, 1, kernels::NllForm::standard);
  const double l = nll_of(0, 0, 1, 1, 0.5, 1, 1, kernels::NllForm::literal);
  // quad: standard 2 - 1 = 1, literal 2 - 0.5 = 1.5; divided by 2(1-0.25)
  EXPECT_NEAR(l - s, 0.5 / 1.5, 1e-14);
}

TEST(GaussianKernel, DerivativesMatchCentralDifferences) {
  Rng rng(11);
  for (auto form : {kernels::NllForm::standard, kernels::NllForm::literal}) {
    for (int t = 0; t < 50; ++t) {
      double p[7] = {rng.normal(), rng.normal(), rng.uniform(0.3, 3), rng.uniform(0.3, 3),
                     rng.uniform(-0.9, 0.9), rng.normal(0, 2), rng.normal(0, 2)};
      double out, g[5];
      kernels::GaussianBatch b{{&p[0], 1}, {&p[1], 1}, {&p[2], 1}, {&p[3], 1},
                               {&p[4], 1}, {&p[5], 1}, {&p[6], 1}};
      kernels::GaussianGrads gr{{&g[0], 1}, {&g[1], 1}, {&g[2], 1}, {&g[3], 1}, {&g[4], 1}};
      kernels::bivariate_nll(b, form, {&out, 1}, &gr);
      for (int i = 0; i < 5; ++i) {
        const double h = 1e-6;
        double pp[7], pm[7];
        std::copy(p, p + 7, pp);
        std::copy(p, p + 7, pm);
        pp[i] += h;
        pm[i] -= h;
        const double fd = (nll_of(pp[0], pp[1], pp[2], pp[3], pp[4], pp[5], pp[6], form) -
                           nll_of(pm[0], pm[1], pm[2], pm[3], pm[4], pm[5], pm[6], form)) /
                          (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(GaussianKernel, ParallelMatchesSerial) {
  Rng rng(5);
  const std::size_t n = 1000;
  std::vector<double> c[7];
  for (auto& v : c) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[0][i] = rng.normal();
    c[1][i] = rng.normal();
    c[2][i] = rng.uniform(0.1, 2);
    c[3][i] = rng.uniform(0.1, 2);
    c[4][i] = rng.uniform(-0.95, 0.95);
    c[5][i] = rng.normal();
    c[6][i] = rng.normal();
  }
  kernels::GaussianBatch b{c[0], c[1], c[2], c[3], c[4], c[5], c[6]};
  std::vector<double> a(n), r(n);
  kernels::bivariate_nll(b, kernels::NllForm::standard, a, nullptr);
  kernels::serial::bivariate_nll(b, kernels::NllForm::standard, r, nullptr);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(a[i], r[i]);
}
