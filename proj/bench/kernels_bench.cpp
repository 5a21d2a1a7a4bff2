// Parallel kernels against their serial references. Thread count follows
// OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <vector>

#include "cotdrive/core/rng.hpp"
#include "cotdrive/kernels/attention.hpp"
#include "cotdrive/kernels/gaussian.hpp"
#include "cotdrive/kernels/metrics.hpp"

namespace k = cotdrive::kernels;

namespace {

k::RowMatrix random_matrix(cotdrive::Rng& rng, int rows, int cols) {
  k::RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Interaction-layer shape: one group per scene, agents x history tokens.
struct AttentionCase {
  k::RowMatrix q, kk, v;
  k::AttentionLayout layout;
  explicit AttentionCase(int groups) {
    cotdrive::Rng rng(1);
    const int len = 17, width = 64;
    q = random_matrix(rng, groups * len, width);
    kk = random_matrix(rng, groups * len, width);
    v = random_matrix(rng, groups * len, width);
    layout = k::AttentionLayout::uniform(groups, len, len, 8);
  }
};

template <bool Parallel>
void BM_AttentionForward(benchmark::State& state) {
  const AttentionCase c(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto r = Parallel ? k::attention_forward(c.q, c.kk, c.v, c.layout)
                      : k::serial::attention_forward(c.q, c.kk, c.v, c.layout);
    benchmark::DoNotOptimize(r.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_AttentionBackward(benchmark::State& state) {
  const AttentionCase c(static_cast<int>(state.range(0)));
  const auto fwd = k::serial::attention_forward(c.q, c.kk, c.v, c.layout);
  const k::RowMatrix g = k::RowMatrix::Ones(fwd.out.rows(), fwd.out.cols());
  k::RowMatrix gq, gk, gv;
  for (auto _ : state) {
    gq.setZero(c.q.rows(), c.q.cols());
    gk.setZero(c.kk.rows(), c.kk.cols());
    gv.setZero(c.v.rows(), c.v.cols());
    if (Parallel)
      k::attention_backward(c.q, c.kk, c.v, c.layout, fwd.probs, g, &gq, &gk, &gv);
    else
      k::serial::attention_backward(c.q, c.kk, c.v, c.layout, fwd.probs, g, &gq, &gk, &gv);
    benchmark::DoNotOptimize(gq.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct GaussianCase {
  std::vector<double> mx, my, sx, sy, rho, x, y, nll, g[5];
  explicit GaussianCase(std::size_t n) {
    cotdrive::Rng rng(2);
    for (auto* v : {&mx, &my, &x, &y}) {
      v->resize(n);
      for (auto& e : *v) e = 5.0 * rng.normal();
    }
    for (auto* v : {&sx, &sy}) {
      v->resize(n);
      for (auto& e : *v) e = 0.5 + rng.uniform();
    }
    rho.resize(n);
    for (auto& e : rho) e = 1.8 * rng.uniform() - 0.9;
    nll.resize(n);
    for (auto& v : g) v.resize(n);
  }
  k::GaussianBatch batch() const { return {mx, my, sx, sy, rho, x, y}; }
  k::GaussianGrads grads() { return {g[0], g[1], g[2], g[3], g[4]}; }
};

template <bool Parallel>
void BM_GaussianNll(benchmark::State& state) {
  GaussianCase c(static_cast<std::size_t>(state.range(0)));
  const auto b = c.batch();
  const auto gr = c.grads();
  for (auto _ : state) {
    if (Parallel)
      k::bivariate_nll(b, k::NllForm::standard, c.nll, &gr);
    else
      k::serial::bivariate_nll(b, k::NllForm::standard, c.nll, &gr);
    benchmark::DoNotOptimize(c.nll.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_DisplacementSums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t frames = 25;
  cotdrive::Rng rng(3);
  std::vector<double> pred(n * frames * 2), truth(n * frames * 2);
  for (auto& e : pred) e = rng.normal();
  for (auto& e : truth) e = rng.normal();
  for (auto _ : state) {
    auto s = Parallel ? k::displacement_sums(pred, truth, n, frames) : k::serial::displacement_sums(pred, truth, n, frames);
    benchmark::DoNotOptimize(s.distance);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_AttentionForward<true>)->Name("attention_forward/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_AttentionForward<false>)->Name("attention_forward/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_AttentionBackward<true>)->Name("attention_backward/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_AttentionBackward<false>)->Name("attention_backward/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_GaussianNll<true>)->Name("gaussian_nll/parallel")->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_GaussianNll<false>)->Name("gaussian_nll/serial")->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_DisplacementSums<true>)->Name("displacement_sums/parallel")->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_DisplacementSums<false>)->Name("displacement_sums/serial")->Arg(1 << 10)->Arg(1 << 16);

BENCHMARK_MAIN();
