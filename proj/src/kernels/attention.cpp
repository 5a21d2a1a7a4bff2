#include "cotdrive/kernels/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cotdrive/core/error.hpp"

namespace cotdrive::kernels {

namespace {

using Block = Eigen::Block<const RowMatrix>;

inline bool key_visible(const AttentionLayout& layout, int key_row, int i, int j) {
  if (!layout.key_valid.empty() && !layout.key_valid[static_cast<std::size_t>(key_row)])
    return false;
  return !layout.causal || j <= i;
}

}  // namespace

AttentionLayout AttentionLayout::uniform(int groups, int q_len, int k_len, int heads) {
  AttentionLayout layout;
  layout.heads = heads;
  layout.q_offsets.resize(static_cast<std::size_t>(groups) + 1);
  layout.k_offsets.resize(static_cast<std::size_t>(groups) + 1);
  for (int g = 0; g <= groups; ++g) {
    layout.q_offsets[static_cast<std::size_t>(g)] = g * q_len;
    layout.k_offsets[static_cast<std::size_t>(g)] = g * k_len;
  }
  return layout;
}

void AttentionLayout::check(int q_rows, int k_rows) const {
  if (q_offsets.size() != k_offsets.size() || q_offsets.empty())
    throw ShapeError("attention layout: offset tables disagree");
  if (heads <= 0) throw ShapeError("attention layout: heads must be positive");
  if (q_offsets.front() != 0 || q_offsets.back() != q_rows || k_offsets.front() != 0 ||
      k_offsets.back() != k_rows)
    throw ShapeError("attention layout: offsets do not cover operands (q " +
                     std::to_string(q_rows) + ", k " + std::to_string(k_rows) + ")");
  for (std::size_t g = 1; g < q_offsets.size(); ++g) {
    if (q_offsets[g] < q_offsets[g - 1] || k_offsets[g] < k_offsets[g - 1])
      throw ShapeError("attention layout: offsets not monotone");
  }
  if (!key_valid.empty() && static_cast<int>(key_valid.size()) != k_rows)
    throw ShapeError("attention layout: key mask size mismatch");
}

std::vector<std::size_t> AttentionLayout::prob_offsets() const {
  std::vector<std::size_t> off;
  off.reserve(static_cast<std::size_t>(groups() * heads) + 1);
  std::size_t acc = 0;
  off.push_back(0);
  for (int g = 0; g < groups(); ++g) {
    const std::size_t nq = static_cast<std::size_t>(q_offsets[g + 1] - q_offsets[g]);
    const std::size_t nk = static_cast<std::size_t>(k_offsets[g + 1] - k_offsets[g]);
    for (int h = 0; h < heads; ++h) {
      acc += nq * nk;
      off.push_back(acc);
    }
  }
  return off;
}

static void check_operands(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                           const AttentionLayout& layout) {
  layout.check(static_cast<int>(q.rows()), static_cast<int>(k.rows()));
  if (q.cols() != k.cols()) throw ShapeError("attention: query/key width mismatch");
  if (v.rows() != k.rows()) throw ShapeError("attention: key/value row mismatch");
  if (q.cols() % layout.heads != 0 || v.cols() % layout.heads != 0)
    throw ShapeError("attention: width not divisible by heads");
  if (q.cols() == 0) throw ShapeError("attention: zero projection width");
}

AttentionResult attention_forward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                                  const AttentionLayout& layout) {
  check_operands(q, k, v, layout);
  const int heads = layout.heads;
  const int dh = static_cast<int>(q.cols()) / heads;
  const int dv = static_cast<int>(v.cols()) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto poff = layout.prob_offsets();

  AttentionResult res;
  res.out = RowMatrix::Zero(q.rows(), v.cols());
  res.probs.assign(poff.back(), 0.0);
  const int groups = layout.groups();

#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < groups; ++g) {
    const int q0 = layout.q_offsets[g], nq = layout.q_offsets[g + 1] - q0;
    const int k0 = layout.k_offsets[g], nk = layout.k_offsets[g + 1] - k0;
    if (nq == 0) continue;
    RowMatrix scores(nq, nk);
    for (int h = 0; h < heads; ++h) {
      double* probs = res.probs.data() + poff[static_cast<std::size_t>(g * heads + h)];
      Eigen::Map<RowMatrix> p(probs, nq, nk);
      if (nk > 0) {
        scores.noalias() =
            q.block(q0, h * dh, nq, dh) * k.block(k0, h * dh, nk, dh).transpose() * scale;
      }
      for (int i = 0; i < nq; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < nk; ++j)
          if (key_visible(layout, k0 + j, i, j)) mx = std::max(mx, scores(i, j));
        if (mx == -std::numeric_limits<double>::infinity()) {
          p.row(i).setZero();
          if (layout.self_fallback && i < nk) p(i, i) = 1.0;
          continue;
        }
        double z = 0.0;
        for (int j = 0; j < nk; ++j) {
          const double e = key_visible(layout, k0 + j, i, j) ? std::exp(scores(i, j) - mx) : 0.0;
          p(i, j) = e;
          z += e;
        }
        p.row(i) /= z;
      }
      if (nk > 0) res.out.block(q0, h * dv, nq, dv).noalias() = p * v.block(k0, h * dv, nk, dv);
    }
  }
  return res;
}

void attention_backward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                        const AttentionLayout& layout, std::span<const double> probs,
                        const RowMatrix& grad_out, RowMatrix* grad_q, RowMatrix* grad_k,
                        RowMatrix* grad_v) {
  const int heads = layout.heads;
  const int dh = static_cast<int>(q.cols()) / heads;
  const int dv = static_cast<int>(v.cols()) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto poff = layout.prob_offsets();
  if (grad_q) grad_q->setZero(q.rows(), q.cols());
  if (grad_k) grad_k->setZero(k.rows(), k.cols());
  if (grad_v) grad_v->setZero(v.rows(), v.cols());
  const int groups = layout.groups();

#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < groups; ++g) {
    const int q0 = layout.q_offsets[g], nq = layout.q_offsets[g + 1] - q0;
    const int k0 = layout.k_offsets[g], nk = layout.k_offsets[g + 1] - k0;
    if (nq == 0 || nk == 0) continue;
    for (int h = 0; h < heads; ++h) {
      Eigen::Map<const RowMatrix> p(probs.data() + poff[static_cast<std::size_t>(g * heads + h)],
                                    nq, nk);
      const auto d_out = grad_out.block(q0, h * dv, nq, dv);
      if (grad_v) grad_v->block(k0, h * dv, nk, dv).noalias() = p.transpose() * d_out;
      if (!grad_q && !grad_k) continue;
      RowMatrix dp = d_out * v.block(k0, h * dv, nk, dv).transpose();
      const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      RowMatrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
      if (grad_q) grad_q->block(q0, h * dh, nq, dh).noalias() = ds * k.block(k0, h * dh, nk, dh);
      if (grad_k)
        grad_k->block(k0, h * dh, nk, dh).noalias() = ds.transpose() * q.block(q0, h * dh, nq, dh);
    }
  }
}

namespace serial {

AttentionResult attention_forward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                                  const AttentionLayout& layout) {
  check_operands(q, k, v, layout);
  const int heads = layout.heads;
  const int dh = static_cast<int>(q.cols()) / heads;
  const int dv = static_cast<int>(v.cols()) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto poff = layout.prob_offsets();
  AttentionResult res;
  res.out = RowMatrix::Zero(q.rows(), v.cols());
  res.probs.assign(poff.back(), 0.0);
  for (int g = 0; g < layout.groups(); ++g) {
    const int q0 = layout.q_offsets[g], nq = layout.q_offsets[g + 1] - q0;
    const int k0 = layout.k_offsets[g], nk = layout.k_offsets[g + 1] - k0;
    for (int h = 0; h < heads; ++h) {
      double* p = res.probs.data() + poff[static_cast<std::size_t>(g * heads + h)];
      for (int i = 0; i < nq; ++i) {
        std::vector<double> s(static_cast<std::size_t>(nk), 0.0);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < nk; ++j) {
          double dot = 0.0;
          for (int c = 0; c < dh; ++c) dot += q(q0 + i, h * dh + c) * k(k0 + j, h * dh + c);
          s[static_cast<std::size_t>(j)] = dot * scale;
          if (key_visible(layout, k0 + j, i, j)) mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        }
        double* prow = p + static_cast<std::size_t>(i) * static_cast<std::size_t>(nk);
        if (mx == -std::numeric_limits<double>::infinity()) {
          for (int j = 0; j < nk; ++j) prow[j] = 0.0;
          if (layout.self_fallback && i < nk) prow[i] = 1.0;
        } else {
          double z = 0.0;
          for (int j = 0; j < nk; ++j) {
            prow[j] = key_visible(layout, k0 + j, i, j) ? std::exp(s[static_cast<std::size_t>(j)] - mx) : 0.0;
            z += prow[j];
          }
          for (int j = 0; j < nk; ++j) prow[j] /= z;
        }
        for (int c = 0; c < dv; ++c) {
          double acc = 0.0;
          for (int j = 0; j < nk; ++j) acc += prow[j] * v(k0 + j, h * dv + c);
          res.out(q0 + i, h * dv + c) = acc;
        }
      }
    }
  }
  return res;
}

void attention_backward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                        const AttentionLayout& layout, std::span<const double> probs,
                        const RowMatrix& grad_out, RowMatrix* grad_q, RowMatrix* grad_k,
                        RowMatrix* grad_v) {
  const int heads = layout.heads;
  const int dh = static_cast<int>(q.cols()) / heads;
  const int dv = static_cast<int>(v.cols()) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto poff = layout.prob_offsets();
  if (grad_q) grad_q->setZero(q.rows(), q.cols());
  if (grad_k) grad_k->setZero(k.rows(), k.cols());
  if (grad_v) grad_v->setZero(v.rows(), v.cols());
  for (int g = 0; g < layout.groups(); ++g) {
    const int q0 = layout.q_offsets[g], nq = layout.q_offsets[g + 1] - q0;
    const int k0 = layout.k_offsets[g], nk = layout.k_offsets[g + 1] - k0;
    for (int h = 0; h < heads; ++h) {
      const double* p = probs.data() + poff[static_cast<std::size_t>(g * heads + h)];
      for (int i = 0; i < nq; ++i) {
        const double* prow = p + static_cast<std::size_t>(i) * static_cast<std::size_t>(nk);
        std::vector<double> dp(static_cast<std::size_t>(nk), 0.0);
        double row_dot = 0.0;
        for (int j = 0; j < nk; ++j) {
          double acc = 0.0;
          for (int c = 0; c < dv; ++c) acc += grad_out(q0 + i, h * dv + c) * v(k0 + j, h * dv + c);
          dp[static_cast<std::size_t>(j)] = acc;
          row_dot += acc * prow[j];
          if (grad_v)
            for (int c = 0; c < dv; ++c)
              (*grad_v)(k0 + j, h * dv + c) += prow[j] * grad_out(q0 + i, h * dv + c);
        }
        for (int j = 0; j < nk; ++j) {
          const double ds = prow[j] * (dp[static_cast<std::size_t>(j)] - row_dot) * scale;
          if (ds == 0.0) continue;
          for (int c = 0; c < dh; ++c) {
            if (grad_q) (*grad_q)(q0 + i, h * dh + c) += ds * k(k0 + j, h * dh + c);
            if (grad_k) (*grad_k)(k0 + j, h * dh + c) += ds * q(q0 + i, h * dh + c);
          }
        }
      }
    }
  }
}

}  // namespace serial

}  // namespace cotdrive::kernels
