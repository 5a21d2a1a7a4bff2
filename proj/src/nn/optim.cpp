#include "cotdrive/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "cotdrive/core/error.hpp"

namespace cotdrive::nn {

Adam::Adam(const ParameterStore& store, AdamOptions options) : store_(&store), options_(options) {
  for (const auto& [name, var] : store.entries()) {
    m_.push_back(Matrix::Zero(var.rows(), var.cols()));
    v_.push_back(Matrix::Zero(var.rows(), var.cols()));
  }
}

void Adam::step(double lr) {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const auto& entries = store_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].second;
    const Matrix& g = p.grad();
    if (g.size() == 0) continue;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    if (options_.weight_decay > 0.0) w *= (1.0 - lr * options_.weight_decay);
    w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

std::vector<std::pair<std::string, Matrix>> Adam::state() const {
  std::vector<std::pair<std::string, Matrix>> out;
  const auto& entries = store_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.emplace_back("m/" + entries[i].first, m_[i]);
    out.emplace_back("v/" + entries[i].first, v_[i]);
  }
  return out;
}

void Adam::load_state(const std::vector<std::pair<std::string, Matrix>>& state, long steps) {
  const auto& entries = store_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    bool got_m = false, got_v = false;
    for (const auto& [name, m] : state) {
      if (name == "m/" + entries[i].first) {
        m_[i] = m;
        got_m = true;
      } else if (name == "v/" + entries[i].first) {
        v_[i] = m;
        got_v = true;
      }
    }
    if (!got_m || !got_v) throw SchemaError("optimizer state missing for " + entries[i].first);
    if (m_[i].rows() != entries[i].second.rows() || m_[i].cols() != entries[i].second.cols())
      throw SchemaError("optimizer state shape mismatch for " + entries[i].first);
  }
  steps_ = steps;
}

double grad_norm(const ParameterStore& store) {
  double sq = 0.0;
  for (const auto& e : store.entries())
    if (e.second.grad().size() > 0) sq += e.second.grad().squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(const ParameterStore& store, double max_norm) {
  const double norm = grad_norm(store);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& e : store.entries()) {
      auto node = e.second.node();
      if (node->grad.size() > 0) node->grad *= s;
    }
  }
  return norm;
}

double CosineWarmRestarts::rate(long step) const {
  const long p = period > 0 ? period : 1;
  const double t = static_cast<double>(step % p) / static_cast<double>(p);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace cotdrive::nn
