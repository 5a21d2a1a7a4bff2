#include "cotdrive/nn/layers.hpp"

#include <cmath>

#include "cotdrive/core/error.hpp"

namespace cotdrive::nn {

Var ParameterStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  Var v(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

const Var& ParameterStore::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw ConfigError("unknown parameter: " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) {
    Var v = e.second;
    v.zero_grad();
  }
}

void ParameterStore::load(const std::vector<std::pair<std::string, Matrix>>& values) {
  for (auto& [name, var] : entries_) {
    const Matrix* found = nullptr;
    for (const auto& [n, m] : values)
      if (n == name) found = &m;
    if (!found) throw SchemaError("checkpoint is missing parameter " + name);
    if (found->rows() != var.rows() || found->cols() != var.cols())
      throw SchemaError("checkpoint parameter " + name + " has the wrong shape");
    Var handle = var;
    handle.mutable_value() = *found;
  }
}

std::vector<std::pair<std::string, Matrix>> ParameterStore::values() const {
  std::vector<std::pair<std::string, Matrix>> out;
  out.reserve(entries_.size());
  for (const auto& [name, var] : entries_) out.emplace_back(name, var.value());
  return out;
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
               double gain)
    : weight_(store.add(name + ".weight", xavier_uniform(in, out, rng, gain))),
      bias_(store.add(name + ".bias", Matrix::Zero(1, out))) {}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int width)
    : gamma_(store.add(name + ".gamma", Matrix::Ones(1, width))),
      beta_(store.add(name + ".beta", Matrix::Zero(1, width))) {}

Lstm::Lstm(ParameterStore& store, const std::string& name, int in, int hidden, Rng& rng)
    : hidden_(hidden) {
  w_in_ = store.add(name + ".w_in", xavier_uniform(in, 4 * hidden, rng));
  w_hh_ = store.add(name + ".w_hh", xavier_uniform(hidden, 4 * hidden, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget gate
  bias_ = store.add(name + ".bias", std::move(b));
}

std::vector<Var> Lstm::run(const std::vector<Var>& inputs) const { return run(inputs, Var()); }

std::vector<Var> Lstm::run(const std::vector<Var>& inputs, const Var& constant_gates) const {
  if (inputs.empty()) throw ShapeError("lstm: empty sequence");
  const Eigen::Index batch = inputs[0].rows();
  const int h = hidden_;
  // One projection for all steps, then per-step slices.
  Var stacked = concat_rows(inputs);
  Var projected = linear(stacked, w_in_, bias_);
  Var hprev = constant(Matrix::Zero(batch, h));
  Var cprev = constant(Matrix::Zero(batch, h));
  std::vector<Var> outputs;
  outputs.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Var gates = add(slice_rows(projected, static_cast<Eigen::Index>(t) * batch, batch),
                    matmul(hprev, w_hh_));
    if (constant_gates.defined()) gates = add(gates, constant_gates);
    Var i = sigmoid(slice_cols(gates, 0, h));
    Var f = sigmoid(slice_cols(gates, h, h));
    Var g = tanh(slice_cols(gates, 2 * h, h));
    Var o = sigmoid(slice_cols(gates, 3 * h, h));
    cprev = add(mul(f, cprev), mul(i, g));
    hprev = mul(o, tanh(cprev));
    outputs.push_back(hprev);
  }
  return outputs;
}

SelfAttention::SelfAttention(ParameterStore& store, const std::string& name, int width,
                             int heads, Rng& rng)
    : qkv_(store, name + ".qkv", width, 3 * width, rng),
      out_(store, name + ".out", width, width, rng),
      width_(width),
      heads_(heads) {
  if (heads <= 0 || width % heads != 0)
    throw ConfigError("attention width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
}

Var SelfAttention::operator()(const Var& x,
                              std::shared_ptr<const kernels::AttentionLayout> layout) const {
  Var qkv = qkv_(x);
  Var q = slice_cols(qkv, 0, width_);
  Var k = slice_cols(qkv, width_, width_);
  Var v = slice_cols(qkv, 2 * width_, width_);
  return out_(attention(q, k, v, std::move(layout)));
}

Embedding::Embedding(ParameterStore& store, const std::string& name, int count, int width,
                     Rng& rng, double stddev) {
  Matrix m(count, width);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal(0.0, stddev);
  table_ = store.add(name + ".table", std::move(m));
}

}  // namespace cotdrive::nn
