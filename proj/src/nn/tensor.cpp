#include "cotdrive/nn/tensor.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "cotdrive/core/error.hpp"

namespace cotdrive::nn {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
}

/// Builds the result node; records inputs and the backward closure only when
/// some input needs a gradient and recording is enabled.
Var make(Matrix value, std::initializer_list<Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Var::from_node(std::move(node));
}

Var make_n(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Var::from_node(std::move(node));
}

inline Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace

Matrix& Node::grad_buffer() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols())
    grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("scalar(): not 1x1 but " + shape_str(value()));
  return value()(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward: root must be 1x1");
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Var constant(Matrix value) { return Var(std::move(value), false); }

Var scalar_constant(double value) { return Var(Matrix::Constant(1, 1, value), false); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  Matrix out = a.value() * b.value();
  return make(std::move(out), {a, b}, [](Node& self) {
    Node& A = in(self, 0);
    Node& B = in(self, 1);
    if (A.requires_grad) A.grad_buffer().noalias() += self.grad * B.value.transpose();
    if (B.requires_grad) B.grad_buffer().noalias() += A.value.transpose() * self.grad;
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols())
    throw ShapeError("linear: x " + shape_str(x.value()) + ", W " + shape_str(weight.value()) +
                     ", b " + shape_str(bias.value()));
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return make(std::move(out), {x, weight, bias}, [](Node& self) {
    Node& X = in(self, 0);
    Node& W = in(self, 1);
    Node& B = in(self, 2);
    if (X.requires_grad) X.grad_buffer().noalias() += self.grad * W.value.transpose();
    if (W.requires_grad) W.grad_buffer().noalias() += X.value.transpose() * self.grad;
    if (B.requires_grad) B.grad_buffer().row(0) += self.grad.colwise().sum();
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (in(self, i).requires_grad) in(self, i).grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& self) {
    if (in(self, 0).requires_grad) in(self, 0).grad_buffer() += self.grad;
    if (in(self, 1).requires_grad) in(self, 1).grad_buffer() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return make(std::move(out), {a, b}, [](Node& self) {
    Node& A = in(self, 0);
    Node& B = in(self, 1);
    if (A.requires_grad) A.grad_buffer() += self.grad.cwiseProduct(B.value);
    if (B.requires_grad) B.grad_buffer() += self.grad.cwiseProduct(A.value);
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& self) { in(self, 0).grad_buffer() += self.grad * s; });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return make(std::move(out), {a}, [](Node& self) { in(self, 0).grad_buffer() += self.grad; });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bad row shape");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& self) {
    if (in(self, 0).requires_grad) in(self, 0).grad_buffer() += self.grad;
    if (in(self, 1).requires_grad) in(self, 1).grad_buffer().row(0) += self.grad.colwise().sum();
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: bad column shape");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a, col}, [](Node& self) {
    Node& A = in(self, 0);
    Node& C = in(self, 1);
    if (A.requires_grad)
      A.grad_buffer().array() += self.grad.array().colwise() * C.value.col(0).array();
    if (C.requires_grad)
      C.grad_buffer().col(0) += self.grad.cwiseProduct(A.value).rowwise().sum();
  });
}

Var elu(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix& x = in(self, 0).value;
    in(self, 0).grad_buffer().array() +=
        self.grad.array() * x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).array();
  });
}

Var gelu(const Var& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  Matrix out = a.value().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x))); });
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix& x = in(self, 0).value;
    Matrix d = x.unaryExpr([](double v) {
      const double t = std::tanh(c * (v + 0.044715 * v * v * v));
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * v * v);
    });
    in(self, 0).grad_buffer().array() += self.grad.array() * d.array();
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  return make(std::move(out), {a}, [](Node& self) {
    in(self, 0).grad_buffer().array() += self.grad.array() * (1.0 - self.value.array().square());
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return make(std::move(out), {a}, [](Node& self) {
    in(self, 0).grad_buffer().array() +=
        self.grad.array() * self.value.array() * (1.0 - self.value.array());
  });
}

Var softplus(const Var& a) {
  Matrix out = a.value().unaryExpr(
      [](double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); });
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix& x = in(self, 0).value;
    Matrix d = x.unaryExpr([](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    in(self, 0).grad_buffer().array() += self.grad.array() * d.array();
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make(std::move(out), {a}, [](Node& self) {
    in(self, 0).grad_buffer().array() += self.grad.array() * self.value.array();
  });
}

Var log_floor(const Var& a, double floor) {
  Matrix out = a.value().unaryExpr([floor](double x) { return std::log(std::max(x, floor)); });
  return make(std::move(out), {a}, [floor](Node& self) {
    const Matrix& x = in(self, 0).value;
    Matrix d = x.unaryExpr([floor](double v) { return v > floor ? 1.0 / v : 0.0; });
    in(self, 0).grad_buffer().array() += self.grad.array() * d.array();
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> starts;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    starts.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_n(std::move(out), parts, [starts](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = in(self, i);
      if (p.requires_grad) p.grad_buffer() += self.grad.middleCols(starts[i], p.value.cols());
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> starts;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    starts.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_n(std::move(out), parts, [starts](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = in(self, i);
      if (p.requires_grad) p.grad_buffer() += self.grad.middleRows(starts[i], p.value.rows());
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return make(std::move(out), {a}, [start, count](Node& self) {
    in(self, 0).grad_buffer().middleCols(start, count) += self.grad;
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Matrix out = a.value().middleRows(start, count);
  return make(std::move(out), {a}, [start, count](Node& self) {
    in(self, 0).grad_buffer().middleRows(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int r = index[i];
    if (r >= a.rows()) throw ShapeError("gather_rows: index out of range");
    if (r < 0)
      out.row(static_cast<Eigen::Index>(i)).setZero();
    else
      out.row(static_cast<Eigen::Index>(i)) = a.value().row(r);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] >= 0) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var pick(const Var& a, std::span<const int> index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ShapeError("pick: one index per row");
  Matrix out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const int c = index[static_cast<std::size_t>(i)];
    if (c < 0 || c >= a.cols()) throw ShapeError("pick: column out of range");
    out(i, 0) = a.value()(i, c);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      g(static_cast<Eigen::Index>(i), idx[i]) += self.grad(static_cast<Eigen::Index>(i), 0);
  });
}

Var sum(const Var& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& self) {
    in(self, 0).grad_buffer().array() += self.grad(0, 0);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty operand");
  return make(Matrix::Constant(1, 1, a.value().sum() / n), {a}, [n](Node& self) {
    in(self, 0).grad_buffer().array() += self.grad(0, 0) / n;
  });
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  return make(std::move(out), {a}, [](Node& self) {
    in(self, 0).grad_buffer().colwise() += self.grad.col(0);
  });
}

Var segment_mean(const Var& a, std::span<const int> offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != a.rows())
    throw ShapeError("segment_mean: offsets do not cover rows");
  const Eigen::Index groups = static_cast<Eigen::Index>(offsets.size()) - 1;
  Matrix out = Matrix::Zero(groups, a.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    const int b = offsets[static_cast<std::size_t>(g)], e = offsets[static_cast<std::size_t>(g) + 1];
    if (e <= b) throw ShapeError("segment_mean: empty segment");
    out.row(g) = a.value().middleRows(b, e - b).colwise().sum() / static_cast<double>(e - b);
  }
  std::vector<int> off(offsets.begin(), offsets.end());
  return make(std::move(out), {a}, [off = std::move(off)](Node& self) {
    Matrix& g = in(self, 0).grad_buffer();
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
      for (int r = off[s]; r < off[s + 1]; ++r)
        g.row(r) += self.grad.row(static_cast<Eigen::Index>(s)) * inv;
    }
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix& y = self.value;
    const Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    in(self, 0).grad_buffer().array() += y.array() * (self.grad.colwise() - dot).array();
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    const double lse = mx + std::log((out.row(i).array() - mx).exp().sum());
    out.row(i).array() -= lse;
  }
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix p = self.value.array().exp();
    const Eigen::VectorXd gsum = self.grad.rowwise().sum();
    in(self, 0).grad_buffer() += self.grad - (p.array().colwise() * gsum.array()).matrix();
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
    throw ShapeError("layer_norm: affine parameters must be 1 x width");
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make(std::move(out), {x, gamma, beta},
              [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                Node& X = in(self, 0);
                Node& G = in(self, 1);
                Node& B = in(self, 2);
                if (G.requires_grad) G.grad_buffer().row(0) += self.grad.cwiseProduct(xhat).colwise().sum();
                if (B.requires_grad) B.grad_buffer().row(0) += self.grad.colwise().sum();
                if (X.requires_grad) {
                  const Matrix dxhat = self.grad.array().rowwise() * G.value.row(0).array();
                  Matrix& gx = X.grad_buffer();
                  for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                    const double m1 = dxhat.row(i).mean();
                    const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                    gx.row(i).array() +=
                        inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                  }
                }
              });
}

Var attention(const Var& q, const Var& k, const Var& v,
              std::shared_ptr<const kernels::AttentionLayout> layout) {
  auto res = kernels::attention_forward(q.value(), k.value(), v.value(), *layout);
  auto probs = std::make_shared<std::vector<double>>(std::move(res.probs));
  return make(std::move(res.out), {q, k, v}, [layout, probs](Node& self) {
    Node& Q = in(self, 0);
    Node& K = in(self, 1);
    Node& V = in(self, 2);
    Matrix gq, gk, gv;
    kernels::attention_backward(Q.value, K.value, V.value, *layout, *probs, self.grad,
                                Q.requires_grad ? &gq : nullptr, K.requires_grad ? &gk : nullptr,
                                V.requires_grad ? &gv : nullptr);
    if (Q.requires_grad) Q.grad_buffer() += gq;
    if (K.requires_grad) K.grad_buffer() += gk;
    if (V.requires_grad) V.grad_buffer() += gv;
  });
}

Var time_mix(const Var& x, const Var& weight, const Var& bias, int in_len) {
  const Eigen::Index out_len = weight.rows();
  if (weight.cols() != in_len || bias.rows() != out_len || bias.cols() != 1 || in_len <= 0 ||
      x.rows() % in_len != 0)
    throw ShapeError("time_mix: bad shapes");
  const Eigen::Index groups = x.rows() / in_len;
  Matrix out(groups * out_len, x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.middleRows(g * out_len, out_len).noalias() = weight.value() * x.value().middleRows(g * in_len, in_len);
    out.middleRows(g * out_len, out_len).colwise() += bias.value().col(0);
  }
  return make(std::move(out), {x, weight, bias}, [in_len, out_len, groups](Node& self) {
    Node& X = in(self, 0);
    Node& W = in(self, 1);
    Node& B = in(self, 2);
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto dy = self.grad.middleRows(g * out_len, out_len);
      if (X.requires_grad) X.grad_buffer().middleRows(g * in_len, in_len).noalias() += W.value.transpose() * dy;
      if (W.requires_grad)
        W.grad_buffer().noalias() += dy * X.value.middleRows(g * in_len, in_len).transpose();
      if (B.requires_grad) B.grad_buffer().col(0) += dy.rowwise().sum();
    }
  });
}

Var bivariate_nll(const Var& params, const Matrix& truth, kernels::NllForm form) {
  if (params.cols() != 5 || truth.cols() != 2 || truth.rows() != params.rows())
    throw ShapeError("bivariate_nll: params must be N x 5 and truth N x 2");
  const Eigen::Index n = params.rows();
  // Column-major copy gives contiguous spans per parameter.
  const Eigen::MatrixXd p = params.value();
  const Eigen::MatrixXd t = truth;
  Eigen::MatrixXd grads(n, 5);
  Matrix out(n, 1);
  auto col = [n](const Eigen::MatrixXd& m, int c) {
    return std::span<const double>(m.data() + c * n, static_cast<std::size_t>(n));
  };
  auto gcol = [n, &grads](int c) { return std::span<double>(grads.data() + c * n, static_cast<std::size_t>(n)); };
  kernels::GaussianBatch batch{col(p, 0), col(p, 1), col(p, 2), col(p, 3), col(p, 4), col(t, 0), col(t, 1)};
  kernels::GaussianGrads g{gcol(0), gcol(1), gcol(2), gcol(3), gcol(4)};
  std::vector<double> nll(static_cast<std::size_t>(n));
  kernels::bivariate_nll(batch, form, nll, &g);
  for (Eigen::Index i = 0; i < n; ++i) out(i, 0) = nll[static_cast<std::size_t>(i)];
  Matrix dparams = grads;
  return make(std::move(out), {params}, [dparams = std::move(dparams)](Node& self) {
    in(self, 0).grad_buffer().array() += dparams.array().colwise() * self.grad.col(0).array();
  });
}

Var token_nll(const Var& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw ShapeError("token_nll: one target per row");
  const Eigen::Index n = logits.rows();
  Matrix out(n, 1);
  Matrix probs(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw ShapeError("token_nll: target out of vocabulary");
    const auto row = logits.value().row(i);
    const double mx = row.maxCoeff();
    probs.row(i) = (row.array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    out(i, 0) = mx + std::log(z) - row(t);
  }
  std::vector<int> tg(targets.begin(), targets.end());
  return make(std::move(out), {logits}, [probs = std::move(probs), tg = std::move(tg)](Node& self) {
    Matrix& g = in(self, 0).grad_buffer();
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const double w = self.grad(i, 0);
      if (w == 0.0) continue;
      g.row(i) += w * probs.row(i);
      g(i, tg[static_cast<std::size_t>(i)]) -= w;
    }
  });
}

}  // namespace cotdrive::nn
