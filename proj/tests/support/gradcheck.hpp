#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cotdrive/core/rng.hpp"
#include "cotdrive/nn/tensor.hpp"

namespace cotdrive::testutil {

struct GradCheckResult {
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double rel_error = 0.0;
  double max_abs_diff = 0.0;
  std::size_t count = 0;
};

struct Coordinate {
  nn::Var var;
  Eigen::Index flat;
};

/// Central differences of `loss` over the given coordinates against the
/// gradients produced by nn::backward.
inline GradCheckResult grad_check(const std::function<nn::Var()>& loss,
                                  const std::vector<Coordinate>& coords, double h = 1e-6) {
  for (const auto& c : coords) {
    nn::Var v = c.var;
    v.zero_grad();
  }
  nn::Var out = loss();
  nn::backward(out);
  std::vector<double> analytic;
  for (const auto& c : coords) {
    const auto& g = c.var.grad();
    analytic.push_back(g.size() ? g.data()[c.flat] : 0.0);
  }
  double num2 = 0, ana2 = 0, diff2 = 0, maxabs = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    nn::Var v = coords[i].var;
    double& x = v.mutable_value().data()[coords[i].flat];
    const double orig = x;
    double fp, fm;
    {
      nn::NoGradGuard ng;
      x = orig + h;
      fp = loss().scalar();
      x = orig - h;
      fm = loss().scalar();
    }
    x = orig;
    const double numeric = (fp - fm) / (2 * h);
    num2 += numeric * numeric;
    ana2 += analytic[i] * analytic[i];
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    maxabs = std::max(maxabs, std::abs(numeric - analytic[i]));
  }
  GradCheckResult r;
  const double denom = std::max(std::sqrt(num2), std::sqrt(ana2));
  r.rel_error = denom > 0 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
  r.max_abs_diff = maxabs;
  r.count = coords.size();
  return r;
}

/// Every coordinate of every var.
inline std::vector<Coordinate> all_coordinates(const std::vector<nn::Var>& vars) {
  std::vector<Coordinate> out;
  for (const auto& v : vars)
    for (Eigen::Index i = 0; i < v.value().size(); ++i) out.push_back({v, i});
  return out;
}

/// `count` coordinates drawn uniformly without replacement across `vars`.
inline std::vector<Coordinate> sample_coordinates(const std::vector<nn::Var>& vars,
                                                  std::size_t count, Rng& rng) {
  auto all = all_coordinates(vars);
  rng.shuffle(all);
  if (all.size() > count) all.resize(count);
  return all;
}

inline nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

}  // namespace cotdrive::testutil
