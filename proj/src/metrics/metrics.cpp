#include "cotdrive/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cotdrive/core/error.hpp"
#include "cotdrive/kernels/metrics.hpp"

namespace cotdrive::metrics {

namespace {

std::vector<double> flatten(const std::vector<Path>& paths, std::size_t frames) {
  std::vector<double> out;
  out.reserve(paths.size() * frames * 2);
  for (const auto& p : paths) {
    if (p.size() != frames) throw ArgumentError("metrics: paths have different lengths");
    for (const auto& xy : p) out.insert(out.end(), {xy[0], xy[1]});
  }
  return out;
}

void check_aligned(const std::vector<Path>& preds, const std::vector<Path>& truths) {
  if (preds.size() != truths.size()) throw ArgumentError("metrics: prediction and truth counts differ");
  if (preds.empty()) throw UndefinedMetricError("metrics: no samples");
  if (truths.front().empty()) throw UndefinedMetricError("metrics: empty paths");
}

double path_distance(const Path& a, const Path& b, std::size_t f) {
  const double dx = a[f][0] - b[f][0], dy = a[f][1] - b[f][1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double traj_nll(const forecast::GaussianParams& params, const Path& truth, kernels::NllForm form) {
  if (params.size() != truth.size())
    throw ArgumentError("traj_nll: " + std::to_string(params.size()) + " steps vs " + std::to_string(truth.size()) +
                        " truth points");
  const std::size_t n = params.size();
  std::vector<double> mx(n), my(n), sx(n), sy(n), r(n), x(n), y(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    mx[i] = params[i].mu_x;
    my[i] = params[i].mu_y;
    sx[i] = params[i].sigma_x;
    sy[i] = params[i].sigma_y;
    r[i] = params[i].rho;
    x[i] = truth[i][0];
    y[i] = truth[i][1];
  }
  kernels::bivariate_nll({mx, my, sx, sy, r, x, y}, form, out, nullptr);
  double total = 0.0;
  for (double v : out) total += v;
  return total;
}

double maneuver_ce(const forecast::ManeuverDistribution& pred, const ingest::ManeuverLabel& truth, double floor) {
  return -std::log(std::max(pred[static_cast<std::size_t>(truth.joint_index())], floor));
}

double stage2_loss(double nll, double ce, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("stage-2 loss: alpha must lie in [0, 1]");
  return alpha * nll + (1.0 - alpha) * ce;
}

std::map<int, double> rmse_by_horizon(const std::vector<Path>& preds, const std::vector<Path>& truths, double hz,
                                      const std::vector<int>& horizons, RmseConvention convention) {
  check_aligned(preds, truths);
  const std::size_t frames = truths.front().size();
  for (int h : horizons) {
    const double f = h * hz;
    if (h <= 0 || f > static_cast<double>(frames) + 1e-9 || std::abs(f - std::round(f)) > 1e-9)
      throw ArgumentError("rmse: horizon " + std::to_string(h) + " s is outside the " +
                          std::to_string(frames / hz) + " s prediction");
  }
  const auto p = flatten(preds, frames), t = flatten(truths, frames);
  const auto sums = kernels::displacement_sums(p, t, preds.size(), frames);
  const double denom = static_cast<double>(preds.size()) * (convention == RmseConvention::per_coordinate ? 2.0 : 1.0);
  std::map<int, double> out;
  for (int h : horizons) {
    const auto f = static_cast<std::size_t>(std::lround(h * hz)) - 1;
    out[h] = std::sqrt(sums.squared[f] / denom);
  }
  return out;
}

AdeFde ade_fde(const std::vector<Path>& preds, const std::vector<Path>& truths) {
  check_aligned(preds, truths);
  const std::size_t frames = truths.front().size();
  const auto p = flatten(preds, frames), t = flatten(truths, frames);
  const auto sums = kernels::displacement_sums(p, t, preds.size(), frames);
  const double n = static_cast<double>(preds.size());
  return {sums.distance / (n * static_cast<double>(frames)), sums.final_distance / n, preds.size()};
}

Weighted wsade_wsfde(const std::map<ingest::AgentClass, AdeFde>& per_class, const ClassWeights& w) {
  using ingest::AgentClass;
  for (AgentClass c : {AgentClass::vehicle, AgentClass::pedestrian, AgentClass::bicycle}) {
    auto it = per_class.find(c);
    if (it == per_class.end() || it->second.count == 0)
      throw UndefinedMetricError("wsade: class '" + std::string(ingest::to_string(c)) + "' has no samples");
  }
  const auto& v = per_class.at(AgentClass::vehicle);
  const auto& p = per_class.at(AgentClass::pedestrian);
  const auto& b = per_class.at(AgentClass::bicycle);
  return {w.vehicle * v.ade + w.pedestrian * p.ade + w.bicycle * b.ade,
          w.vehicle * v.fde + w.pedestrian * p.fde + w.bicycle * b.fde};
}

MinK min_ade_fde_mr(const std::vector<Path>& candidates, const Path& truth, double threshold,
                    MissConvention convention) {
  if (candidates.empty()) throw ArgumentError("min_ade: need at least one candidate");
  if (truth.empty()) throw UndefinedMetricError("min_ade: empty truth");
  MinK r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), true};
  for (const auto& c : candidates) {
    if (c.size() != truth.size()) throw ArgumentError("min_ade: candidate length differs from truth");
    double sum = 0.0, worst = 0.0, last = 0.0;
    for (std::size_t f = 0; f < truth.size(); ++f) {
      last = path_distance(c, truth, f);
      sum += last;
      worst = std::max(worst, last);
    }
    r.min_ade = std::min(r.min_ade, sum / static_cast<double>(truth.size()));
    r.min_fde = std::min(r.min_fde, last);
    const double d = convention == MissConvention::final_displacement ? last : worst;
    if (d <= threshold) r.miss = false;
  }
  return r;
}

}  // namespace cotdrive::metrics
