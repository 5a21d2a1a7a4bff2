#include "cotdrive/forecast/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cotdrive/core/error.hpp"

namespace cotdrive::forecast {

int ForecastOutput::most_likely() const {
  return static_cast<int>(std::max_element(maneuver_dist.begin(), maneuver_dist.end()) - maneuver_dist.begin());
}

std::vector<std::array<double, 2>> mean_path(const GaussianParams& params) {
  std::vector<std::array<double, 2>> out;
  out.reserve(params.size());
  for (const auto& s : params) out.push_back({s.mu_x, s.mu_y});
  return out;
}

std::vector<Candidate> select_topk(const ForecastOutput& output, int k) {
  if (k < 1 || k > ingest::kManeuverCount)
    throw ArgumentError("select_topk: k must be in [1, 9], got " + std::to_string(k));
  std::vector<int> order(ingest::kManeuverCount);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return output.maneuver_dist[a] > output.maneuver_dist[b]; });
  order.resize(static_cast<std::size_t>(k));
  double total = 0.0;
  for (int m : order) total += output.maneuver_dist[m];
  std::vector<Candidate> out;
  for (int m : order) {
    Candidate c;
    c.maneuver = m;
    c.probability = total > 0 ? output.maneuver_dist[m] / total : 1.0 / k;
    c.path = mean_path(output.per_maneuver_params[m]);
    out.push_back(std::move(c));
  }
  return out;
}

EnsembleOutput ensemble_statistics(const std::vector<ManeuverDistribution>& members, bool average, double floor) {
  if (members.empty()) throw ArgumentError("ensemble: no members");
  EnsembleOutput e;
  e.member_probs = members;
  e.effective_members = static_cast<int>(members.size());
  const double q = static_cast<double>(members.size());
  for (const auto& p : members)
    for (int m = 0; m < ingest::kManeuverCount; ++m) e.mean_probs[m] += p[m] / q;
  double h = 0.0;
  for (const auto& p : members)
    for (int m = 0; m < ingest::kManeuverCount; ++m) h -= e.mean_probs[m] * std::log(std::max(p[m], floor));
  e.avg_cross_entropy = average ? h / q : h;
  return e;
}

namespace {

nlohmann::json dist_json(const ManeuverDistribution& d) { return std::vector<double>(d.begin(), d.end()); }

ManeuverDistribution dist_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != ingest::kManeuverCount) throw SchemaError("forecast: distribution must have 9 entries");
  ManeuverDistribution d{};
  std::copy(v.begin(), v.end(), d.begin());
  return d;
}

}  // namespace

nlohmann::json forecast_to_json(const ForecastOutput& out) {
  nlohmann::json params = nlohmann::json::array();
  for (int m = 0; m < ingest::kManeuverCount; ++m) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : out.per_maneuver_params[m]) steps.push_back({s.mu_x, s.mu_y, s.sigma_x, s.sigma_y, s.rho});
    params.push_back({{"maneuver", ingest::maneuver_name(m)}, {"steps", std::move(steps)}});
  }
  nlohmann::json members = nlohmann::json::array();
  for (const auto& p : out.ensemble.member_probs) members.push_back(dist_json(p));
  return {{"scene_ref", out.scene_ref},
          {"maneuver_dist", dist_json(out.maneuver_dist)},
          {"most_likely", ingest::maneuver_name(out.most_likely())},
          {"params", std::move(params)},
          {"ensemble",
           {{"member_probs", std::move(members)},
            {"mean_probs", dist_json(out.ensemble.mean_probs)},
            {"avg_cross_entropy", out.ensemble.avg_cross_entropy},
            {"effective_members", out.ensemble.effective_members}}},
          {"warnings", out.warnings}};
}

ForecastOutput forecast_from_json(const nlohmann::json& j) {
  try {
    ForecastOutput o;
    o.scene_ref = j.at("scene_ref").get<std::string>();
    o.maneuver_dist = dist_from(j.at("maneuver_dist"));
    const auto& params = j.at("params");
    if (params.size() != ingest::kManeuverCount) throw SchemaError("forecast: expected 9 parameter sequences");
    for (int m = 0; m < ingest::kManeuverCount; ++m)
      for (const auto& s : params[static_cast<std::size_t>(m)].at("steps")) {
        const auto v = s.get<std::vector<double>>();
        if (v.size() != 5) throw SchemaError("forecast: step needs 5 values");
        o.per_maneuver_params[m].push_back({v[0], v[1], v[2], v[3], v[4]});
      }
    const auto& e = j.at("ensemble");
    for (const auto& p : e.at("member_probs")) o.ensemble.member_probs.push_back(dist_from(p));
    o.ensemble.mean_probs = dist_from(e.at("mean_probs"));
    o.ensemble.avg_cross_entropy = e.at("avg_cross_entropy").get<double>();
    o.ensemble.effective_members = e.at("effective_members").get<int>();
    o.warnings = j.value("warnings", std::vector<std::string>{});
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("forecast: ") + e.what());
  }
}

}  // namespace cotdrive::forecast
