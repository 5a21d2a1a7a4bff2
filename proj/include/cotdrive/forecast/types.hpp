#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotdrive/ingest/types.hpp"

namespace cotdrive::forecast {

using ManeuverDistribution = std::array<double, ingest::kManeuverCount>;

/// One future step of a bivariate Gaussian, in meters in the target frame.
struct GaussianStep {
  double mu_x = 0.0, mu_y = 0.0;
  double sigma_x = 1.0, sigma_y = 1.0;
  double rho = 0.0;

  bool operator==(const GaussianStep&) const = default;
};

using GaussianParams = std::vector<GaussianStep>;

struct EnsembleOutput {
  std::vector<ManeuverDistribution> member_probs;
  ManeuverDistribution mean_probs{};
  /// Average cross-entropy of the mean distribution against each member.
  double avg_cross_entropy = 0.0;
  /// Members whose logits were finite and therefore took part.
  int effective_members = 0;

  bool operator==(const EnsembleOutput&) const = default;
};

struct ForecastOutput {
  std::string scene_ref;
  ManeuverDistribution maneuver_dist{};
  std::array<GaussianParams, ingest::kManeuverCount> per_maneuver_params;
  EnsembleOutput ensemble;
  std::vector<std::string> warnings;

  int most_likely() const;
  bool operator==(const ForecastOutput&) const = default;
};

struct Candidate {
  int maneuver = 0;
  double probability = 0.0;
  /// Mean path, one (x, y) per future step.
  std::vector<std::array<double, 2>> path;
};

/// The k most probable maneuvers (ties to the lower joint index) with their
/// mean paths; probabilities renormalized over the chosen set.
std::vector<Candidate> select_topk(const ForecastOutput& output, int k);

/// Mean path of one maneuver.
std::vector<std::array<double, 2>> mean_path(const GaussianParams& params);

/// Ensemble statistics from member distributions. With `average` false the
/// cross-entropy sum is not divided by the member count.
EnsembleOutput ensemble_statistics(const std::vector<ManeuverDistribution>& members, bool average = true,
                                   double floor = 1e-12);

nlohmann::json forecast_to_json(const ForecastOutput& out);
ForecastOutput forecast_from_json(const nlohmann::json& j);

}  // namespace cotdrive::forecast
