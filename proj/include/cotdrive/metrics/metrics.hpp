#pragma once

#include <array>
#include <map>
#include <vector>

#include "cotdrive/forecast/types.hpp"
#include "cotdrive/ingest/types.hpp"
#include "cotdrive/kernels/gaussian.hpp"

namespace cotdrive::metrics {

using Path = std::vector<std::array<double, 2>>;

/// Negative log-likelihood of `truth` under a Gaussian sequence, summed over steps.
double traj_nll(const forecast::GaussianParams& params, const Path& truth,
                kernels::NllForm form = kernels::NllForm::standard);

/// -log pred[truth], floored.
double maneuver_ce(const forecast::ManeuverDistribution& pred, const ingest::ManeuverLabel& truth,
                   double floor = 1e-12);

/// alpha * nll + (1 - alpha) * ce; alpha outside [0, 1] is a ConfigError.
double stage2_loss(double nll, double ce, double alpha);

enum class RmseConvention {
  /// sqrt(mean over samples and both coordinates of the squared error).
  per_coordinate,
  /// sqrt(mean over samples of the squared Euclidean error).
  euclidean,
};

/// RMSE at each whole-second horizon 1..max, keyed by seconds. `horizons`
/// beyond the predicted length throw ArgumentError.
std::map<int, double> rmse_by_horizon(const std::vector<Path>& preds, const std::vector<Path>& truths, double hz,
                                      const std::vector<int>& horizons,
                                      RmseConvention convention = RmseConvention::per_coordinate);

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
  std::size_t count = 0;
};

/// Pooled ADE/FDE. Empty input is an UndefinedMetricError.
AdeFde ade_fde(const std::vector<Path>& preds, const std::vector<Path>& truths);

struct ClassWeights {
  double vehicle = 0.20;
  double pedestrian = 0.58;
  double bicycle = 0.22;
};

struct Weighted {
  double wsade = 0.0;
  double wsfde = 0.0;
};

/// Class-weighted ADE/FDE; every class must be present.
Weighted wsade_wsfde(const std::map<ingest::AgentClass, AdeFde>& per_class, const ClassWeights& weights = {});

enum class MissConvention {
  /// Miss when every candidate's final displacement exceeds the threshold.
  final_displacement,
  /// Miss when every candidate strays beyond the threshold at some frame.
  max_over_frames,
};

struct MinK {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
};

MinK min_ade_fde_mr(const std::vector<Path>& candidates, const Path& truth, double threshold = 2.0,
                    MissConvention convention = MissConvention::final_displacement);

}  // namespace cotdrive::metrics
