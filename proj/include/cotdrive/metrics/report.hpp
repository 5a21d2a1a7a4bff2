#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cotdrive/forecast/features.hpp"
#include "cotdrive/forecast/model.hpp"
#include "cotdrive/metrics/metrics.hpp"

namespace cotdrive::metrics {

/// What the report needs from one evaluated window.
struct SamplePrediction {
  std::string scene_ref;
  ingest::AgentClass agent_class = ingest::AgentClass::vehicle;
  /// Candidate mean paths by decreasing probability; the first is the point forecast.
  std::vector<Path> ranked;
  Path truth;
  int predicted_maneuver = -1;
  int true_maneuver = -1;
};

struct MetricConfig {
  double hz = 5.0;
  std::vector<int> horizons = {1, 2, 3, 4, 5};
  std::vector<int> ks = {1, 3, 5};
  double miss_threshold = 2.0;
  RmseConvention rmse = RmseConvention::per_coordinate;
  MissConvention miss = MissConvention::final_displacement;
  ClassWeights weights;
};

struct MinKSummary {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
};

struct TextScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  std::size_t samples = 0;
  std::map<int, double> rmse;
  double ade = 0.0;
  double fde = 0.0;
  std::map<ingest::AgentClass, AdeFde> per_class;
  /// Only when all three classes are present.
  std::optional<Weighted> weighted;
  std::map<int, MinKSummary> min_k;
  std::optional<double> maneuver_accuracy;
  std::optional<TextScores> text;

  /// Stable key/value pairs, e.g. ("rmse.3s", ...), ("min_ade.k5", ...).
  std::vector<std::pair<std::string, double>> entries() const;
  /// One "key value" line per entry with round-trip number formatting.
  std::string render_kv() const;
  /// Human-readable table.
  std::string render_table() const;
};

MetricReport compute_report(const std::vector<SamplePrediction>& samples, const MetricConfig& config = {});

std::vector<SamplePrediction> to_samples(const std::vector<forecast::ForecastOutput>& outputs,
                                         const std::vector<forecast::EncodedWindow>& windows);

MetricReport evaluate_dataset(const forecast::ForecastNet& net, const std::vector<forecast::EncodedWindow>& windows,
                              const MetricConfig& config = {}, int batch_size = 64);

enum class Baseline { constant_position, constant_velocity };

/// Closed-form single-candidate predictions in the target frame.
std::vector<SamplePrediction> baseline_samples(const std::vector<forecast::EncodedWindow>& windows, Baseline baseline);

}  // namespace cotdrive::metrics
