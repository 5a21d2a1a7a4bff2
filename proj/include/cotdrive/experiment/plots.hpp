#pragma once

#include <map>
#include <string>
#include <vector>

#include "cotdrive/forecast/types.hpp"
#include "cotdrive/metrics/metrics.hpp"

namespace cotdrive::experiment {

/// Static SVG figures. Output depends only on the inputs.

/// Observed history, ground truth and every maneuver's mean path; line
/// opacity follows the maneuver probability.
std::string plot_paths(const std::string& title, const metrics::Path& history, const metrics::Path& truth,
                       const forecast::ForecastOutput& output);

/// Probability bar per maneuver.
std::string plot_probabilities(const std::string& title, const forecast::ManeuverDistribution& probs);

struct Series {
  std::string name;
  std::map<int, double> points;
};

/// Line chart of values by horizon in seconds.
std::string plot_curves(const std::string& title, const std::string& y_label, const std::vector<Series>& series);

}  // namespace cotdrive::experiment
