#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cotdrive::kernels {

/// Sums behind displacement metrics over N samples of T frames. Inputs are
/// flat (N, T, 2) arrays.
struct DisplacementSums {
  std::size_t samples = 0;
  std::size_t frames = 0;
  /// Sum of Euclidean distances over all samples and frames.
  double distance = 0.0;
  /// Sum of final-frame distances.
  double final_distance = 0.0;
  /// Per frame: sum over samples of dx^2 + dy^2.
  std::vector<double> squared;

  DisplacementSums& operator+=(const DisplacementSums& other);
};

/// Samples are summed in fixed chunks, then the chunks in order, so the
/// result does not depend on the thread count.
DisplacementSums displacement_sums(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                                   std::size_t frames);

/// Per sample: mean distance over frames (ADE) and final distance (FDE).
void per_sample_displacement(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                             std::size_t frames, std::span<double> ade, std::span<double> fde);

inline constexpr std::size_t kMetricChunk = 256;

namespace serial {
DisplacementSums displacement_sums(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                                   std::size_t frames);
void per_sample_displacement(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                             std::size_t frames, std::span<double> ade, std::span<double> fde);
}  // namespace serial

}  // namespace cotdrive::kernels
