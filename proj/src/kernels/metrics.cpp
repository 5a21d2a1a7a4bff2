#include "cotdrive/kernels/metrics.hpp"

#include <cmath>

#include "cotdrive/core/error.hpp"

namespace cotdrive::kernels {

namespace {

void check(std::span<const double> pred, std::span<const double> truth, std::size_t n, std::size_t t) {
  if (pred.size() != n * t * 2 || truth.size() != n * t * 2)
    throw ShapeError("displacement: expected " + std::to_string(n * t * 2) + " values");
  if (t == 0) throw ShapeError("displacement: zero frames");
}

DisplacementSums range_sums(std::span<const double> pred, std::span<const double> truth, std::size_t begin,
                            std::size_t end, std::size_t frames) {
  DisplacementSums s;
  s.frames = frames;
  s.samples = end - begin;
  s.squared.assign(frames, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t k = (i * frames + f) * 2;
      const double dx = pred[k] - truth[k], dy = pred[k + 1] - truth[k + 1];
      const double sq = dx * dx + dy * dy;
      const double d = std::sqrt(sq);
      s.squared[f] += sq;
      s.distance += d;
      if (f + 1 == frames) s.final_distance += d;
    }
  }
  return s;
}

}  // namespace

DisplacementSums& DisplacementSums::operator+=(const DisplacementSums& o) {
  if (squared.empty()) squared.assign(o.squared.size(), 0.0);
  if (o.squared.size() != squared.size()) throw ShapeError("displacement sums: frame counts differ");
  samples += o.samples;
  frames = o.frames;
  distance += o.distance;
  final_distance += o.final_distance;
  for (std::size_t f = 0; f < squared.size(); ++f) squared[f] += o.squared[f];
  return *this;
}

DisplacementSums displacement_sums(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                                   std::size_t frames) {
  check(pred, truth, samples, frames);
  const std::size_t chunks = (samples + kMetricChunk - 1) / kMetricChunk;
  std::vector<DisplacementSums> parts(chunks);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(chunks); ++c) {
    const std::size_t b = static_cast<std::size_t>(c) * kMetricChunk;
    parts[static_cast<std::size_t>(c)] = range_sums(pred, truth, b, std::min(samples, b + kMetricChunk), frames);
  }
  DisplacementSums total;
  total.frames = frames;
  total.squared.assign(frames, 0.0);
  for (const auto& p : parts) total += p;
  return total;
}

void per_sample_displacement(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                             std::size_t frames, std::span<double> ade, std::span<double> fde) {
  check(pred, truth, samples, frames);
  if (ade.size() != samples || fde.size() != samples) throw ShapeError("displacement: output length mismatch");
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(samples); ++i) {
    double sum = 0.0, last = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t k = (static_cast<std::size_t>(i) * frames + f) * 2;
      const double dx = pred[k] - truth[k], dy = pred[k + 1] - truth[k + 1];
      last = std::sqrt(dx * dx + dy * dy);
      sum += last;
    }
    ade[static_cast<std::size_t>(i)] = sum / static_cast<double>(frames);
    fde[static_cast<std::size_t>(i)] = last;
  }
}

namespace serial {

DisplacementSums displacement_sums(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                                   std::size_t frames) {
  check(pred, truth, samples, frames);
  DisplacementSums total;
  total.frames = frames;
  total.squared.assign(frames, 0.0);
  for (std::size_t b = 0; b < samples; b += kMetricChunk)
    total += range_sums(pred, truth, b, std::min(samples, b + kMetricChunk), frames);
  return total;
}

void per_sample_displacement(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                             std::size_t frames, std::span<double> ade, std::span<double> fde) {
  check(pred, truth, samples, frames);
  if (ade.size() != samples || fde.size() != samples) throw ShapeError("displacement: output length mismatch");
  for (std::size_t i = 0; i < samples; ++i) {
    double sum = 0.0, last = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t k = (i * frames + f) * 2;
      const double dx = pred[k] - truth[k], dy = pred[k + 1] - truth[k + 1];
      last = std::sqrt(dx * dx + dy * dy);
      sum += last;
    }
    ade[i] = sum / static_cast<double>(frames);
    fde[i] = last;
  }
}

}  // namespace serial

}  // namespace cotdrive::kernels
