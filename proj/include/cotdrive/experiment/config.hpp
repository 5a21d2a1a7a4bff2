#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotdrive/annotate/teacher.hpp"
#include "cotdrive/forecast/model.hpp"
#include "cotdrive/forecast/train.hpp"
#include "cotdrive/ingest/synthetic.hpp"
#include "cotdrive/ingest/windows.hpp"
#include "cotdrive/metrics/report.hpp"
#include "cotdrive/student/model.hpp"
#include "cotdrive/student/train.hpp"

namespace cotdrive::experiment {

struct DataSection {
  /// "synthetic" reads the run's own synth output; "file" reads `path`.
  std::string source = "synthetic";
  std::string path;
  std::string format = "csv";
  double native_hz = 5.0;
  bool operator==(const DataSection&) const = default;
};

struct AnnotateSection {
  /// mock | live | student
  std::string source = "mock";
  int parallelism = 4;
  std::string student_checkpoint;
  int max_new_tokens = 400;
  /// Windows annotated between corpus flushes.
  int flush_every = 64;
  bool operator==(const AnnotateSection&) const = default;
};

struct DistillSection {
  int vocab_size = 1024;
  /// Upper bound on training pairs; 0 uses the whole training split.
  int max_pairs = 256;
  /// Held-out pairs scored with BERT-score after training.
  int eval_pairs = 32;
  bool operator==(const DistillSection&) const = default;
};

struct EvalSection {
  std::vector<int> horizons = {1, 2, 3, 4, 5};
  std::vector<int> ks = {1, 3, 5};
  double miss_threshold = 2.0;
  std::string rmse_convention = "per_coordinate";
  std::string miss_convention = "final_displacement";
  /// Test windows rendered as trajectory and probability plots.
  int plot_samples = 3;
  bool operator==(const EvalSection&) const = default;
};

struct ExperimentConfig {
  DataSection data;
  ingest::SynthOptions synth;
  ingest::SegmentOptions segment;
  ingest::SplitRatios split;
  AnnotateSection annotate;
  annotate::TeacherConfig teacher;
  student::StudentSpec student;
  student::StudentTrainConfig student_train;
  DistillSection distill;
  /// hashed | student
  std::string text_encoder = "hashed";
  forecast::ForecastConfig model;
  forecast::ForecastTrainConfig train;
  EvalSection eval;
  std::uint64_t seed = 0;
  std::string out = "runs/default";

  ExperimentConfig();

  /// Throws ConfigError on an out-of-range or inconsistent value.
  void validate() const;
  /// Flat object of dotted keys, every key present.
  nlohmann::json to_flat() const;
  /// Unknown keys and ill-typed values raise ConfigError; absent keys keep
  /// their defaults.
  static ExperimentConfig from_flat(const nlohmann::json& flat);
  std::string render() const;
  static ExperimentConfig parse(const std::string& text, const std::string& origin = "<memory>");
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Hash of every setting that affects results (the output directory is
  /// excluded), as 16 hex digits.
  std::string hash() const;

  metrics::MetricConfig metric_config() const;
  /// The seed handed to each stage, derived from `seed`.
  std::uint64_t stage_seed(std::string_view stage) const;

  bool operator==(const ExperimentConfig& o) const { return to_flat() == o.to_flat(); }
};

/// Every recognised key with its default value.
std::vector<std::string> config_keys();

}  // namespace cotdrive::experiment
