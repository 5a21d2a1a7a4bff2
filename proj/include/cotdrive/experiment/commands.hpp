#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotdrive/annotate/teacher.hpp"
#include "cotdrive/experiment/config.hpp"
#include "cotdrive/forecast/features.hpp"

namespace cotdrive::experiment {

inline constexpr const char* kToolVersion = "1.0.0";

/// File layout of a run directory.
struct RunPaths {
  explicit RunPaths(std::filesystem::path root);
  std::filesystem::path root;
  std::filesystem::path manifest, config;
  std::filesystem::path data_dir, tracks, labels;
  std::filesystem::path windows_dir;
  std::filesystem::path corpus, failures;
  std::filesystem::path student_dir, student_checkpoint, student_report, student_metrics;
  std::filesystem::path model_dir, train_state, best_model, train_log;
  std::filesystem::path eval_dir, eval_metrics, eval_table, plots_dir;
  std::filesystem::path baselines_dir;

  std::filesystem::path split(const std::string& name) const;
};

/// Each command writes its artifacts under the config's output directory,
/// records itself in the run manifest and returns the same summary.

/// Synthetic tracks and ground-truth labels.
nlohmann::json cmd_synth(const ExperimentConfig& config);
/// Windows cut from the run's trajectories, labelled, normalized and split.
nlohmann::json cmd_segment(const ExperimentConfig& config);
/// Annotation corpus over every window; skips scenes already annotated.
/// `factory` overrides the configured teacher.
nlohmann::json cmd_annotate(const ExperimentConfig& config, const annotate::TeacherFactory* factory = nullptr);
/// Student fine-tuned on the training split of the corpus.
nlohmann::json cmd_distill(const ExperimentConfig& config);

struct TrainOptions {
  /// Ignore an existing training state and start over.
  bool restart = false;
  /// Stop after this many epochs in this invocation (0: run to the end).
  int max_epochs = 0;
};
/// Stage-2 training with per-epoch state checkpoints; resumes an existing
/// state when its config hash matches.
nlohmann::json cmd_train(const ExperimentConfig& config, const TrainOptions& options = {});
/// Metric report and plots on the test split.
nlohmann::json cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint = {});
/// Constant-position and constant-velocity reports on the test split.
nlohmann::json cmd_baselines(const ExperimentConfig& config);
/// Batch inference: windows JSONL in, forecasts JSONL out.
nlohmann::json cmd_forecast(const ExperimentConfig& config, const std::filesystem::path& input,
                            const std::filesystem::path& output, const std::filesystem::path& checkpoint = {});

/// Text encoder for the semantic branch as configured.
std::unique_ptr<student::TokenEmbedder> make_text_encoder(const ExperimentConfig& config);

/// scene_ref -> annotation summary from the run's corpus.
std::map<std::string, std::string> load_summaries(const RunPaths& paths);

/// Windows of a split encoded with their annotations; a window without an
/// annotation is an InputError.
std::vector<forecast::EncodedWindow> encode_split(const ExperimentConfig& config, const RunPaths& paths,
                                                  const std::string& split, const student::TokenEmbedder& encoder,
                                                  bool require_annotation = true);

}  // namespace cotdrive::experiment
