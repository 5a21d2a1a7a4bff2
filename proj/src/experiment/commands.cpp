#include "cotdrive/experiment/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "cotdrive/annotate/corpus.hpp"
#include "cotdrive/annotate/prompts.hpp"
#include "cotdrive/annotate/session.hpp"
#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/experiment/plots.hpp"
#include "cotdrive/forecast/train.hpp"
#include "cotdrive/ingest/loader.hpp"
#include "cotdrive/ingest/window_io.hpp"
#include "cotdrive/metrics/report.hpp"
#include "cotdrive/nn/checkpoint.hpp"
#include "cotdrive/student/bertscore.hpp"

namespace cotdrive::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSplits[] = {"train", "val", "test"};

void record(const ExperimentConfig& config, const RunPaths& paths, const std::string& command, const json& summary) {
  fs::create_directories(paths.root);
  json m = json::object();
  if (fs::exists(paths.manifest)) {
    try {
      m = json::parse(read_file(paths.manifest));
    } catch (const json::exception&) {
      m = json::object();
    }
  }
  m["tool"] = "cotdrive";
  m["version"] = kToolVersion;
  m["config_hash"] = config.hash();
  m["seed"] = config.seed;
  m["artifact_versions"] = {{"windows", ingest::kWindowSchemaVersion},
                            {"annotations", annotate::kAnnotationSchemaVersion},
                            {"checkpoint", nn::kCheckpointSchemaVersion}};
  json entry = summary;
  entry["config_hash"] = config.hash();
  m["commands"][command] = entry;
  write_file(paths.manifest, m.dump(2) + "\n");
  write_file(paths.config, config.render());
}

std::vector<ingest::SceneWindow> load_split(const RunPaths& paths, const std::string& split) {
  const auto p = paths.split(split);
  if (!fs::exists(p)) throw InputError("windows for split '" + split + "' not found at " + p.string() + "; run segment first");
  return ingest::load_windows(p);
}

fs::path student_path(const ExperimentConfig& config, const RunPaths& paths) {
  return config.annotate.student_checkpoint.empty() ? paths.student_checkpoint
                                                    : fs::path(config.annotate.student_checkpoint);
}

student::Student load_student_for(const ExperimentConfig& config, const RunPaths& paths) {
  const auto p = student_path(config, paths);
  if (!fs::exists(p)) throw InputError("student checkpoint not found: " + p.string() + "; run distill first");
  return student::load_student(p);
}

metrics::Path target_history(const forecast::EncodedWindow& w, double position_scale) {
  metrics::Path p;
  for (int t = 0; t < w.history; ++t) {
    const auto row = w.agent_features.row(t * w.agents);
    p.push_back({row(0) * position_scale, row(1) * position_scale});
  }
  return p;
}

metrics::Path matrix_path(const nn::Matrix& m) {
  metrics::Path p;
  for (Eigen::Index i = 0; i < m.rows(); ++i) p.push_back({m(i, 0), m(i, 1)});
  return p;
}

std::unique_ptr<forecast::ForecastNet> load_model(const ExperimentConfig& config, const RunPaths& paths,
                                                  const fs::path& checkpoint) {
  const fs::path p = checkpoint.empty() ? paths.best_model : checkpoint;
  if (!fs::exists(p)) throw InputError("model checkpoint not found: " + p.string() + "; run train first");
  (void)config;
  return forecast::load_forecast(p);
}

json report_json(const metrics::MetricReport& r) {
  json j = json::object();
  for (const auto& [k, v] : r.entries()) j[k] = v;
  return j;
}

}  // namespace

RunPaths::RunPaths(fs::path r) : root(std::move(r)) {
  manifest = root / "manifest.json";
  config = root / "config.json";
  data_dir = root / "data";
  tracks = data_dir / "tracks.csv";
  labels = data_dir / "labels.jsonl";
  windows_dir = root / "windows";
  corpus = root / "annotations" / "corpus.jsonl";
  failures = root / "annotations" / "failures.jsonl";
  student_dir = root / "student";
  student_checkpoint = student_dir / "student.ckpt";
  student_report = student_dir / "report.json";
  student_metrics = student_dir / "metrics.txt";
  model_dir = root / "model";
  train_state = model_dir / "train_state.ckpt";
  best_model = model_dir / "best.ckpt";
  train_log = model_dir / "train_log.jsonl";
  eval_dir = root / "eval";
  eval_metrics = eval_dir / "metrics.txt";
  eval_table = eval_dir / "metrics_table.txt";
  plots_dir = eval_dir / "plots";
  baselines_dir = root / "baselines";
}

fs::path RunPaths::split(const std::string& name) const { return windows_dir / (name + ".jsonl"); }

// ---- synth / segment ----

json cmd_synth(const ExperimentConfig& config) {
  const RunPaths paths(config.out);
  ingest::SynthOptions o = config.synth;
  o.seed = config.seed;
  o.hz = config.segment.hz;
  o.history_seconds = config.segment.history_seconds;
  o.future_seconds = config.segment.future_seconds;
  if (o.scenes == 0) throw ArgumentError("synth: scene count must be positive");
  const auto data = ingest::generate_synthetic(o);
  ingest::write_synthetic(paths.data_dir, data, o);
  json summary = {{"profile", std::string(ingest::to_string(o.profile))},
                  {"scenes", o.scenes},
                  {"rows", data.states.size()},
                  {"tracks", paths.tracks.string()}};
  record(config, paths, "synth", summary);
  return summary;
}

json cmd_segment(const ExperimentConfig& config) {
  const RunPaths paths(config.out);
  ingest::LoadResult loaded;
  double native_hz = config.data.native_hz;
  if (config.data.source == "synthetic") {
    if (!fs::exists(paths.tracks)) throw InputError("no synthetic tracks at " + paths.tracks.string() + "; run synth first");
    loaded = ingest::load_trajectories(paths.tracks, ingest::TrajectoryFormat::csv);
    native_hz = config.segment.hz;
  } else {
    if (!fs::exists(config.data.path)) throw InputError("trajectory file not found: " + config.data.path);
    loaded = ingest::load_trajectories(config.data.path, ingest::trajectory_format_from_string(config.data.format));
  }
  const auto states = ingest::resample(loaded.states, native_hz, config.segment.hz);
  auto seg = ingest::segment_windows(states, config.segment);
  if (seg.windows.empty()) throw InputError("segment: no track covers a full window");

  std::map<std::string, int> truth;
  if (config.data.source == "synthetic" && fs::exists(paths.labels))
    for (const auto& l : ingest::read_synth_labels(paths.labels)) truth[l.target_id] = l.maneuver.joint_index();
  std::size_t compared = 0, agreed = 0;
  std::vector<ingest::SceneWindow> windows;
  windows.reserve(seg.windows.size());
  for (auto& w : seg.windows) {
    w.maneuver = ingest::label_maneuver(w);
    auto it = truth.find(w.target_id);
    if (it != truth.end()) {
      ++compared;
      agreed += it->second == w.maneuver->joint_index();
    }
    windows.push_back(ingest::normalize_to_target_frame(w));
  }
  const auto split = ingest::split_dataset(windows.size(), config.split, config.seed);
  fs::create_directories(paths.windows_dir);
  ingest::save_windows(paths.split("train"), ingest::select(windows, split.train));
  ingest::save_windows(paths.split("val"), ingest::select(windows, split.val));
  ingest::save_windows(paths.split("test"), ingest::select(windows, split.test));

  std::vector<std::size_t> per_class(ingest::kManeuverCount, 0);
  for (const auto& w : windows) ++per_class[static_cast<std::size_t>(w.maneuver->joint_index())];
  json summary = {{"windows", windows.size()},
                  {"train", split.train.size()},
                  {"val", split.val.size()},
                  {"test", split.test.size()},
                  {"rejected_rows", loaded.rejected.size()},
                  {"short_tracks", seg.skipped.short_tracks},
                  {"maneuver_counts", per_class}};
  if (compared > 0) {
    summary["label_agreement"] = static_cast<double>(agreed) / static_cast<double>(compared);
    summary["labelled_tracks"] = compared;
  }
  record(config, paths, "segment", summary);
  return summary;
}

// ---- annotate ----

json cmd_annotate(const ExperimentConfig& config, const annotate::TeacherFactory* factory_override) {
  const RunPaths paths(config.out);
  std::map<std::string, std::string> split_of;
  std::vector<ingest::SceneWindow> windows;
  for (const char* s : kSplits)
    for (auto& w : load_split(paths, s)) {
      split_of[w.scene_ref] = s;
      windows.push_back(std::move(w));
    }

  // The corpus is kept in window order so a resumed run writes the same file
  // as an uninterrupted one.
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < windows.size(); ++i) order.emplace(windows[i].scene_ref, i);
  std::vector<annotate::CoTAnnotation> corpus;
  auto flush = [&] {
    std::stable_sort(corpus.begin(), corpus.end(), [&](const auto& a, const auto& b) {
      auto ia = order.find(a.scene_ref), ib = order.find(b.scene_ref);
      const auto ka = ia == order.end() ? windows.size() : ia->second;
      const auto kb = ib == order.end() ? windows.size() : ib->second;
      return ka < kb;
    });
    annotate::write_annotation_dataset(corpus, paths.corpus, split_of);
  };
  if (fs::exists(paths.corpus)) corpus = annotate::read_annotation_dataset(paths.corpus);
  std::set<std::string> done;
  for (const auto& a : corpus) done.insert(a.scene_ref);
  std::vector<ingest::SceneWindow> pending;
  for (const auto& w : windows)
    if (!done.count(w.scene_ref)) pending.push_back(w);

  std::size_t added = 0, violations = 0, invalid = 0;
  std::vector<json> failures;
  if (config.annotate.source == "student") {
    const auto st = load_student_for(config, paths);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto& w = pending[i];
      annotate::CoTAnnotation a;
      a.scene_ref = w.scene_ref;
      a.provenance = annotate::Provenance::student;
      a.summary = st.generate_annotation(annotate::serialize_scene(w), config.annotate.max_new_tokens);
      if (a.summary.empty()) a.warnings.push_back("student produced an empty annotation");
      corpus.push_back(std::move(a));
      ++added;
      if ((i + 1) % static_cast<std::size_t>(config.annotate.flush_every) == 0)
        flush();
    }
  } else {
    const auto templates = annotate::PromptTemplates::load(annotate::PromptTemplates::default_dir());
    annotate::TeacherFactory factory;
    if (factory_override) {
      factory = *factory_override;
    } else if (config.annotate.source == "mock") {
      const auto seed = config.seed;
      factory = [seed](const ingest::SceneWindow& w) {
        return std::shared_ptr<annotate::TeacherClient>(annotate::mock_teacher(w, seed));
      };
    } else {
      auto shared = std::make_shared<annotate::HttpTeacher>(config.teacher);
      factory = [shared](const ingest::SceneWindow&) { return std::static_pointer_cast<annotate::TeacherClient>(shared); };
    }
    const std::size_t chunk = static_cast<std::size_t>(config.annotate.flush_every);
    for (std::size_t start = 0; start < pending.size(); start += chunk) {
      const std::vector<ingest::SceneWindow> part(
          pending.begin() + static_cast<long>(start),
          pending.begin() + static_cast<long>(std::min(pending.size(), start + chunk)));
      for (auto& out : annotate::annotate_windows(part, factory, templates, config.annotate.parallelism)) {
        if (!out.annotation) {
          failures.push_back({{"scene_ref", out.scene_ref}, {"error", out.error}});
          continue;
        }
        violations += out.validation.violations.size();
        invalid += out.validation.ok() ? 0 : 1;
        corpus.push_back(std::move(*out.annotation));
        ++added;
      }
      flush();
    }
  }
  flush();
  std::string fail_text;
  for (const auto& f : failures) fail_text += f.dump() + "\n";
  write_file(paths.failures, fail_text);

  json summary = {{"source", config.annotate.source},
                  {"windows", windows.size()},
                  {"already_present", windows.size() - pending.size()},
                  {"annotated", added},
                  {"failed", failures.size()},
                  {"invalid", invalid},
                  {"violations", violations},
                  {"corpus_size", corpus.size()}};
  record(config, paths, "annotate", summary);
  return summary;
}

std::map<std::string, std::string> load_summaries(const RunPaths& paths) {
  if (!fs::exists(paths.corpus)) throw InputError("annotation corpus not found at " + paths.corpus.string() + "; run annotate first");
  std::map<std::string, std::string> out;
  for (auto& a : annotate::read_annotation_dataset(paths.corpus)) out[a.scene_ref] = std::move(a.summary);
  return out;
}

// ---- distill ----

json cmd_distill(const ExperimentConfig& config) {
  const RunPaths paths(config.out);
  const auto summaries = load_summaries(paths);
  struct Pair {
    std::string id, prompt, scene_text, answer;
  };
  auto pairs_of = [&](const std::string& split, std::size_t limit) {
    std::vector<Pair> out;
    for (const auto& w : load_split(paths, split)) {
      if (limit && out.size() >= limit) break;
      auto it = summaries.find(w.scene_ref);
      if (it == summaries.end() || it->second.empty()) continue;
      const auto scene = annotate::serialize_scene(w);
      out.push_back({w.scene_ref, student::student_prompt(scene), scene, it->second});
    }
    return out;
  };
  const auto train = pairs_of("train", static_cast<std::size_t>(config.distill.max_pairs));
  if (train.empty()) throw ArgumentError("distill: the training split has no annotated windows");
  const auto val = pairs_of("val", static_cast<std::size_t>(config.distill.eval_pairs));
  const auto test = pairs_of("test", static_cast<std::size_t>(config.distill.eval_pairs));

  std::vector<std::string> texts;
  for (const auto& p : train) {
    texts.push_back(p.prompt);
    texts.push_back(p.answer);
  }
  const auto tokenizer = student::Tokenizer::train_bpe(texts, config.distill.vocab_size);
  std::size_t rejected = 0;
  auto encode = [&](const std::vector<Pair>& ps) {
    std::vector<student::TokenSequence> out;
    for (const auto& p : ps) {
      try {
        out.push_back(student::merge_prompt_answer(p.prompt, p.answer, tokenizer, config.student.max_length, true, p.id));
      } catch (const SampleRejected&) {
        ++rejected;
      }
    }
    return out;
  };
  const auto train_seqs = encode(train);
  const auto val_seqs = encode(val);
  if (train_seqs.empty()) throw ArgumentError("distill: every training pair exceeded the maximum length");

  auto spec = config.student;
  spec.vocab_size = tokenizer.vocab_size();
  auto model = std::make_shared<student::StudentModel>(spec, config.stage_seed("student"));
  auto tc = config.student_train;
  tc.seed = config.stage_seed("student-train");
  const auto rep = student::train_student(*model, train_seqs, val_seqs, tc);
  const student::Student st{tokenizer, model};
  fs::create_directories(paths.student_dir);
  student::save_student(paths.student_checkpoint, st, {{"config_hash", config.hash()}});

  const double final_nll = student::evaluate_stage1(*model, train_seqs, tc.mask_prompt);
  const student::StudentEmbedder embedder(st);
  double p = 0, r = 0, f = 0;
  std::size_t scored = 0, exact = 0, empty = 0;
  for (const auto& pr : test) {
    const auto candidate = st.generate_annotation(pr.scene_text, config.annotate.max_new_tokens);
    exact += candidate == pr.answer;
    student::BertScore s;
    try {
      s = student::bert_score(candidate, pr.answer, embedder);
    } catch (const ScoringError&) {
      ++empty;  // an empty generation scores zero
    }
    p += s.precision;
    r += s.recall;
    f += s.f1;
    ++scored;
  }
  json report = {{"train_pairs", train_seqs.size()},
                 {"val_pairs", val_seqs.size()},
                 {"test_pairs", scored},
                 {"rejected_pairs", rejected},
                 {"vocab_size", tokenizer.vocab_size()},
                 {"train_loss", rep.train_loss},
                 {"val_loss", rep.val_loss},
                 {"initial_loss", rep.initial_loss},
                 {"best_epoch", rep.best_epoch},
                 {"final_train_nll", final_nll}};
  std::string kv = "train_nll.final " + format_roundtrip(final_nll) + "\n";
  if (scored > 0) {
    const double n = static_cast<double>(scored);
    report["bert"] = {{"precision", p / n}, {"recall", r / n}, {"f1", f / n}};
    report["exact_matches"] = exact;
    report["empty_generations"] = empty;
    kv += "bert_p " + format_roundtrip(p / n) + "\nbert_r " + format_roundtrip(r / n) + "\nbert_f1 " +
          format_roundtrip(f / n) + "\nexact_match " + format_roundtrip(static_cast<double>(exact) / n) + "\n";
  }
  write_file(paths.student_report, report.dump(2) + "\n");
  write_file(paths.student_metrics, kv);
  json summary = report;
  summary.erase("train_loss");
  summary.erase("val_loss");
  summary["checkpoint"] = paths.student_checkpoint.string();
  record(config, paths, "distill", summary);
  return summary;
}

// ---- forecast model ----

std::unique_ptr<student::TokenEmbedder> make_text_encoder(const ExperimentConfig& config) {
  if (config.text_encoder == "student") {
    const RunPaths paths(config.out);
    return std::make_unique<student::StudentEmbedder>(load_student_for(config, paths));
  }
  return std::make_unique<forecast::HashedWordEmbedder>(config.model.text_width);
}

std::vector<forecast::EncodedWindow> encode_split(const ExperimentConfig& config, const RunPaths& paths,
                                                  const std::string& split, const student::TokenEmbedder& encoder,
                                                  bool require_annotation) {
  const auto windows = load_split(paths, split);
  std::map<std::string, std::string> summaries;
  if (require_annotation || fs::exists(paths.corpus)) summaries = load_summaries(paths);
  std::vector<forecast::EncodedWindow> out;
  out.reserve(windows.size());
  std::size_t missing = 0;
  std::string first_missing;
  for (const auto& w : windows) {
    auto it = summaries.find(w.scene_ref);
    if (it == summaries.end()) {
      if (missing++ == 0) first_missing = w.scene_ref;
      if (require_annotation) continue;
    }
    out.push_back(forecast::encode_window(w, it == summaries.end() ? std::string() : it->second, encoder,
                                          config.segment.future_frames(), config.model.scales));
  }
  if (require_annotation && missing > 0)
    throw InputError(std::to_string(missing) + " " + split + " windows have no annotation (first: " + first_missing +
                     "); run annotate first");
  return out;
}

json cmd_train(const ExperimentConfig& config, const TrainOptions& options) {
  const RunPaths paths(config.out);
  const auto encoder = make_text_encoder(config);
  const auto train = encode_split(config, paths, "train", *encoder);
  const auto val = encode_split(config, paths, "val", *encoder);
  if (train.empty()) throw ArgumentError("train: empty training split");

  auto mc = config.model;
  mc.text_width = encoder->width();
  forecast::ForecastNet net(mc, config.stage_seed("forecast"));
  auto tc = config.train;
  tc.seed = config.stage_seed("forecast-train");
  forecast::ForecastTrainer trainer(net, tc);
  const json meta = {{"config_hash", config.hash()}};

  bool resumed = false;
  if (!options.restart && fs::exists(paths.train_state)) {
    const auto state = nn::load_checkpoint(paths.train_state);
    const auto stored = state.metadata.value("config_hash", std::string());
    if (stored != config.hash())
      throw ConfigError("refusing to resume: checkpoint config hash " + stored + " differs from " + config.hash() +
                        " (pass --restart to start over)");
    trainer.restore(state);
    resumed = true;
  }
  fs::create_directories(paths.model_dir);

  auto persist = [&] {
    const auto snap = trainer.snapshot(meta);
    nn::save_checkpoint(paths.train_state, snap);
    std::string log;
    for (const auto& r : trainer.history()) log += forecast::epoch_to_json(r).dump() + "\n";
    write_file(paths.train_log, log);
    const auto best = snap.with_prefix("best/");
    if (!best.empty()) {
      nn::CheckpointData model;
      model.kind = "forecast";
      model.config = net.config().to_json();
      model.metadata = {{"config_hash", config.hash()}, {"best_epoch", trainer.best_epoch()}, {"best_val", trainer.best_val()}};
      model.tensors = best;
      nn::save_checkpoint(paths.best_model, model);
    }
  };

  int ran = 0;
  try {
    while (!trainer.finished() && (options.max_epochs <= 0 || ran < options.max_epochs)) {
      trainer.run_epoch(train, val);
      ++ran;
      persist();
    }
  } catch (const DivergenceError& e) {
    persist();
    json summary = {{"aborted", true}, {"reason", e.what()}, {"epochs_done", trainer.epochs_done()}};
    record(config, paths, "train", summary);
    throw DivergenceError(std::string(e.what()) + "; last finite state saved to " + paths.train_state.string());
  }

  json history = json::array();
  for (const auto& r : trainer.history()) history.push_back(forecast::epoch_to_json(r));
  json summary = {{"epochs_done", trainer.epochs_done()},
                  {"finished", trainer.finished()},
                  {"resumed", resumed},
                  {"initial_val", trainer.has_initial() ? json(trainer.initial_val().total) : json()},
                  {"best_epoch", trainer.best_epoch()},
                  {"best_val", trainer.best_val()},
                  {"train_windows", train.size()},
                  {"val_windows", val.size()}};
  if (!trainer.history().empty()) summary["final_val"] = trainer.history().back().val.total;
  record(config, paths, "train", summary);
  return summary;
}

// ---- evaluation ----

json cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint) {
  const RunPaths paths(config.out);
  const auto net = load_model(config, paths, checkpoint);
  const auto encoder = make_text_encoder(config);
  if (encoder->width() != net->config().text_width)
    throw ConfigError("eval: text encoder width " + std::to_string(encoder->width()) + " does not match the model's " +
                      std::to_string(net->config().text_width));
  const auto test = encode_split(config, paths, "test", *encoder);
  if (test.empty()) throw UndefinedMetricError("eval: empty test split");
  const auto outputs = forecast::predict_all(*net, test);
  const auto mc = config.metric_config();
  const auto report = metrics::compute_report(metrics::to_samples(outputs, test), mc);

  fs::create_directories(paths.plots_dir);
  write_file(paths.eval_metrics, report.render_kv());
  write_file(paths.eval_table, report.render_table());

  const auto cv = metrics::compute_report(metrics::baseline_samples(test, metrics::Baseline::constant_velocity), mc);
  const auto cp = metrics::compute_report(metrics::baseline_samples(test, metrics::Baseline::constant_position), mc);
  write_file(paths.plots_dir / "rmse_horizon.svg",
             plot_curves("RMSE by horizon", "RMSE (m)",
                         {{"model", report.rmse}, {"constant velocity", cv.rmse}, {"constant position", cp.rmse}}));
  const int n_plots = std::min<int>(config.eval.plot_samples, static_cast<int>(test.size()));
  for (int i = 0; i < n_plots; ++i) {
    const auto& w = test[static_cast<std::size_t>(i)];
    const auto& o = outputs[static_cast<std::size_t>(i)];
    const std::string tag = "sample_" + std::to_string(i);
    write_file(paths.plots_dir / (tag + "_paths.svg"),
               plot_paths(w.scene_ref + " (true: " + (w.maneuver >= 0 ? ingest::maneuver_name(w.maneuver) : std::string("unknown")) + ")",
                          target_history(w, config.model.scales.position), matrix_path(w.truth), o));
    write_file(paths.plots_dir / (tag + "_probs.svg"), plot_probabilities(w.scene_ref, o.maneuver_dist));
  }
  json summary = {{"test_windows", test.size()}, {"metrics", report_json(report)}, {"plots", 1 + 2 * n_plots}};
  record(config, paths, "eval", summary);
  return summary;
}

json cmd_baselines(const ExperimentConfig& config) {
  const RunPaths paths(config.out);
  const forecast::HashedWordEmbedder encoder(config.model.text_width);
  const auto test = encode_split(config, paths, "test", encoder, false);
  if (test.empty()) throw UndefinedMetricError("baselines: empty test split");
  const auto mc = config.metric_config();
  fs::create_directories(paths.baselines_dir);
  json summary = {{"test_windows", test.size()}};
  for (auto [name, kind] : {std::pair{"constant_position", metrics::Baseline::constant_position},
                            std::pair{"constant_velocity", metrics::Baseline::constant_velocity}}) {
    const auto r = metrics::compute_report(metrics::baseline_samples(test, kind), mc);
    write_file(paths.baselines_dir / (std::string(name) + ".txt"), r.render_kv());
    write_file(paths.baselines_dir / (std::string(name) + "_table.txt"), r.render_table());
    summary[name] = report_json(r);
  }
  record(config, paths, "baselines", summary);
  return summary;
}

json cmd_forecast(const ExperimentConfig& config, const fs::path& input, const fs::path& output,
                  const fs::path& checkpoint) {
  const RunPaths paths(config.out);
  if (!fs::exists(input)) throw InputError("forecast input not found: " + input.string());
  const auto net = load_model(config, paths, checkpoint);
  const auto encoder = make_text_encoder(config);
  const auto windows = ingest::load_windows(input);

  std::vector<std::string> texts(windows.size());
  std::vector<ingest::SceneWindow> normalized;
  for (const auto& w : windows) normalized.push_back(w.transform ? w : ingest::normalize_to_target_frame(w));
  if (config.annotate.source == "student") {
    const auto st = load_student_for(config, paths);
    for (std::size_t i = 0; i < normalized.size(); ++i)
      texts[i] = st.generate_annotation(annotate::serialize_scene(normalized[i]), config.annotate.max_new_tokens);
  } else {
    const auto templates = annotate::PromptTemplates::load(annotate::PromptTemplates::default_dir());
    std::shared_ptr<annotate::HttpTeacher> live;
    if (config.annotate.source == "live") live = std::make_shared<annotate::HttpTeacher>(config.teacher);
    for (std::size_t i = 0; i < normalized.size(); ++i) {
      if (live) {
        texts[i] = annotate::run_cot_session(normalized[i], *live, templates).summary;
      } else {
        annotate::MockTeacher teacher(normalized[i], config.seed);
        texts[i] = annotate::run_cot_session(normalized[i], teacher, templates).summary;
      }
    }
  }
  std::vector<forecast::EncodedWindow> encoded;
  for (std::size_t i = 0; i < normalized.size(); ++i)
    encoded.push_back(forecast::encode_window(normalized[i], texts[i], *encoder, net->config().future_frames,
                                              net->config().scales));
  const auto outputs = forecast::predict_all(*net, encoded);
  std::string lines;
  for (const auto& o : outputs) lines += forecast::forecast_to_json(o).dump() + "\n";
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_file(output, lines);
  json summary = {{"windows", windows.size()}, {"output", output.string()}};
  record(config, paths, "forecast", summary);
  return summary;
}

}  // namespace cotdrive::experiment
