#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cotdrive/annotate/corpus.hpp"
#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/experiment/commands.hpp"
#include "cotdrive/experiment/plots.hpp"
#include "cotdrive/ingest/window_io.hpp"
#include "cotdrive/metrics/report.hpp"

using namespace cotdrive;
using namespace cotdrive::experiment;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("cotdrive_exp_" + name);
  fs::remove_all(d);
  return d;
}

// Small enough that a whole pipeline runs in a few seconds.
ExperimentConfig small_config(const fs::path& out, std::size_t scenes = 30) {
  json flat = ExperimentConfig().to_flat();
  flat["out"] = out.string();
  flat["seed"] = 11;
  flat["synth.scenes"] = scenes;
  flat["model.hidden"] = 16;
  flat["model.heads"] = 2;
  flat["model.key_dim"] = 8;
  flat["model.interaction_layers"] = 1;
  flat["model.member_width"] = 8;
  flat["model.member_heads"] = 2;
  flat["model.maneuver_embedding"] = 4;
  flat["model.text_width"] = 32;
  flat["train.epochs"] = 3;
  flat["train.batch_size"] = 8;
  flat["student.layers"] = 1;
  flat["student.width"] = 16;
  flat["student.heads"] = 2;
  flat["student.epochs"] = 1;
  flat["distill.max_pairs"] = 4;
  flat["distill.eval_pairs"] = 2;
  flat["distill.vocab_size"] = 300;
  flat["annotate.max_new_tokens"] = 16;
  flat["annotate.flush_every"] = 4;
  flat["annotate.parallelism"] = 2;
  return ExperimentConfig::from_flat(flat);
}

ExperimentConfig with(const ExperimentConfig& c, const std::string& key, const json& value) {
  json flat = c.to_flat();
  flat[key] = value;
  return ExperimentConfig::from_flat(flat);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

void prepare(const ExperimentConfig& c) {
  cmd_synth(c);
  cmd_segment(c);
  cmd_annotate(c);
}

class FailingTeacher final : public annotate::TeacherClient {
 public:
  std::string send(const std::vector<annotate::ChatMessage>&) override { throw TeacherError("service unavailable"); }
  annotate::Provenance provenance() const override { return annotate::Provenance::teacher_live; }
};

}  // namespace

TEST(ExperimentConfig, RenderParseRoundTrip) {
  const auto a = ExperimentConfig();
  EXPECT_EQ(ExperimentConfig::parse(a.render()), a);
  const auto b = with(small_config("/tmp/x"), "eval.ks", json::array({1, 2, 6}));
  EXPECT_EQ(ExperimentConfig::parse(b.render()), b);
  EXPECT_NE(a, b);
}

TEST(ExperimentConfig, UnknownKeyAndBadValuesAreConfigErrors) {
  EXPECT_THROW(ExperimentConfig::parse(R"({"train.epoch": 3})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse(R"({"train.epochs": "three"})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse(R"({"split.train": 0.9, "split.val": 0.2})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("{not json"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/cotdrive.json"), ConfigError);
}

TEST(ExperimentConfig, PartialFileKeepsDefaults) {
  const auto c = ExperimentConfig::parse(R"({"seed": 5})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.train.epochs, ExperimentConfig().train.epochs);
}

TEST(ExperimentConfig, HashIgnoresOutputDirectoryOnly) {
  const auto a = small_config("/tmp/a");
  EXPECT_EQ(a.hash(), small_config("/tmp/b").hash());
  EXPECT_NE(a.hash(), with(a, "seed", 12).hash());
  EXPECT_NE(a.hash(), with(a, "train.lr_max", 0.002).hash());
  EXPECT_EQ(a.hash().size(), 16u);
  EXPECT_NE(a.stage_seed("forecast"), a.stage_seed("student"));
}

TEST(ExperimentSynth, SameSeedSameFiles) {
  const auto a = small_config(fresh_dir("synth_a"), 100);
  const auto b = small_config(fresh_dir("synth_b"), 100);
  cmd_synth(a);
  cmd_synth(b);
  const RunPaths pa(a.out), pb(b.out);
  EXPECT_EQ(read_file(pa.tracks), read_file(pb.tracks));
  EXPECT_EQ(read_file(pa.labels), read_file(pb.labels));
  EXPECT_THROW(cmd_synth(with(a, "synth.scenes", 0)), Error);
}

TEST(ExperimentSegment, RecoversEmbeddedLabels) {
  for (const char* profile : {"highway", "urban"}) {
    const auto c = with(small_config(fresh_dir(std::string("segment_") + profile), 200), "synth.profile", profile);
    cmd_synth(c);
    const auto s = cmd_segment(c);
    EXPECT_GE(s.at("label_agreement").get<double>(), 0.95) << profile;
    EXPECT_EQ(s.at("labelled_tracks").get<std::size_t>(), 200u) << profile;
    const RunPaths p(c.out);
    std::size_t n = 0;
    for (const char* split : {"train", "val", "test"}) n += ingest::load_windows(p.split(split)).size();
    EXPECT_EQ(n, s.at("windows").get<std::size_t>());
  }
}

TEST(ExperimentSegment, NeedsTracks) {
  EXPECT_THROW(cmd_segment(small_config(fresh_dir("segment_missing"))), InputError);
}

TEST(ExperimentAnnotate, MockCorpusIsValidAndRerunIsIdempotent) {
  const auto c = small_config(fresh_dir("annotate"), 10);
  cmd_synth(c);
  cmd_segment(c);
  const auto first = cmd_annotate(c);
  EXPECT_EQ(first.at("annotated").get<int>(), 10);
  EXPECT_EQ(first.at("violations").get<int>(), 0);
  EXPECT_EQ(first.at("failed").get<int>(), 0);
  const RunPaths p(c.out);
  const auto bytes = read_file(p.corpus);
  const auto again = cmd_annotate(c);
  EXPECT_EQ(again.at("annotated").get<int>(), 0);
  EXPECT_EQ(read_file(p.corpus), bytes);
}

TEST(ExperimentAnnotate, ResumedRunMatchesUninterrupted) {
  const auto whole = small_config(fresh_dir("annotate_whole"), 12);
  const auto split = small_config(fresh_dir("annotate_split"), 12);
  for (const auto& c : {whole, split}) {
    cmd_synth(c);
    cmd_segment(c);
  }
  cmd_annotate(whole);

  // First pass: the teacher fails on every other scene; failures are logged
  // and the run carries on.
  int calls = 0;
  annotate::TeacherFactory flaky = [&calls, seed = split.seed](const ingest::SceneWindow& w)
      -> std::shared_ptr<annotate::TeacherClient> {
    if (calls++ % 2 == 0) return std::make_shared<FailingTeacher>();
    return annotate::mock_teacher(w, seed);
  };
  auto c1 = split;
  c1.annotate.parallelism = 1;
  const auto partial = cmd_annotate(c1, &flaky);
  EXPECT_EQ(partial.at("failed").get<int>(), 6);
  EXPECT_EQ(partial.at("annotated").get<int>(), 6);
  const RunPaths ps(split.out), pw(whole.out);
  EXPECT_EQ(split_lines(read_file(ps.failures)).size(), 6u);

  const auto rest = cmd_annotate(split);
  EXPECT_EQ(rest.at("annotated").get<int>(), 6);
  EXPECT_EQ(read_file(ps.corpus), read_file(pw.corpus));
}

TEST(ExperimentDistill, ReportAndDeterminism) {
  const auto a = small_config(fresh_dir("distill_a"), 16);
  const auto b = small_config(fresh_dir("distill_b"), 16);
  for (const auto& c : {a, b}) {
    prepare(c);
    const auto s = cmd_distill(c);
    for (const char* k : {"train_pairs", "test_pairs", "initial_loss", "final_train_nll", "bert", "vocab_size"})
      EXPECT_TRUE(s.contains(k)) << k;
  }
  const RunPaths pa(a.out), pb(b.out);
  EXPECT_EQ(read_file(pa.student_checkpoint), read_file(pb.student_checkpoint));
  EXPECT_EQ(read_file(pa.student_metrics), read_file(pb.student_metrics));
  const auto report = json::parse(read_file(pa.student_report));
  for (const char* k : {"precision", "recall", "f1"}) EXPECT_TRUE(report.at("bert").contains(k)) << k;
}

TEST(ExperimentDistill, EmptyCorpusIsAnError) {
  const auto c = small_config(fresh_dir("distill_empty"), 8);
  cmd_synth(c);
  cmd_segment(c);
  EXPECT_THROW(cmd_distill(c), InputError);
  annotate::write_annotation_dataset({}, RunPaths(c.out).corpus);
  EXPECT_THROW(cmd_distill(c), ArgumentError);
}

TEST(ExperimentTrain, ResumeMatchesUninterruptedRun) {
  const auto whole = small_config(fresh_dir("train_whole"));
  const auto parts = small_config(fresh_dir("train_parts"));
  prepare(whole);
  prepare(parts);
  const auto s = cmd_train(whole);
  EXPECT_EQ(s.at("epochs_done").get<int>(), 3);

  const auto p1 = cmd_train(parts, {false, 1});
  EXPECT_EQ(p1.at("epochs_done").get<int>(), 1);
  EXPECT_FALSE(p1.at("finished").get<bool>());
  const auto p2 = cmd_train(parts);
  EXPECT_TRUE(p2.at("resumed").get<bool>());
  EXPECT_EQ(p2.at("epochs_done").get<int>(), 3);

  const RunPaths pw(whole.out), pp(parts.out);
  EXPECT_EQ(read_file(pw.train_log), read_file(pp.train_log));
  EXPECT_EQ(read_file(pw.best_model), read_file(pp.best_model));
  EXPECT_EQ(split_lines(read_file(pw.train_log)).size(), 3u);
  EXPECT_LT(s.at("final_val").get<double>(), s.at("initial_val").get<double>());
}

TEST(ExperimentTrain, RefusesToResumeUnderADifferentConfig) {
  const auto c = small_config(fresh_dir("train_refuse"));
  prepare(c);
  cmd_train(c, {false, 1});
  EXPECT_THROW(cmd_train(with(c, "train.lr_max", 0.002)), ConfigError);
  const auto fresh = cmd_train(with(c, "train.lr_max", 0.002), {true, 1});
  EXPECT_FALSE(fresh.at("resumed").get<bool>());
}

TEST(ExperimentTrain, DivergenceKeepsLastFiniteState) {
  const auto c = with(small_config(fresh_dir("train_diverge")), "train.lr_max", 1e300);
  prepare(c);
  EXPECT_THROW(cmd_train(c), DivergenceError);
  EXPECT_TRUE(fs::exists(RunPaths(c.out).train_state));
}

TEST(ExperimentTrain, MissingAnnotationsAreReported) {
  const auto c = small_config(fresh_dir("train_unannotated"));
  cmd_synth(c);
  cmd_segment(c);
  EXPECT_THROW(cmd_train(c), InputError);
}

TEST(ExperimentEval, ReproducibleReportsAndPlots) {
  const auto c = with(small_config(fresh_dir("eval")), "train.epochs", 1);
  prepare(c);
  EXPECT_THROW(cmd_eval(c), InputError);
  cmd_train(c);
  cmd_eval(c);
  const RunPaths p(c.out);
  const auto kv = read_file(p.eval_metrics);
  const auto table = read_file(p.eval_table);
  cmd_eval(c);
  EXPECT_EQ(read_file(p.eval_metrics), kv);
  EXPECT_EQ(read_file(p.eval_table), table);
  EXPECT_NE(kv.find("rmse.5s "), std::string::npos);
  EXPECT_NE(kv.find("min_ade.k5 "), std::string::npos);
  std::size_t plots = 0;
  for (const auto& e : fs::directory_iterator(p.plots_dir)) {
    EXPECT_GT(fs::file_size(e.path()), 100u) << e.path();
    EXPECT_EQ(e.path().extension(), ".svg");
    ++plots;
  }
  EXPECT_EQ(plots, 7u);
  EXPECT_THROW(cmd_eval(c, p.root / "nope.ckpt"), InputError);
}

TEST(ExperimentEval, PerfectForecastScoresZero) {
  const auto c = small_config(fresh_dir("eval_oracle"));
  cmd_synth(c);
  cmd_segment(c);
  const RunPaths p(c.out);
  const forecast::HashedWordEmbedder enc(c.model.text_width);
  const auto test = encode_split(c, p, "test", enc, false);
  ASSERT_FALSE(test.empty());
  // A stub forecast whose every maneuver mean is the ground truth and whose
  // distribution is certain of the true maneuver.
  std::vector<forecast::ForecastOutput> outs;
  for (const auto& w : test) {
    forecast::ForecastOutput o;
    o.scene_ref = w.scene_ref;
    o.maneuver_dist.fill(0.0);
    o.maneuver_dist[static_cast<std::size_t>(w.maneuver)] = 1.0;
    for (auto& params : o.per_maneuver_params)
      for (Eigen::Index t = 0; t < w.truth.rows(); ++t) params.push_back({w.truth(t, 0), w.truth(t, 1), 1.0, 1.0, 0.0});
    outs.push_back(o);
  }
  const auto r = metrics::compute_report(metrics::to_samples(outs, test), c.metric_config());
  EXPECT_EQ(r.ade, 0.0);
  EXPECT_EQ(r.fde, 0.0);
  for (const auto& [h, v] : r.rmse) EXPECT_EQ(v, 0.0) << h;
  for (const auto& [k, m] : r.min_k) EXPECT_EQ(m.min_ade, 0.0) << k;
  EXPECT_EQ(r.maneuver_accuracy.value(), 1.0);
}

TEST(ExperimentBaselines, WritesBothReports) {
  const auto c = small_config(fresh_dir("baselines"));
  cmd_synth(c);
  cmd_segment(c);
  const auto s = cmd_baselines(c);
  const RunPaths p(c.out);
  EXPECT_TRUE(fs::exists(p.baselines_dir / "constant_position.txt"));
  EXPECT_TRUE(fs::exists(p.baselines_dir / "constant_velocity.txt"));
  EXPECT_LT(s.at("constant_velocity").at("ade").get<double>(), s.at("constant_position").at("ade").get<double>());
}

TEST(ExperimentForecast, OneOutputPerWindow) {
  const auto c = with(small_config(fresh_dir("forecast")), "train.epochs", 1);
  prepare(c);
  cmd_train(c);
  const RunPaths p(c.out);
  const auto out = p.root / "forecasts.jsonl";
  cmd_forecast(c, p.split("test"), out);
  const auto lines = split_lines(read_file(out));
  const auto windows = ingest::load_windows(p.split("test"));
  ASSERT_EQ(lines.size(), windows.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto o = forecast::forecast_from_json(json::parse(lines[i]));
    EXPECT_EQ(o.scene_ref, windows[i].scene_ref);
    double total = 0;
    for (double q : o.maneuver_dist) total += q;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(ExperimentManifest, RecordsHashSeedAndVersions) {
  const auto c = small_config(fresh_dir("manifest"), 8);
  cmd_synth(c);
  cmd_segment(c);
  const RunPaths p(c.out);
  const auto m = json::parse(read_file(p.manifest));
  EXPECT_EQ(m.at("config_hash"), c.hash());
  EXPECT_EQ(m.at("seed").get<std::uint64_t>(), c.seed);
  EXPECT_TRUE(m.at("artifact_versions").contains("windows"));
  EXPECT_TRUE(m.at("commands").contains("synth"));
  EXPECT_TRUE(m.at("commands").contains("segment"));
  EXPECT_EQ(ExperimentConfig::load(p.config), c);
}
