#include "cotdrive/experiment/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/loader.hpp"

namespace cotdrive::experiment {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
          throw ConfigError(key + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key + ": expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

/// Binds a key to a member reached through `access`.
template <typename T, typename Access>
Field bind(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return json(access(const_cast<ExperimentConfig&>(c))); },
          [access, key](ExperimentConfig& c, const json& v) { access(c) = as<T>(v, key); }};
}

#define COTDRIVE_FIELD(T, key, expr) bind<T>(key, [](ExperimentConfig& c) -> T& { return expr; })

Field enum_field(std::string key, std::function<std::string(const ExperimentConfig&)> get,
                 std::function<void(ExperimentConfig&, const std::string&)> set) {
  return {key, [get](const ExperimentConfig& c) { return json(get(c)); },
          [set, key](ExperimentConfig& c, const json& v) { set(c, as<std::string>(v, key)); }};
}

Field int_list(std::string key, std::vector<int> EvalSection::*member) {
  return {key, [member](const ExperimentConfig& c) { return json(c.eval.*member); },
          [member, key](ExperimentConfig& c, const json& v) {
            if (!v.is_array()) throw ConfigError(key + ": expected a list of integers");
            std::vector<int> out;
            for (const auto& x : v) out.push_back(as<int>(x, key));
            c.eval.*member = out;
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(COTDRIVE_FIELD(std::string, "data.source", c.data.source));
    f.push_back(COTDRIVE_FIELD(std::string, "data.path", c.data.path));
    f.push_back(COTDRIVE_FIELD(std::string, "data.format", c.data.format));
    f.push_back(COTDRIVE_FIELD(double, "data.native_hz", c.data.native_hz));

    f.push_back(enum_field(
        "synth.profile", [](const ExperimentConfig& c) { return std::string(ingest::to_string(c.synth.profile)); },
        [](ExperimentConfig& c, const std::string& s) {
          try {
            c.synth.profile = ingest::synth_profile_from_string(s);
          } catch (const Error&) {
            throw ConfigError("synth.profile: unknown profile '" + s + "'");
          }
        }));
    f.push_back(COTDRIVE_FIELD(std::size_t, "synth.scenes", c.synth.scenes));
    f.push_back(COTDRIVE_FIELD(int, "synth.max_neighbors", c.synth.max_neighbors));
    f.push_back(COTDRIVE_FIELD(double, "synth.position_noise", c.synth.position_noise));

    f.push_back(COTDRIVE_FIELD(double, "segment.history_seconds", c.segment.history_seconds));
    f.push_back(COTDRIVE_FIELD(double, "segment.future_seconds", c.segment.future_seconds));
    f.push_back(COTDRIVE_FIELD(double, "segment.hz", c.segment.hz));
    f.push_back(COTDRIVE_FIELD(int, "segment.stride", c.segment.stride));
    f.push_back(COTDRIVE_FIELD(double, "segment.radius", c.segment.radius));
    f.push_back(COTDRIVE_FIELD(int, "segment.max_neighbors", c.segment.max_neighbors));

    f.push_back(COTDRIVE_FIELD(double, "split.train", c.split.train));
    f.push_back(COTDRIVE_FIELD(double, "split.val", c.split.val));
    f.push_back(COTDRIVE_FIELD(double, "split.test", c.split.test));

    f.push_back(COTDRIVE_FIELD(std::string, "annotate.source", c.annotate.source));
    f.push_back(COTDRIVE_FIELD(int, "annotate.parallelism", c.annotate.parallelism));
    f.push_back(COTDRIVE_FIELD(std::string, "annotate.student_checkpoint", c.annotate.student_checkpoint));
    f.push_back(COTDRIVE_FIELD(int, "annotate.max_new_tokens", c.annotate.max_new_tokens));
    f.push_back(COTDRIVE_FIELD(int, "annotate.flush_every", c.annotate.flush_every));

    f.push_back(COTDRIVE_FIELD(std::string, "teacher.endpoint", c.teacher.endpoint));
    f.push_back(COTDRIVE_FIELD(std::string, "teacher.model", c.teacher.model));
    f.push_back(COTDRIVE_FIELD(double, "teacher.timeout_seconds", c.teacher.timeout_seconds));
    f.push_back(COTDRIVE_FIELD(int, "teacher.max_retries", c.teacher.max_retries));
    f.push_back(COTDRIVE_FIELD(double, "teacher.backoff_seconds", c.teacher.backoff_seconds));
    f.push_back(COTDRIVE_FIELD(double, "teacher.rate_limit", c.teacher.rate_limit));
    f.push_back(COTDRIVE_FIELD(int, "teacher.max_tokens", c.teacher.max_tokens));

    f.push_back(COTDRIVE_FIELD(int, "student.layers", c.student.layers));
    f.push_back(COTDRIVE_FIELD(int, "student.width", c.student.width));
    f.push_back(COTDRIVE_FIELD(int, "student.heads", c.student.heads));
    f.push_back(COTDRIVE_FIELD(int, "student.max_length", c.student.max_length));
    f.push_back(COTDRIVE_FIELD(int, "student.mlp_ratio", c.student.mlp_ratio));
    f.push_back(COTDRIVE_FIELD(double, "student.learning_rate", c.student_train.learning_rate));
    f.push_back(COTDRIVE_FIELD(int, "student.batch_size", c.student_train.batch_size));
    f.push_back(COTDRIVE_FIELD(int, "student.epochs", c.student_train.epochs));
    f.push_back(COTDRIVE_FIELD(double, "student.weight_decay", c.student_train.weight_decay));
    f.push_back(COTDRIVE_FIELD(double, "student.clip_norm", c.student_train.clip_norm));
    f.push_back(COTDRIVE_FIELD(bool, "student.mask_prompt", c.student_train.mask_prompt));
    f.push_back(COTDRIVE_FIELD(int, "distill.vocab_size", c.distill.vocab_size));
    f.push_back(COTDRIVE_FIELD(int, "distill.max_pairs", c.distill.max_pairs));
    f.push_back(COTDRIVE_FIELD(int, "distill.eval_pairs", c.distill.eval_pairs));

    f.push_back(COTDRIVE_FIELD(std::string, "model.text_encoder", c.text_encoder));
    f.push_back(COTDRIVE_FIELD(int, "model.hidden", c.model.hidden));
    f.push_back(COTDRIVE_FIELD(int, "model.heads", c.model.heads));
    f.push_back(COTDRIVE_FIELD(int, "model.interaction_layers", c.model.interaction_layers));
    f.push_back(COTDRIVE_FIELD(int, "model.key_dim", c.model.key_dim));
    f.push_back(COTDRIVE_FIELD(int, "model.members_per_family", c.model.members_per_family));
    f.push_back(COTDRIVE_FIELD(int, "model.member_width", c.model.member_width));
    f.push_back(COTDRIVE_FIELD(int, "model.member_heads", c.model.member_heads));
    f.push_back(COTDRIVE_FIELD(int, "model.maneuver_embedding", c.model.maneuver_embedding));
    f.push_back(COTDRIVE_FIELD(int, "model.text_width", c.model.text_width));
    f.push_back(COTDRIVE_FIELD(double, "model.alpha", c.model.alpha));
    f.push_back(COTDRIVE_FIELD(bool, "model.average_ensemble_entropy", c.model.average_ensemble_entropy));
    f.push_back(enum_field(
        "model.nll_form",
        [](const ExperimentConfig& c) {
          return std::string(c.model.nll_form == kernels::NllForm::standard ? "standard" : "literal");
        },
        [](ExperimentConfig& c, const std::string& s) {
          if (s != "standard" && s != "literal") throw ConfigError("model.nll_form: expected standard or literal");
          c.model.nll_form = s == "standard" ? kernels::NllForm::standard : kernels::NllForm::literal;
        }));
    f.push_back(COTDRIVE_FIELD(bool, "model.nll_step_mean", c.model.nll_step_mean));
    f.push_back(COTDRIVE_FIELD(bool, "model.cv_anchor", c.model.cv_anchor));
    f.push_back(COTDRIVE_FIELD(bool, "model.detach_ensemble_stats", c.model.detach_ensemble_stats));
    f.push_back(COTDRIVE_FIELD(double, "model.residual_scale", c.model.residual_scale));
    f.push_back(COTDRIVE_FIELD(double, "model.probability_floor", c.model.probability_floor));

    f.push_back(COTDRIVE_FIELD(int, "train.epochs", c.train.epochs));
    f.push_back(COTDRIVE_FIELD(int, "train.batch_size", c.train.batch_size));
    f.push_back(COTDRIVE_FIELD(double, "train.lr_max", c.train.lr_max));
    f.push_back(COTDRIVE_FIELD(double, "train.lr_min", c.train.lr_min));
    f.push_back(COTDRIVE_FIELD(int, "train.restart_epochs", c.train.restart_epochs));
    f.push_back(COTDRIVE_FIELD(double, "train.clip_norm", c.train.clip_norm));
    f.push_back(COTDRIVE_FIELD(double, "train.weight_decay", c.train.weight_decay));

    f.push_back(int_list("eval.horizons", &EvalSection::horizons));
    f.push_back(int_list("eval.ks", &EvalSection::ks));
    f.push_back(COTDRIVE_FIELD(double, "eval.miss_threshold", c.eval.miss_threshold));
    f.push_back(COTDRIVE_FIELD(std::string, "eval.rmse_convention", c.eval.rmse_convention));
    f.push_back(COTDRIVE_FIELD(std::string, "eval.miss_convention", c.eval.miss_convention));
    f.push_back(COTDRIVE_FIELD(int, "eval.plot_samples", c.eval.plot_samples));

    f.push_back(COTDRIVE_FIELD(std::uint64_t, "seed", c.seed));
    f.push_back(COTDRIVE_FIELD(std::string, "out", c.out));
    return f;
  }();
  return table;
}

#undef COTDRIVE_FIELD

}  // namespace

ExperimentConfig::ExperimentConfig() {
  synth.scenes = 2000;
  // Desk-scale student; the vocabulary size comes from the trained tokenizer.
  student.layers = 2;
  student.width = 64;
  student.heads = 4;
  student.max_length = 512;
  student_train.learning_rate = 3e-3;
  student_train.batch_size = 4;
  student_train.epochs = 30;
  student_train.weight_decay = 0.0;
}

void ExperimentConfig::validate() const {
  if (data.source != "synthetic" && data.source != "file")
    throw ConfigError("data.source: expected synthetic or file");
  if (data.source == "file" && data.path.empty()) throw ConfigError("data.path: required when data.source is file");
  try {
    ingest::trajectory_format_from_string(data.format);
  } catch (const Error&) {
    throw ConfigError("data.format: expected csv or jsonl");
  }
  if (!(data.native_hz > 0)) throw ConfigError("data.native_hz: must be positive");
  if (synth.scenes == 0) throw ConfigError("synth.scenes: must be positive");
  if (synth.max_neighbors < 0) throw ConfigError("synth.max_neighbors: must be non-negative");
  segment.validate();
  const double s = split.train + split.val + split.test;
  if (split.train <= 0 || split.val < 0 || split.test < 0 || std::abs(s - 1.0) > 1e-9)
    throw ConfigError("split: ratios must be non-negative, train positive, and sum to 1");
  if (annotate.source != "mock" && annotate.source != "live" && annotate.source != "student")
    throw ConfigError("annotate.source: expected mock, live or student");
  if (annotate.parallelism < 1) throw ConfigError("annotate.parallelism: must be at least 1");
  if (annotate.flush_every < 1) throw ConfigError("annotate.flush_every: must be at least 1");
  if (annotate.max_new_tokens < 1) throw ConfigError("annotate.max_new_tokens: must be positive");
  if (text_encoder != "hashed" && text_encoder != "student")
    throw ConfigError("model.text_encoder: expected hashed or student");
  if (distill.vocab_size < 257) throw ConfigError("distill.vocab_size: must exceed the 256 byte tokens");
  if (distill.max_pairs < 0 || distill.eval_pairs < 0) throw ConfigError("distill: pair counts must be non-negative");
  auto spec = student;
  spec.vocab_size = distill.vocab_size;
  spec.validate();
  student_train.validate();
  model.validate();
  train.validate();
  if (model.history_frames != segment.history_frames() || model.future_frames != segment.future_frames())
    throw ConfigError("model: history/future lengths disagree with segmentation");
  if (text_encoder == "student" && model.text_width != student.width)
    throw ConfigError("model.text_width: must equal student.width with the student text encoder");
  if (eval.rmse_convention != "per_coordinate" && eval.rmse_convention != "euclidean")
    throw ConfigError("eval.rmse_convention: expected per_coordinate or euclidean");
  if (eval.miss_convention != "final_displacement" && eval.miss_convention != "max_over_frames")
    throw ConfigError("eval.miss_convention: expected final_displacement or max_over_frames");
  for (int k : eval.ks)
    if (k < 1 || k > ingest::kManeuverCount) throw ConfigError("eval.ks: each k must lie in [1, 9]");
  for (int h : eval.horizons)
    if (h < 1 || h * segment.hz > segment.future_frames()) throw ConfigError("eval.horizons: beyond the future span");
  if (eval.plot_samples < 0) throw ConfigError("eval.plot_samples: must be non-negative");
  if (out.empty()) throw ConfigError("out: output directory must be set");
}

json ExperimentConfig::to_flat() const {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j;
}

ExperimentConfig ExperimentConfig::from_flat(const json& flat) {
  if (!flat.is_object()) throw ConfigError("config: expected an object of dotted keys");
  ExperimentConfig c;
  for (const auto& [key, value] : flat.items()) {
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->set(c, value);
  }
  // History and future lengths follow the segmentation.
  c.model.history_frames = c.segment.history_frames();
  c.model.future_frames = c.segment.future_frames();
  c.validate();
  return c;
}

std::string ExperimentConfig::render() const { return to_flat().dump(2) + "\n"; }

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  try {
    return from_flat(j);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  return parse(read_file(path), path.string());
}

std::string ExperimentConfig::hash() const {
  json j = to_flat();
  j.erase("out");
  j.erase("annotate.parallelism");
  j.erase("annotate.flush_every");
  return hex64(fnv1a64(j.dump()));
}

metrics::MetricConfig ExperimentConfig::metric_config() const {
  metrics::MetricConfig m;
  m.hz = segment.hz;
  m.horizons = eval.horizons;
  m.ks = eval.ks;
  m.miss_threshold = eval.miss_threshold;
  m.rmse = eval.rmse_convention == "euclidean" ? metrics::RmseConvention::euclidean
                                               : metrics::RmseConvention::per_coordinate;
  m.miss = eval.miss_convention == "max_over_frames" ? metrics::MissConvention::max_over_frames
                                                     : metrics::MissConvention::final_displacement;
  return m;
}

std::uint64_t ExperimentConfig::stage_seed(std::string_view stage) const {
  return splitmix64(seed ^ fnv1a64(stage));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace cotdrive::experiment
