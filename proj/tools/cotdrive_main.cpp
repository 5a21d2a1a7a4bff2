// Command-line driver for the experiment pipeline.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cotdrive/core/error.hpp"
#include "cotdrive/experiment/commands.hpp"

namespace ex = cotdrive::experiment;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// A value parses as JSON when it can (numbers, booleans, lists) and is a
// plain string otherwise.
json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

ex::ExperimentConfig resolve(const Common& c) {
  json flat = c.config_path.empty() ? ex::ExperimentConfig().to_flat() : ex::ExperimentConfig::load(c.config_path).to_flat();
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw cotdrive::ArgumentError("--set expects key=value, got '" + o + "'");
    const auto key = o.substr(0, eq);
    if (!flat.contains(key)) throw cotdrive::ConfigError("config: unknown key '" + key + "'");
    flat[key] = parse_value(o.substr(eq + 1));
  }
  if (c.seed) flat["seed"] = *c.seed;
  if (!c.out.empty()) flat["out"] = c.out;
  return ex::ExperimentConfig::from_flat(flat);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maneuver-conditioned trajectory forecasting pipeline"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON file of dotted config keys")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "Override one key, e.g. --set train.epochs=4");
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--out", common.out, "Run directory");
  };

  auto* synth = app.add_subcommand("synth", "Generate synthetic tracks with ground-truth maneuvers");
  auto* segment = app.add_subcommand("segment", "Cut, label, normalize and split scene windows");
  auto* annotate = app.add_subcommand("annotate", "Build the reasoning-annotation corpus");
  auto* distill = app.add_subcommand("distill", "Fine-tune the student on the corpus");
  auto* train = app.add_subcommand("train", "Train the forecasting network");
  auto* eval = app.add_subcommand("eval", "Score the model on the test split");
  auto* baselines = app.add_subcommand("baselines", "Score kinematic baselines on the test split");
  auto* forecast = app.add_subcommand("forecast", "Forecast windows from a JSONL file");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");
  for (auto* s : {synth, segment, annotate, distill, train, eval, baselines, forecast, show}) add_common(s);

  ex::TrainOptions train_opts;
  train->add_flag("--restart", train_opts.restart, "Discard any saved training state");
  train->add_option("--max-epochs", train_opts.max_epochs, "Stop after this many epochs in this run");
  std::string checkpoint, input, output;
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint (default: the run's best model)");
  forecast->add_option("--checkpoint", checkpoint, "Model checkpoint (default: the run's best model)");
  forecast->add_option("--input", input, "Windows JSONL")->required();
  forecast->add_option("--output", output, "Forecasts JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(common);
    json summary;
    if (*show) {
      std::cout << config.render();
      return 0;
    }
    if (*synth) summary = ex::cmd_synth(config);
    if (*segment) summary = ex::cmd_segment(config);
    if (*annotate) summary = ex::cmd_annotate(config);
    if (*distill) summary = ex::cmd_distill(config);
    if (*train) summary = ex::cmd_train(config, train_opts);
    if (*eval) summary = ex::cmd_eval(config, checkpoint);
    if (*baselines) summary = ex::cmd_baselines(config);
    if (*forecast) summary = ex::cmd_forecast(config, input, output, checkpoint);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const cotdrive::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return 2;
  }
}
