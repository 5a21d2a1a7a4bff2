#include "cotdrive/metrics/report.hpp"

#include <cstdio>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/forecast/train.hpp"

namespace cotdrive::metrics {

namespace {

using ingest::AgentClass;
constexpr AgentClass kClasses[] = {AgentClass::vehicle, AgentClass::pedestrian, AgentClass::bicycle};

Path matrix_path(const nn::Matrix& m) {
  Path p;
  p.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) p.push_back({m(i, 0), m(i, 1)});
  return p;
}

}  // namespace

MetricReport compute_report(const std::vector<SamplePrediction>& samples, const MetricConfig& config) {
  if (samples.empty()) throw UndefinedMetricError("evaluation: no samples");
  MetricReport r;
  r.samples = samples.size();
  std::vector<Path> best, truth;
  std::map<AgentClass, std::pair<std::vector<Path>, std::vector<Path>>> by_class;
  std::size_t labelled = 0, correct = 0;
  for (const auto& s : samples) {
    if (s.ranked.empty()) throw ArgumentError("evaluation: sample " + s.scene_ref + " has no candidates");
    best.push_back(s.ranked.front());
    truth.push_back(s.truth);
    by_class[s.agent_class].first.push_back(s.ranked.front());
    by_class[s.agent_class].second.push_back(s.truth);
    if (s.true_maneuver >= 0 && s.predicted_maneuver >= 0) {
      ++labelled;
      correct += s.true_maneuver == s.predicted_maneuver;
    }
  }
  r.rmse = rmse_by_horizon(best, truth, config.hz, config.horizons, config.rmse);
  const AdeFde pooled = ade_fde(best, truth);
  r.ade = pooled.ade;
  r.fde = pooled.fde;
  for (const auto& [cls, pt] : by_class) r.per_class[cls] = ade_fde(pt.first, pt.second);
  if (r.per_class.size() == 3) r.weighted = wsade_wsfde(r.per_class, config.weights);
  for (int k : config.ks) {
    if (k < 1 || k > ingest::kManeuverCount) throw ArgumentError("evaluation: k must be in [1, 9]");
    MinKSummary m;
    for (const auto& s : samples) {
      const std::size_t n = std::min(static_cast<std::size_t>(k), s.ranked.size());
      const std::vector<Path> cands(s.ranked.begin(), s.ranked.begin() + static_cast<long>(n));
      const MinK one = min_ade_fde_mr(cands, s.truth, config.miss_threshold, config.miss);
      m.min_ade += one.min_ade;
      m.min_fde += one.min_fde;
      m.miss_rate += one.miss ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(samples.size());
    m.min_ade /= n;
    m.min_fde /= n;
    m.miss_rate /= n;
    r.min_k[k] = m;
  }
  if (labelled > 0) r.maneuver_accuracy = static_cast<double>(correct) / static_cast<double>(labelled);
  return r;
}

std::vector<std::pair<std::string, double>> MetricReport::entries() const {
  std::vector<std::pair<std::string, double>> e;
  e.emplace_back("samples", static_cast<double>(samples));
  for (const auto& [h, v] : rmse) e.emplace_back("rmse." + std::to_string(h) + "s", v);
  e.emplace_back("ade", ade);
  e.emplace_back("fde", fde);
  for (AgentClass c : kClasses) {
    auto it = per_class.find(c);
    if (it == per_class.end()) continue;
    const std::string name(ingest::to_string(c));
    e.emplace_back("count." + name, static_cast<double>(it->second.count));
    e.emplace_back("ade." + name, it->second.ade);
    e.emplace_back("fde." + name, it->second.fde);
  }
  if (weighted) {
    e.emplace_back("wsade", weighted->wsade);
    e.emplace_back("wsfde", weighted->wsfde);
  }
  for (const auto& [k, m] : min_k) {
    const std::string s = ".k" + std::to_string(k);
    e.emplace_back("min_ade" + s, m.min_ade);
    e.emplace_back("min_fde" + s, m.min_fde);
    e.emplace_back("mr" + s, m.miss_rate);
  }
  if (maneuver_accuracy) e.emplace_back("maneuver_accuracy", *maneuver_accuracy);
  if (text) {
    e.emplace_back("bert_p", text->precision);
    e.emplace_back("bert_r", text->recall);
    e.emplace_back("bert_f1", text->f1);
  }
  return e;
}

std::string MetricReport::render_kv() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " " + format_roundtrip(v) + "\n";
  return out;
}

std::string MetricReport::render_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %12s\n", "metric", "value");
  out += line;
  out += std::string(35, '-') + "\n";
  for (const auto& [k, v] : entries()) {
    const bool count = k == "samples" || k.rfind("count.", 0) == 0;
    std::snprintf(line, sizeof line, "%-22s %12s\n", k.c_str(),
                  count ? std::to_string(static_cast<long long>(v)).c_str() : format_fixed(v, 4).c_str());
    out += line;
  }
  if (!weighted) out += "(wsade/wsfde undefined: not every agent class is present)\n";
  return out;
}

std::vector<SamplePrediction> to_samples(const std::vector<forecast::ForecastOutput>& outputs,
                                         const std::vector<forecast::EncodedWindow>& windows) {
  if (outputs.size() != windows.size()) throw ArgumentError("evaluation: outputs and windows differ in count");
  std::vector<SamplePrediction> out;
  out.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& w = windows[i];
    if (w.truth.rows() == 0) throw ArgumentError("evaluation: window " + w.scene_ref + " has no future");
    SamplePrediction s;
    s.scene_ref = w.scene_ref;
    s.agent_class = w.target_class;
    s.truth = matrix_path(w.truth);
    for (const auto& c : forecast::select_topk(outputs[i], ingest::kManeuverCount)) s.ranked.push_back(c.path);
    s.predicted_maneuver = outputs[i].most_likely();
    s.true_maneuver = w.maneuver;
    out.push_back(std::move(s));
  }
  return out;
}

MetricReport evaluate_dataset(const forecast::ForecastNet& net, const std::vector<forecast::EncodedWindow>& windows,
                              const MetricConfig& config, int batch_size) {
  if (windows.empty()) throw UndefinedMetricError("evaluation: empty dataset");
  return compute_report(to_samples(forecast::predict_all(net, windows, batch_size), windows), config);
}

std::vector<SamplePrediction> baseline_samples(const std::vector<forecast::EncodedWindow>& windows, Baseline baseline) {
  std::vector<SamplePrediction> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.truth.rows() == 0) throw ArgumentError("baseline: window " + w.scene_ref + " has no future");
    SamplePrediction s;
    s.scene_ref = w.scene_ref;
    s.agent_class = w.target_class;
    s.truth = matrix_path(w.truth);
    if (baseline == Baseline::constant_velocity) {
      s.ranked.push_back(matrix_path(w.anchor));
    } else {
      // Windows are in the target frame, so the last observed position is the origin.
      s.ranked.push_back(Path(static_cast<std::size_t>(w.truth.rows()), {0.0, 0.0}));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cotdrive::metrics
