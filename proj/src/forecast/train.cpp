#include "cotdrive/forecast/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"

namespace cotdrive::forecast {

void ForecastTrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || restart_epochs <= 0) throw ConfigError("train: epochs, batch and restart period must be positive");
  if (!(lr_max > 0) || !(lr_min >= 0) || lr_min > lr_max) throw ConfigError("train: need 0 <= lr_min <= lr_max, lr_max > 0");
  if (clip_norm < 0 || weight_decay < 0) throw ConfigError("train: clip_norm and weight_decay must be non-negative");
}

nlohmann::json ForecastTrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size},         {"lr_max", lr_max},
          {"lr_min", lr_min},       {"restart_epochs", restart_epochs}, {"clip_norm", clip_norm},
          {"weight_decay", weight_decay}, {"seed", seed}};
}

ForecastTrainConfig ForecastTrainConfig::from_json(const nlohmann::json& j) {
  ForecastTrainConfig c;
  try {
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr_max = j.at("lr_max").get<double>();
    c.lr_min = j.at("lr_min").get<double>();
    c.restart_epochs = j.at("restart_epochs").get<int>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<std::vector<const EncodedWindow*>> batches_of(const std::vector<EncodedWindow>& data,
                                                          const std::vector<std::size_t>& order, int size) {
  std::vector<std::vector<const EncodedWindow*>> out;
  for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(size)) {
    std::vector<const EncodedWindow*> b;
    for (std::size_t i = s; i < std::min(order.size(), s + static_cast<std::size_t>(size)); ++i) b.push_back(&data[order[i]]);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> o(n);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

nlohmann::json loss_json(const LossSummary& l) { return {{"total", l.total}, {"nll", l.nll}, {"ce", l.ce}}; }
LossSummary loss_from(const nlohmann::json& j) {
  return {j.at("total").get<double>(), j.at("nll").get<double>(), j.at("ce").get<double>()};
}

}  // namespace

LossSummary evaluate_loss(const ForecastNet& net, const std::vector<EncodedWindow>& data, int batch_size) {
  if (data.empty()) throw ArgumentError("evaluate_loss: empty dataset");
  nn::NoGradGuard guard;
  LossSummary s;
  for (const auto& b : batches_of(data, identity(data.size()), batch_size)) {
    const LossParts p = net.stage2_loss(b);
    const double w = static_cast<double>(b.size());
    s.total += p.total.scalar() * w;
    s.nll += p.nll * w;
    s.ce += p.ce * w;
  }
  const double n = static_cast<double>(data.size());
  s.total /= n;
  s.nll /= n;
  s.ce /= n;
  return s;
}

std::vector<ForecastOutput> predict_all(const ForecastNet& net, const std::vector<EncodedWindow>& data, int batch_size) {
  std::vector<ForecastOutput> out;
  out.reserve(data.size());
  for (const auto& b : batches_of(data, identity(data.size()), batch_size)) {
    auto part = net.predict(b);
    for (auto& o : part) out.push_back(std::move(o));
  }
  return out;
}

ForecastTrainer::ForecastTrainer(ForecastNet& net, ForecastTrainConfig config)
    : net_(net),
      config_(config),
      adam_(net.parameters(), nn::AdamOptions{0.9, 0.999, 1e-8, config.weight_decay}),
      best_val_(std::numeric_limits<double>::infinity()) {
  config_.validate();
  best_ = net_.parameters().values();
}

EpochRecord ForecastTrainer::run_epoch(const std::vector<EncodedWindow>& train, const std::vector<EncodedWindow>& val) {
  if (finished()) throw ArgumentError("train: all epochs already done");
  if (train.empty()) throw ArgumentError("train: empty training set");
  if (!has_initial_ && !val.empty()) set_initial_val(evaluate_loss(net_, val, config_.batch_size));
  auto& params = net_.parameters();
  const auto start = params.values();

  auto order = identity(train.size());
  Rng rng = Rng(config_.seed).fork(static_cast<std::uint64_t>(epoch_));
  rng.shuffle(order);
  const auto batches = batches_of(train, order, config_.batch_size);
  const nn::CosineWarmRestarts schedule{config_.lr_max, config_.lr_min,
                                        static_cast<long>(config_.restart_epochs) * static_cast<long>(batches.size())};
  EpochRecord rec;
  rec.epoch = epoch_ + 1;
  for (const auto& b : batches) {
    params.zero_grad();
    LossParts loss = net_.stage2_loss(b);
    const double value = loss.total.scalar();
    if (!std::isfinite(value)) {
      params.load(start);
      throw DivergenceError("stage-2 loss became non-finite in epoch " + std::to_string(rec.epoch) +
                            "; weights restored to the start of the epoch");
    }
    nn::backward(loss.total);
    if (config_.clip_norm > 0) nn::clip_grad_norm(params, config_.clip_norm);
    rec.lr_end = schedule.rate(adam_.steps());
    adam_.step(rec.lr_end);
    const double w = static_cast<double>(b.size());
    rec.train.total += value * w;
    rec.train.nll += loss.nll * w;
    rec.train.ce += loss.ce * w;
  }
  for (const auto& [name, var] : params.entries())
    if (!var.value().allFinite()) {
      params.load(start);
      throw DivergenceError("parameter " + name + " became non-finite in epoch " + std::to_string(rec.epoch) +
                            "; weights restored to the start of the epoch");
    }
  const double n = static_cast<double>(train.size());
  rec.train.total /= n;
  rec.train.nll /= n;
  rec.train.ce /= n;
  rec.val = val.empty() ? rec.train : evaluate_loss(net_, val, config_.batch_size);
  if (rec.val.total < best_val_) {
    best_val_ = rec.val.total;
    best_epoch_ = rec.epoch;
    best_ = params.values();
  }
  history_.push_back(rec);
  ++epoch_;
  return rec;
}

void ForecastTrainer::load_best() { net_.parameters().load(best_); }

nlohmann::json epoch_to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"train", loss_json(r.train)}, {"val", loss_json(r.val)}, {"lr_end", r.lr_end}};
}

EpochRecord epoch_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.train = loss_from(j.at("train"));
  r.val = loss_from(j.at("val"));
  r.lr_end = j.at("lr_end").get<double>();
  return r;
}

nn::CheckpointData ForecastTrainer::snapshot(const nlohmann::json& metadata) const {
  nn::CheckpointData d;
  d.kind = "forecast-train";
  d.config = {{"model", net_.config().to_json()}, {"train", config_.to_json()}};
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : history_) hist.push_back(epoch_to_json(r));
  d.metadata = metadata;
  d.metadata["trainer"] = {{"epochs_done", epoch_},
                           {"adam_steps", adam_.steps()},
                           {"best_epoch", best_epoch_},
                           {"best_val", std::isfinite(best_val_) ? nlohmann::json(best_val_) : nlohmann::json()},
                           {"initial_val", has_initial_ ? loss_json(initial_val_) : nlohmann::json()},
                           {"history", std::move(hist)}};
  d.tensors = net_.parameters().values();
  for (auto& [name, m] : adam_.state()) d.tensors.emplace_back("adam/" + name, std::move(m));
  for (const auto& [name, m] : best_) d.tensors.emplace_back("best/" + name, m);
  return d;
}

void ForecastTrainer::restore(const nn::CheckpointData& d) {
  if (d.kind != "forecast-train") throw SchemaError("resume: '" + d.kind + "' is not a training-state checkpoint");
  if (ForecastConfig::from_json(d.config.at("model")) != net_.config())
    throw ConfigError("resume: model configuration differs from the checkpoint");
  if (ForecastTrainConfig::from_json(d.config.at("train")) != config_)
    throw ConfigError("resume: training configuration differs from the checkpoint");
  const auto& t = d.metadata.at("trainer");
  std::vector<std::pair<std::string, nn::Matrix>> weights, adam, best;
  for (const auto& [name, m] : d.tensors) {
    if (name.rfind("adam/", 0) == 0) adam.emplace_back(name.substr(5), m);
    else if (name.rfind("best/", 0) == 0) best.emplace_back(name.substr(5), m);
    else weights.emplace_back(name, m);
  }
  net_.parameters().load(weights);
  adam_.load_state(adam, t.at("adam_steps").get<long>());
  best_ = best;
  epoch_ = t.at("epochs_done").get<int>();
  best_epoch_ = t.at("best_epoch").get<int>();
  best_val_ = t.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : t.at("best_val").get<double>();
  has_initial_ = !t.at("initial_val").is_null();
  if (has_initial_) initial_val_ = loss_from(t.at("initial_val"));
  history_.clear();
  for (const auto& r : t.at("history")) history_.push_back(epoch_from_json(r));
}

}  // namespace cotdrive::forecast
