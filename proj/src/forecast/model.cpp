#include "cotdrive/forecast/model.hpp"

#include <cmath>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/nn/checkpoint.hpp"

namespace cotdrive::forecast {

using nn::Matrix;
using nn::Var;

void ForecastConfig::validate() const {
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0)
    throw ConfigError("forecast: hidden size must be a positive multiple of heads");
  if (key_dim <= 0) throw ConfigError("forecast: key_dim (d_k) must be positive");
  if (interaction_layers < 1) throw ConfigError("forecast: need at least one interaction layer");
  if (members_per_family < 1) throw ConfigError("forecast: need at least one member per family");
  if (member_width <= 0 || member_heads <= 0 || member_width % member_heads != 0)
    throw ConfigError("forecast: member width must be a positive multiple of member heads");
  if (maneuver_embedding <= 0 || text_width <= 0) throw ConfigError("forecast: widths must be positive");
  if (history_frames < 2 || future_frames < 1) throw ConfigError("forecast: need >= 2 history and >= 1 future frames");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("forecast: alpha must lie in [0, 1]");
  if (!(probability_floor > 0.0 && probability_floor < 1.0)) throw ConfigError("forecast: bad probability floor");
  if (!(residual_scale > 0.0)) throw ConfigError("forecast: residual_scale must be positive");
}

nlohmann::json ForecastConfig::to_json() const {
  return {{"hidden", hidden},
          {"heads", heads},
          {"interaction_layers", interaction_layers},
          {"key_dim", key_dim},
          {"members_per_family", members_per_family},
          {"member_width", member_width},
          {"member_heads", member_heads},
          {"maneuver_embedding", maneuver_embedding},
          {"history_frames", history_frames},
          {"future_frames", future_frames},
          {"text_width", text_width},
          {"alpha", alpha},
          {"average_ensemble_entropy", average_ensemble_entropy},
          {"nll_form", nll_form == kernels::NllForm::standard ? "standard" : "literal"},
          {"nll_step_mean", nll_step_mean},
          {"cv_anchor", cv_anchor},
          {"detach_ensemble_stats", detach_ensemble_stats},
          {"residual_scale", residual_scale},
          {"probability_floor", probability_floor},
          {"scales", {{"position", scales.position}, {"speed", scales.speed}, {"acceleration", scales.acceleration}}}};
}

ForecastConfig ForecastConfig::from_json(const nlohmann::json& j) {
  ForecastConfig c;
  try {
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.interaction_layers = j.at("interaction_layers").get<int>();
    c.key_dim = j.at("key_dim").get<int>();
    c.members_per_family = j.at("members_per_family").get<int>();
    c.member_width = j.at("member_width").get<int>();
    c.member_heads = j.at("member_heads").get<int>();
    c.maneuver_embedding = j.at("maneuver_embedding").get<int>();
    c.history_frames = j.at("history_frames").get<int>();
    c.future_frames = j.at("future_frames").get<int>();
    c.text_width = j.at("text_width").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.average_ensemble_entropy = j.at("average_ensemble_entropy").get<bool>();
    const auto form = j.at("nll_form").get<std::string>();
    if (form != "standard" && form != "literal") throw ConfigError("forecast: unknown nll_form '" + form + "'");
    c.nll_form = form == "standard" ? kernels::NllForm::standard : kernels::NllForm::literal;
    c.nll_step_mean = j.at("nll_step_mean").get<bool>();
    c.cv_anchor = j.at("cv_anchor").get<bool>();
    c.detach_ensemble_stats = j.value("detach_ensemble_stats", true);
    c.residual_scale = j.at("residual_scale").get<double>();
    c.probability_floor = j.at("probability_floor").get<double>();
    const auto& s = j.at("scales");
    c.scales = {s.at("position").get<double>(), s.at("speed").get<double>(), s.at("acceleration").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("forecast config: ") + e.what());
  }
  c.validate();
  return c;
}

ForecastNet::ForecastNet(const ForecastConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int h = config_.hidden, mw = config_.member_width;
  sem_proj_ = nn::Linear(params_, "semantic.proj", config_.text_width, h, rng);
  temp_in_ = nn::Linear(params_, "temporal.in", kStateFeatures, h, rng);
  temp_lstm_ = nn::Lstm(params_, "temporal.lstm", h, h, rng);
  fuse1_ = nn::Linear(params_, "fusion.fc1", 2 * h, h, rng);
  fuse2_ = nn::Linear(params_, "fusion.fc2", h, h, rng);
  inter_in_ = nn::Linear(params_, "interaction.in", kStateFeatures, h, rng);
  for (int l = 0; l < config_.interaction_layers; ++l) {
    inter_attn_.emplace_back(params_, "interaction.attn" + std::to_string(l), h, config_.heads, rng);
    inter_norm_.emplace_back(params_, "interaction.norm" + std::to_string(l), h);
  }
  inter_out_ = nn::Linear(params_, "interaction.out", h, h, rng);
  wq_ = nn::Linear(params_, "cross.query", h, config_.key_dim, rng);
  wk_ = nn::Linear(params_, "cross.key", h, config_.key_dim, rng);
  wv_ = nn::Linear(params_, "cross.value", h, h, rng);
  time_w_ = params_.add("decoder.time.weight",
                        nn::xavier_uniform(config_.future_frames, config_.history_frames, rng));
  time_b_ = params_.add("decoder.time.bias", Matrix::Zero(config_.future_frames, 1));

  for (int f = 0; f < config_.members_per_family; ++f)
    m_lstm_.emplace_back(params_, "member.lstm" + std::to_string(f), h, mw, rng);
  for (int f = 0; f < config_.members_per_family; ++f) {
    const std::string n = "member.tcn" + std::to_string(f);
    m_tcn_.push_back({nn::Linear(params_, n + ".conv0", 3 * h, mw, rng),
                      nn::Linear(params_, n + ".conv1", 3 * mw, mw, rng)});
  }
  for (int f = 0; f < config_.members_per_family; ++f) {
    const std::string n = "member.attn" + std::to_string(f);
    m_att_in_.emplace_back(params_, n + ".in", h, mw, rng);
    m_att_.emplace_back(params_, n + ".self", mw, config_.member_heads, rng);
  }
  for (int q = 0; q < config_.ensemble_size(); ++q)
    m_head_.emplace_back(params_, "member.head" + std::to_string(q), mw, ingest::kManeuverCount, rng);

  man_emb_ = nn::Embedding(params_, "decoder.maneuver", ingest::kManeuverCount, config_.maneuver_embedding, rng, 0.5);
  dec_cond_ = nn::Linear(params_, "decoder.cond", ingest::kManeuverCount + 1 + config_.maneuver_embedding, 4 * h, rng);
  dec_lstm_ = nn::Lstm(params_, "decoder.lstm", h, h, rng);
  dec_mlp_ = nn::Linear(params_, "decoder.fc", h, h, rng);
  dec_out_ = nn::Linear(params_, "decoder.out", h, 5, rng, 0.1);
}

namespace {

std::vector<int> repeat_index(int batch, int times) {
  std::vector<int> idx(static_cast<std::size_t>(batch * times));
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < times; ++t) idx[static_cast<std::size_t>(b * times + t)] = b;
  return idx;
}

/// Rows b*len + t for every b at a fixed t (or -1 when t is out of range).
std::vector<int> step_rows(int batch, int len, int t) {
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) idx[static_cast<std::size_t>(b)] = (t >= 0 && t < len) ? b * len + t : -1;
  return idx;
}

/// Rows shifted back by `d` frames within each length-`len` group, zero-padded.
std::vector<int> shifted_rows(int batch, int len, int d) {
  std::vector<int> idx(static_cast<std::size_t>(batch * len));
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < len; ++t) idx[static_cast<std::size_t>(b * len + t)] = t - d >= 0 ? b * len + t - d : -1;
  return idx;
}

Var concat2(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return nn::concat_cols(parts);
}

void check_batch(const std::vector<const EncodedWindow*>& batch, const ForecastConfig& cfg) {
  if (batch.empty()) throw ArgumentError("forecast: empty batch");
  for (const auto* w : batch) {
    if (w->history != cfg.history_frames)
      throw ShapeError("forecast: window " + w->scene_ref + " has " + std::to_string(w->history) +
                       " history frames, model expects " + std::to_string(cfg.history_frames));
    if (w->semantic.size() != cfg.text_width)
      throw ShapeError("forecast: semantic width " + std::to_string(w->semantic.size()) + " != " +
                       std::to_string(cfg.text_width));
    if (w->anchor.rows() != cfg.future_frames) throw ShapeError("forecast: anchor length mismatch");
  }
}

}  // namespace

Var ForecastNet::semantic_features(const Matrix& pooled) const {
  if (pooled.cols() != config_.text_width) throw ShapeError("forecast: pooled text width mismatch");
  return sem_proj_(nn::constant(pooled));
}

Var ForecastNet::temporal_features(const std::vector<const EncodedWindow*>& batch) const {
  const int B = static_cast<int>(batch.size()), H = config_.history_frames;
  Matrix x(B * H, kStateFeatures);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < H; ++t) x.row(b * H + t) = batch[static_cast<std::size_t>(b)]->agent_features.row(t * batch[static_cast<std::size_t>(b)]->agents);
  Var e = nn::elu(temp_in_(nn::constant(std::move(x))));
  std::vector<Var> steps;
  for (int t = 0; t < H; ++t) {
    const auto idx = step_rows(B, H, t);
    steps.push_back(nn::gather_rows(e, idx));
  }
  Var stacked = nn::concat_rows(temp_lstm_.run(steps));  // t*B + b
  std::vector<int> order(static_cast<std::size_t>(B * H));
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < H; ++t) order[static_cast<std::size_t>(b * H + t)] = t * B + b;
  return nn::gather_rows(stacked, order);
}

Var ForecastNet::multimodal_features(const Var& semantic, const Var& temporal, int history) const {
  if (semantic.cols() != config_.hidden || temporal.cols() != config_.hidden)
    throw ShapeError("fuse_multimodal: feature widths must equal the hidden size");
  if (temporal.rows() != semantic.rows() * history) throw ShapeError("fuse_multimodal: row count mismatch");
  Var s = nn::gather_rows(semantic, repeat_index(static_cast<int>(semantic.rows()), history));
  return fuse2_(nn::elu(fuse1_(concat2(s, temporal))));
}

Var ForecastNet::interaction_features(const std::vector<const EncodedWindow*>& batch) const {
  const int B = static_cast<int>(batch.size()), H = config_.history_frames;
  int rows = 0;
  for (const auto* w : batch) rows += H * w->agents;
  Matrix x(rows, kStateFeatures);
  auto layout = std::make_shared<kernels::AttentionLayout>();
  layout->heads = config_.heads;
  layout->self_fallback = true;
  layout->key_valid.reserve(static_cast<std::size_t>(rows));
  layout->q_offsets.push_back(0);
  std::vector<int> target_rows;
  target_rows.reserve(static_cast<std::size_t>(B * H));
  int r = 0;
  for (const auto* w : batch) {
    x.middleRows(r, H * w->agents) = w->agent_features;
    layout->key_valid.insert(layout->key_valid.end(), w->valid.begin(), w->valid.end());
    for (int t = 0; t < H; ++t) {
      target_rows.push_back(r + t * w->agents);
      layout->q_offsets.push_back(r + (t + 1) * w->agents);
    }
    r += H * w->agents;
  }
  layout->k_offsets = layout->q_offsets;
  Var h = nn::elu(inter_in_(nn::constant(std::move(x))));
  std::shared_ptr<const kernels::AttentionLayout> shared = layout;
  for (int l = 0; l < config_.interaction_layers; ++l)
    h = inter_norm_[static_cast<std::size_t>(l)](nn::add(h, inter_attn_[static_cast<std::size_t>(l)](h, shared)));
  return nn::elu(inter_out_(nn::gather_rows(h, target_rows)));
}

Var ForecastNet::member_logits(int q, const Var& seq, int B) const {
  const int H = config_.history_frames, per = config_.members_per_family;
  const int family = q / per, f = q % per;
  Var feat;
  if (family == 0) {
    // Recurrent member reading every (f+1)-th frame, ending at the anchor.
    const int stride = f + 1;
    std::vector<Var> steps;
    std::vector<int> frames;
    for (int t = H - 1; t >= 0; t -= stride) frames.insert(frames.begin(), t);
    for (int t : frames) steps.push_back(nn::gather_rows(seq, step_rows(B, H, t)));
    feat = m_lstm_[static_cast<std::size_t>(f)].run(steps).back();
  } else if (family == 1) {
    // Causal dilated convolutions, kernel 3.
    int d = 1 << f;
    Var x = seq;
    for (const auto& conv : m_tcn_[static_cast<std::size_t>(f)]) {
      const Var parts[] = {x, nn::gather_rows(x, shifted_rows(B, H, d)), nn::gather_rows(x, shifted_rows(B, H, 2 * d))};
      x = nn::elu(conv(nn::concat_cols(parts)));
      d *= 2;
    }
    feat = nn::gather_rows(x, step_rows(B, H, H - 1));
  } else {
    Var x = nn::elu(m_att_in_[static_cast<std::size_t>(f)](seq));
    auto layout = std::make_shared<const kernels::AttentionLayout>(
        kernels::AttentionLayout::uniform(B, H, H, config_.member_heads));
    x = nn::add(x, m_att_[static_cast<std::size_t>(f)](x, layout));
    std::vector<int> off(static_cast<std::size_t>(B) + 1);
    for (int b = 0; b <= B; ++b) off[static_cast<std::size_t>(b)] = b * H;
    feat = nn::segment_mean(x, off);
  }
  return m_head_[static_cast<std::size_t>(q)](feat);
}

ForecastGraph ForecastNet::encode(const std::vector<const EncodedWindow*>& batch) const {
  check_batch(batch, config_);
  const int B = static_cast<int>(batch.size()), H = config_.history_frames;
  ForecastGraph g;
  g.batch = B;
  Matrix pooled(B, config_.text_width);
  for (int b = 0; b < B; ++b) pooled.row(b) = batch[static_cast<std::size_t>(b)]->semantic;
  g.semantic = semantic_features(pooled);
  g.temporal = temporal_features(batch);
  g.multimodal = multimodal_features(g.semantic, g.temporal, H);
  g.spatial = interaction_features(batch);

  auto layout = std::make_shared<kernels::AttentionLayout>();
  for (int b = 0; b <= B; ++b) {
    layout->q_offsets.push_back(b);
    layout->k_offsets.push_back(b * H);
  }
  g.cross = nn::attention(wq_(g.semantic), wk_(g.multimodal), wv_(g.spatial), layout);

  // Residual around the cross-modal attention: the query stream is added
  // back, so annotation content reaches the heads and not only the weights.
  Var context = nn::add(g.semantic, g.cross);
  Var seq = nn::add(g.spatial, nn::gather_rows(context, repeat_index(B, H)));
  g.future = nn::elu(nn::time_mix(seq, time_w_, time_b_, H));

  const int Q = config_.ensemble_size();
  Var sum_probs;
  for (int q = 0; q < Q; ++q) {
    Var p = nn::softmax_rows(member_logits(q, seq, B));
    g.member_probs.push_back(p);
    sum_probs = sum_probs.defined() ? nn::add(sum_probs, p) : p;
  }
  g.mean_probs = nn::scale(sum_probs, 1.0 / Q);
  Var ce;
  for (const auto& p : g.member_probs) {
    Var term = nn::row_sum(nn::mul(g.mean_probs, nn::log_floor(p, config_.probability_floor)));
    ce = ce.defined() ? nn::add(ce, term) : term;
  }
  g.avg_ce = nn::scale(ce, config_.average_ensemble_entropy ? -1.0 / Q : -1.0);
  return g;
}

Var ForecastNet::decode(const ForecastGraph& g, const std::vector<const EncodedWindow*>& batch,
                        const std::vector<int>& sample, const std::vector<int>& maneuver) const {
  if (sample.size() != maneuver.size() || sample.empty()) throw ArgumentError("decode: bad pair lists");
  for (int m : maneuver)
    if (m < 0 || m >= ingest::kManeuverCount) throw ArgumentError("decode: maneuver index out of range");
  const int R = static_cast<int>(sample.size()), F = config_.future_frames;
  const bool detach = config_.detach_ensemble_stats;
  const Var mean = detach ? nn::constant(g.mean_probs.value()) : g.mean_probs;
  const Var ce = detach ? nn::constant(g.avg_ce.value()) : g.avg_ce;
  const Var parts[] = {nn::gather_rows(mean, sample), nn::gather_rows(ce, sample), man_emb_(maneuver)};
  Var cond = dec_cond_(nn::concat_cols(parts));
  std::vector<Var> steps;
  std::vector<int> idx(static_cast<std::size_t>(R));
  for (int t = 0; t < F; ++t) {
    for (int r = 0; r < R; ++r) idx[static_cast<std::size_t>(r)] = sample[static_cast<std::size_t>(r)] * F + t;
    steps.push_back(nn::gather_rows(g.future, idx));
  }
  Var hs = nn::concat_rows(dec_lstm_.run(steps, cond));
  Var out = dec_out_(nn::elu(dec_mlp_(hs)));
  Var mu = nn::scale(nn::slice_cols(out, 0, 2), config_.residual_scale);
  if (config_.cv_anchor) {
    Matrix anchor(F * R, 2);
    for (int t = 0; t < F; ++t)
      for (int r = 0; r < R; ++r)
        anchor.row(t * R + r) = batch[static_cast<std::size_t>(sample[static_cast<std::size_t>(r)])]->anchor.row(t);
    mu = nn::add(mu, nn::constant(std::move(anchor)));
  }
  Var sigma = nn::add_scalar(nn::softplus(nn::slice_cols(out, 2, 2)), 1e-3);
  Var rho = nn::scale(nn::tanh(nn::slice_cols(out, 4, 1)), 0.99);
  const Var cols[] = {mu, sigma, rho};
  return nn::concat_cols(cols);
}

LossParts ForecastNet::stage2_loss(const std::vector<const EncodedWindow*>& batch) const {
  const int B = static_cast<int>(batch.size()), F = config_.future_frames;
  std::vector<int> sample(static_cast<std::size_t>(B)), gt(static_cast<std::size_t>(B));
  Matrix truth(F * B, 2);
  for (int b = 0; b < B; ++b) {
    const auto* w = batch[static_cast<std::size_t>(b)];
    if (w->maneuver < 0 || w->truth.rows() != F)
      throw ArgumentError("stage-2 loss: window " + w->scene_ref + " lacks a label or future");
    sample[static_cast<std::size_t>(b)] = b;
    gt[static_cast<std::size_t>(b)] = w->maneuver;
    for (int t = 0; t < F; ++t) truth.row(t * B + b) = w->truth.row(t);
  }
  ForecastGraph g = encode(batch);
  Var params = decode(g, batch, sample, gt);
  Var nll = nn::scale(nn::sum(nn::bivariate_nll(params, truth, config_.nll_form)), 1.0 / (config_.nll_step_mean ? B * F : B));
  Var ce = nn::scale(nn::sum(nn::log_floor(nn::pick(g.mean_probs, gt), config_.probability_floor)), -1.0 / B);
  LossParts out;
  out.nll = nll.scalar();
  out.ce = ce.scalar();
  out.total = nn::add(nn::scale(nll, config_.alpha), nn::scale(ce, 1.0 - config_.alpha));
  return out;
}

std::vector<ForecastOutput> ForecastNet::predict(const std::vector<const EncodedWindow*>& batch) const {
  nn::NoGradGuard guard;
  const int B = static_cast<int>(batch.size()), F = config_.future_frames, M = ingest::kManeuverCount;
  ForecastGraph g = encode(batch);
  std::vector<ForecastOutput> outs(static_cast<std::size_t>(B));

  // Members with non-finite output are dropped per sample and the
  // statistics recomputed from the rest.
  Matrix mean = g.mean_probs.value(), ce = g.avg_ce.value();
  for (int b = 0; b < B; ++b) {
    auto& o = outs[static_cast<std::size_t>(b)];
    o.scene_ref = batch[static_cast<std::size_t>(b)]->scene_ref;
    o.warnings = batch[static_cast<std::size_t>(b)]->warnings;
    std::vector<ManeuverDistribution> finite;
    for (std::size_t q = 0; q < g.member_probs.size(); ++q) {
      ManeuverDistribution d{};
      bool ok = true;
      for (int m = 0; m < M; ++m) {
        d[m] = g.member_probs[q].value()(b, m);
        ok = ok && std::isfinite(d[m]);
      }
      if (ok) finite.push_back(d);
      else o.warnings.push_back("ensemble member " + std::to_string(q) + " produced non-finite output; excluded");
    }
    if (finite.empty()) throw DivergenceError("forecast: every ensemble member is non-finite for " + o.scene_ref);
    o.ensemble = ensemble_statistics(finite, config_.average_ensemble_entropy, config_.probability_floor);
    o.maneuver_dist = o.ensemble.mean_probs;
    for (int m = 0; m < M; ++m) mean(b, m) = o.ensemble.mean_probs[m];
    ce(b, 0) = o.ensemble.avg_cross_entropy;
  }
  g.mean_probs = nn::constant(std::move(mean));
  g.avg_ce = nn::constant(std::move(ce));

  std::vector<int> sample, maneuver;
  for (int b = 0; b < B; ++b)
    for (int m = 0; m < M; ++m) sample.push_back(b), maneuver.push_back(m);
  const Matrix p = decode(g, batch, sample, maneuver).value();
  const int R = B * M;
  for (int b = 0; b < B; ++b)
    for (int m = 0; m < M; ++m) {
      auto& seq = outs[static_cast<std::size_t>(b)].per_maneuver_params[m];
      seq.resize(static_cast<std::size_t>(F));
      for (int t = 0; t < F; ++t) {
        const auto row = p.row(t * R + b * M + m);
        seq[static_cast<std::size_t>(t)] = {row(0), row(1), row(2), row(3), row(4)};
      }
    }
  return outs;
}

ForecastOutput ForecastNet::predict(const EncodedWindow& window) const { return predict({&window}).front(); }

Matrix cross_modal_attend(const Matrix& query, const Matrix& key, const Matrix& value) {
  if (query.cols() == 0) throw ConfigError("cross-modal attention: d_k must be positive");
  if (query.cols() != key.cols()) throw ShapeError("cross-modal attention: query/key widths differ");
  if (key.rows() != value.rows() || key.rows() == 0) throw ShapeError("cross-modal attention: key/value rows differ");
  Matrix logits = query * key.transpose() / std::sqrt(static_cast<double>(query.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits * value;
}

void save_forecast(const std::filesystem::path& path, const ForecastNet& net, const nlohmann::json& metadata) {
  nn::CheckpointData data;
  data.kind = "forecast";
  data.config = net.config().to_json();
  data.metadata = metadata;
  data.tensors = net.parameters().values();
  nn::save_checkpoint(path, data);
}

std::unique_ptr<ForecastNet> load_forecast(const std::filesystem::path& path, nlohmann::json* metadata) {
  auto data = nn::load_checkpoint(path);
  if (data.kind != "forecast") throw SchemaError(path.string() + " is a '" + data.kind + "' checkpoint, not a forecast model");
  auto net = std::make_unique<ForecastNet>(ForecastConfig::from_json(data.config), 0);
  net->parameters().load(data.tensors);
  if (metadata) *metadata = data.metadata;
  return net;
}

}  // namespace cotdrive::forecast
