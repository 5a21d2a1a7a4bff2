#include "cotdrive/student/model.hpp"

#include <cmath>

#include "cotdrive/core/error.hpp"
#include "cotdrive/nn/checkpoint.hpp"

namespace cotdrive::student {

using nn::Matrix;
using nn::Var;

void StudentSpec::validate() const {
  if (vocab_size <= Tokenizer::kBaseVocab - 1 || layers <= 0 || width <= 0 || heads <= 0 || max_length <= 0 ||
      mlp_ratio <= 0)
    throw ConfigError("student model hyperparameters must be positive (vocabulary at least 258)");
  if (width % heads != 0) throw ConfigError("student width must be divisible by heads");
}

nlohmann::json StudentSpec::to_json() const {
  return {{"vocab_size", vocab_size}, {"layers", layers},         {"width", width},
          {"heads", heads},           {"max_length", max_length}, {"mlp_ratio", mlp_ratio}};
}

StudentSpec StudentSpec::from_json(const nlohmann::json& j) {
  StudentSpec s;
  s.vocab_size = j.at("vocab_size").get<int>();
  s.layers = j.at("layers").get<int>();
  s.width = j.at("width").get<int>();
  s.heads = j.at("heads").get<int>();
  s.max_length = j.at("max_length").get<int>();
  s.mlp_ratio = j.at("mlp_ratio").get<int>();
  s.validate();
  return s;
}

StudentModel::StudentModel(const StudentSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  const int d = spec_.width;
  tok_ = nn::Embedding(params_, "tok", spec_.vocab_size, d, rng);
  pos_ = nn::Embedding(params_, "pos", spec_.max_length, d, rng, 0.01);
  // Residual projections start small so depth does not blow up activations.
  const double res_gain = 1.0 / std::sqrt(2.0 * spec_.layers);
  for (int l = 0; l < spec_.layers; ++l) {
    const std::string p = "block" + std::to_string(l);
    ln1_.emplace_back(params_, p + ".ln1", d);
    attn_.emplace_back(params_, p + ".attn", d, spec_.heads, rng);
    ln2_.emplace_back(params_, p + ".ln2", d);
    fc1_.emplace_back(params_, p + ".fc1", d, spec_.mlp_ratio * d, rng);
    fc2_.emplace_back(params_, p + ".fc2", spec_.mlp_ratio * d, d, rng, res_gain);
  }
  ln_f_ = nn::LayerNorm(params_, "ln_f", d);
  head_ = nn::Linear(params_, "head", d, spec_.vocab_size, rng);
}

Var StudentModel::block(const Var& x, int l, std::shared_ptr<const kernels::AttentionLayout> layout) const {
  const auto i = static_cast<std::size_t>(l);
  Var h = nn::add(x, attn_[i](ln1_[i](x), std::move(layout)));
  return nn::add(h, fc2_[i](nn::gelu(fc1_[i](ln2_[i](h)))));
}

Var StudentModel::forward(const std::vector<const std::vector<int>*>& sequences) const {
  std::vector<int> ids, pos;
  auto layout = std::make_shared<kernels::AttentionLayout>();
  layout->heads = spec_.heads;
  layout->causal = true;
  layout->q_offsets.push_back(0);
  for (const auto* seq : sequences) {
    const int n = static_cast<int>(seq->size());
    if (n == 0) throw ArgumentError("student forward: empty sequence");
    if (n > spec_.max_length) throw ArgumentError("student forward: sequence longer than max_length");
    ids.push_back(Tokenizer::kBos);
    pos.push_back(0);
    for (int k = 0; k + 1 < n; ++k) {
      const int t = (*seq)[static_cast<std::size_t>(k)];
      if (t < 0 || t >= spec_.vocab_size) throw ArgumentError("student forward: token id out of range");
      ids.push_back(t);
      pos.push_back(k + 1);
    }
    layout->q_offsets.push_back(layout->q_offsets.back() + n);
  }
  layout->k_offsets = layout->q_offsets;
  Var x = nn::add(tok_(ids), pos_(pos));
  for (int l = 0; l < spec_.layers; ++l) x = block(x, l, layout);
  return head_(ln_f_(x));
}

Var StudentModel::stage1_loss(const std::vector<const TokenSequence*>& batch, bool mask_prompt) const {
  if (batch.empty()) throw ArgumentError("stage1_loss: empty batch");
  std::vector<const std::vector<int>*> seqs;
  std::vector<int> targets, keep, offsets{0};
  int row = 0;
  for (const auto* s : batch) {
    seqs.push_back(&s->tokens);
    for (int k = 0; k < s->length(); ++k, ++row) {
      targets.push_back(s->tokens[static_cast<std::size_t>(k)]);
      if (!mask_prompt || k >= s->boundary) keep.push_back(row);
    }
    if (static_cast<int>(keep.size()) == offsets.back())
      throw ArgumentError("stage1_loss: sequence " + s->id + " has no scored tokens");
    offsets.push_back(static_cast<int>(keep.size()));
  }
  Var nll = nn::token_nll(forward(seqs), targets);
  if (mask_prompt) nll = nn::gather_rows(nll, keep);
  return nn::mean(nn::segment_mean(nll, offsets));
}

Matrix StudentModel::embed(std::span<const int> ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), spec_.width);
  const Matrix& table = tok_.table().value();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= spec_.vocab_size) throw ArgumentError("embed: token id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

namespace {

using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;

Row layer_norm_row(const Row& x, const Matrix& g, const Matrix& b) {
  const double mu = x.mean();
  const double var = (x.array() - mu).square().mean();
  Row y = (x.array() - mu) / std::sqrt(var + 1e-5);
  return y.cwiseProduct(g.row(0)) + b.row(0);
}

double gelu(double x) {
  constexpr double c = 0.7978845608028654;
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

/// Incremental decoder state: per-layer keys and values of the tokens seen so far.
class KvCache {
 public:
  KvCache(const StudentSpec& spec, const nn::ParameterStore& p) : spec_(spec), p_(p) {
    k_.resize(static_cast<std::size_t>(spec.layers));
    v_.resize(static_cast<std::size_t>(spec.layers));
  }

  /// Appends `token` at the next position and returns next-token logits.
  Row step(int token) {
    const int d = spec_.width, H = spec_.heads, dh = d / H;
    if (len_ >= spec_.max_length) throw ArgumentError("generation exceeded max_length");
    Row x = w("tok.table").row(token) + w("pos.table").row(len_);
    for (int l = 0; l < spec_.layers; ++l) {
      const std::string p = "block" + std::to_string(l);
      auto& K = k_[static_cast<std::size_t>(l)];
      auto& V = v_[static_cast<std::size_t>(l)];
      const Row h = layer_norm_row(x, w(p + ".ln1.gamma"), w(p + ".ln1.beta"));
      const Row qkv = h * w(p + ".attn.qkv.weight") + w(p + ".attn.qkv.bias");
      K.conservativeResize(len_ + 1, d);
      V.conservativeResize(len_ + 1, d);
      K.row(len_) = qkv.segment(d, d);
      V.row(len_) = qkv.segment(2 * d, d);
      Row att(d);
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      for (int hd = 0; hd < H; ++hd) {
        Eigen::VectorXd s = K.middleCols(hd * dh, dh) * qkv.segment(hd * dh, dh).transpose() * scale;
        s.array() -= s.maxCoeff();
        s = s.array().exp();
        s /= s.sum();
        att.segment(hd * dh, dh) = s.transpose() * V.middleCols(hd * dh, dh);
      }
      x += att * w(p + ".attn.out.weight") + w(p + ".attn.out.bias");
      const Row h2 = layer_norm_row(x, w(p + ".ln2.gamma"), w(p + ".ln2.beta"));
      Row m = h2 * w(p + ".fc1.weight") + w(p + ".fc1.bias");
      m = m.unaryExpr([](double v) { return gelu(v); });
      x += m * w(p + ".fc2.weight") + w(p + ".fc2.bias");
    }
    ++len_;
    return layer_norm_row(x, w("ln_f.gamma"), w("ln_f.beta")) * w("head.weight") + w("head.bias");
  }

 private:
  const Matrix& w(const std::string& name) const { return p_.get(name).value(); }

  const StudentSpec& spec_;
  const nn::ParameterStore& p_;
  std::vector<Matrix> k_, v_;
  int len_ = 0;
};

int argmax(const Row& r) {
  Eigen::Index i = 0;
  r.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

Matrix StudentModel::cached_logits(std::span<const int> tokens) const {
  KvCache cache(spec_, params_);
  Matrix out(static_cast<Eigen::Index>(tokens.size()), spec_.vocab_size);
  Row logits = cache.step(Tokenizer::kBos);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = logits;
    if (i + 1 < tokens.size()) logits = cache.step(tokens[i]);
  }
  return out;
}

std::vector<int> StudentModel::generate(std::span<const int> prefix, int max_new_tokens) const {
  std::vector<int> out;
  if (max_new_tokens <= 0) return out;
  // The begin marker takes one position; an over-long prompt keeps its tail
  // and the budget shrinks to whatever positions remain.
  const std::size_t limit = static_cast<std::size_t>(spec_.max_length - 1);
  const std::size_t start = prefix.size() > limit ? prefix.size() - limit : 0;
  max_new_tokens = std::min<int>(max_new_tokens, static_cast<int>(limit - (prefix.size() - start)) + 1);
  KvCache cache(spec_, params_);
  Row logits = cache.step(Tokenizer::kBos);
  for (std::size_t i = start; i < prefix.size(); ++i) logits = cache.step(prefix[i]);
  for (int n = 0; n < max_new_tokens; ++n) {
    const int next = argmax(logits);
    if (next == Tokenizer::kEos) break;
    out.push_back(next);
    if (n + 1 < max_new_tokens) logits = cache.step(next);
  }
  return out;
}

std::string Student::generate_annotation(const std::string& scene_text, int max_new_tokens) const {
  if (max_new_tokens <= 0) return {};
  const auto prompt = tokenizer.encode(student_prompt(scene_text));
  return tokenizer.decode(model->generate(prompt, max_new_tokens));
}

void save_student(const std::filesystem::path& path, const Student& student, const nlohmann::json& metadata) {
  nn::CheckpointData data;
  data.kind = "student";
  data.config = {{"spec", student.model->spec().to_json()}, {"tokenizer", student.tokenizer.to_json()}};
  data.metadata = metadata;
  for (const auto& [name, var] : student.model->parameters().entries()) data.tensors.emplace_back(name, var.value());
  nn::save_checkpoint(path, data);
}

Student load_student(const std::filesystem::path& path) {
  auto data = nn::load_checkpoint(path);
  if (data.kind != "student") throw SchemaError(path.string() + " is a '" + data.kind + "' checkpoint, not a student");
  Student s;
  s.tokenizer = Tokenizer::from_json(data.config.at("tokenizer"));
  const auto spec = StudentSpec::from_json(data.config.at("spec"));
  if (spec.vocab_size < s.tokenizer.vocab_size()) throw SchemaError("student vocabulary smaller than tokenizer");
  s.model = std::make_shared<StudentModel>(spec, 0);
  s.model->parameters().load(data.tensors);
  return s;
}

}  // namespace cotdrive::student
