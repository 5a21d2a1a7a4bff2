#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/student/bertscore.hpp"
#include "cotdrive/student/model.hpp"
#include "cotdrive/student/sequence.hpp"
#include "cotdrive/student/tokenizer.hpp"
#include "cotdrive/student/train.hpp"
#include "gradcheck.hpp"

using namespace cotdrive;
using namespace cotdrive::student;

namespace {

StudentSpec toy_spec(int vocab = Tokenizer::kBaseVocab) {
  StudentSpec s;
  s.vocab_size = vocab;
  s.layers = 2;
  s.width = 16;
  s.heads = 2;
  s.max_length = 64;
  return s;
}

TokenSequence random_sequence(Rng& rng, int vocab, int len) {
  TokenSequence s;
  for (int i = 0; i < len; ++i) s.tokens.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab))));
  s.boundary = static_cast<int>(rng.below(static_cast<std::uint64_t>(len)));
  return s;
}

/// Independent loss: explicit log-sum-exp per row, averaged per sequence.
double oracle_loss(const nn::Matrix& logits, const std::vector<TokenSequence>& seqs, bool mask) {
  double total = 0.0;
  Eigen::Index row = 0;
  for (const auto& s : seqs) {
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < s.length(); ++k, ++row) {
      if (mask && k < s.boundary) continue;
      double mx = logits.row(row).maxCoeff(), z = 0.0;
      for (Eigen::Index j = 0; j < logits.cols(); ++j) z += std::exp(logits(row, j) - mx);
      sum += -(logits(row, s.tokens[static_cast<std::size_t>(k)]) - mx - std::log(z));
      ++count;
    }
    total += sum / count;
  }
  return total / static_cast<double>(seqs.size());
}

}  // namespace

TEST(Tokenizer, CharacterRoundTripAllBytes) {
  Tokenizer t;
  std::string all;
  for (int b = 1; b < 256; ++b) all.push_back(static_cast<char>(b));
  const auto ids = t.encode(all);
  EXPECT_EQ(ids.size(), all.size());
  EXPECT_EQ(t.decode(ids), all);
  for (int id = Tokenizer::kByteBase; id < t.vocab_size(); ++id) {
    std::vector<int> one{id};
    EXPECT_EQ(t.encode(t.decode(one)), one);
  }
}

TEST(Tokenizer, BpeLearnsMergesAndRoundTrips) {
  std::vector<std::string> texts = {"the target vehicle keeps lane", "the target vehicle decelerates",
                                    "the target pedestrian waits at 12.50 m"};
  auto t = Tokenizer::train_bpe(texts, 300);
  EXPECT_GT(t.merge_count(), 0u);
  for (const auto& s : texts) {
    EXPECT_EQ(t.decode(t.encode(s)), s);
    EXPECT_LT(t.encode(s).size(), s.size());
  }
  const std::string unseen = "zebra crossing ahead, 3.75 m!\n";
  EXPECT_EQ(t.decode(t.encode(unseen)), unseen);
  for (int id = Tokenizer::kByteBase; id < t.vocab_size(); ++id) EXPECT_EQ(t.decode(t.encode(t.piece(id))), t.piece(id));
  EXPECT_EQ(Tokenizer::from_json(t.to_json()), t);
}

TEST(Tokenizer, BpeDeterministicAndDigitsStaySingle) {
  std::vector<std::string> texts = {"12.34 12.34 12.34 abc abc abc"};
  auto a = Tokenizer::train_bpe(texts, 400), b = Tokenizer::train_bpe(texts, 400);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.merge_count(); ++i) {
    const auto& p = a.piece(Tokenizer::kBaseVocab + static_cast<int>(i));
    int digits = 0;
    for (char c : p) digits += c >= '0' && c <= '9';
    EXPECT_LE(digits, 1) << p;
  }
}

TEST(Merge, EmptyAnswerBoundaryIsLength) {
  Tokenizer t;
  auto s = merge_prompt_answer("abc", "", t);
  EXPECT_EQ(s.boundary, s.length());
  EXPECT_EQ(s.length(), 3);
}

TEST(Merge, CharacterPromptAnswer) {
  Tokenizer t;
  auto s = merge_prompt_answer("a", "b", t);
  EXPECT_EQ(s.length(), 2);
  EXPECT_EQ(s.boundary, 1);
}

TEST(Merge, OverLongPromptLeftTruncated) {
  Tokenizer t;
  auto s = merge_prompt_answer("0123456789", "xyz", t, 8);
  EXPECT_EQ(s.length(), 8);
  EXPECT_EQ(s.boundary, 5);
  EXPECT_EQ(t.decode(s.tokens), "56789xyz");
}

TEST(Merge, OverLongAnswerRejectedWithId) {
  Tokenizer t;
  try {
    merge_prompt_answer("p", "0123456789", t, 8, false, "scene-42");
    FAIL();
  } catch (const SampleRejected& e) {
    EXPECT_NE(std::string(e.what()).find("scene-42"), std::string::npos);
  }
}

TEST(Merge, EndMarkerAppended) {
  Tokenizer t;
  auto s = merge_prompt_answer("a", "b", t, 8, true);
  EXPECT_EQ(s.tokens.back(), Tokenizer::kEos);
  EXPECT_EQ(s.boundary, 1);
}

TEST(StudentLoss, UniformLogitsGiveLogV) {
  StudentModel m(toy_spec(), 1);
  for (auto& [name, var] : m.parameters().entries())
    if (name.rfind("head.", 0) == 0) {
      nn::Var h = var;
      h.mutable_value().setZero();
    }
  Rng rng(1);
  std::vector<TokenSequence> data = {random_sequence(rng, 258, 10), random_sequence(rng, 258, 7)};
  EXPECT_NEAR(evaluate_stage1(m, data, false), std::log(258.0), 1e-12);
}

TEST(StudentLoss, MatchesIndependentOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    StudentModel m(toy_spec(), trial);
    std::vector<TokenSequence> data;
    for (int i = 0; i < 3; ++i) data.push_back(random_sequence(rng, 258, 3 + static_cast<int>(rng.below(12))));
    std::vector<const TokenSequence*> ptrs;
    std::vector<const std::vector<int>*> toks;
    for (auto& s : data) ptrs.push_back(&s), toks.push_back(&s.tokens);
    const auto logits = m.forward(toks).value();
    for (bool mask : {false, true})
      EXPECT_NEAR(m.stage1_loss(ptrs, mask).scalar(), oracle_loss(logits, data, mask), 1e-6);
  }
}

TEST(StudentLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    StudentModel m(toy_spec(), 10 + trial);
    std::vector<TokenSequence> data = {random_sequence(rng, 258, 9), random_sequence(rng, 258, 5)};
    std::vector<const TokenSequence*> ptrs = {&data[0], &data[1]};
    auto loss = [&] { return m.stage1_loss(ptrs); };
    std::vector<nn::Var> vars;
    for (const auto& [name, var] : m.parameters().entries()) vars.push_back(var);
    auto coords = testutil::sample_coordinates(vars, 48, rng);
    auto r = testutil::grad_check(loss, coords);
    EXPECT_LT(r.rel_error, 1e-4) << "trial " << trial;
  }
}

TEST(StudentModel, CachedLogitsMatchForward) {
  Rng rng(4);
  StudentModel m(toy_spec(), 5);
  auto s = random_sequence(rng, 258, 20);
  nn::NoGradGuard g;
  const auto f = m.forward({&s.tokens}).value();
  const auto c = m.cached_logits(s.tokens);
  EXPECT_LT((f - c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StudentModel, SequencesInBatchAreIndependent) {
  Rng rng(6);
  StudentModel m(toy_spec(), 7);
  auto a = random_sequence(rng, 258, 11), b = random_sequence(rng, 258, 6);
  nn::NoGradGuard g;
  const auto both = m.forward({&a.tokens, &b.tokens}).value();
  const auto solo = m.forward({&b.tokens}).value();
  EXPECT_LT((both.bottomRows(6) - solo).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generate, ZeroBudgetIsEmptyAndGreedyIsDeterministic) {
  Student s{Tokenizer{}, std::make_shared<StudentModel>(toy_spec(), 8)};
  EXPECT_EQ(s.generate_annotation("scene", 0), "");
  const auto a = s.generate_annotation("scene text", 12);
  EXPECT_EQ(a, s.generate_annotation("scene text", 12));
  EXPECT_LE(s.tokenizer.encode(a).size(), 12u);
}

TEST(Generate, OverLongPromptKeepsTailWithinCache) {
  Student s{Tokenizer{}, std::make_shared<StudentModel>(toy_spec(), 8)};
  const std::string prompt(200, 'x');
  const auto out = s.model->generate(s.tokenizer.encode(prompt), 50);
  EXPECT_LE(out.size(), 1u);
}

TEST(Train, FixedSeedIdenticalCurvesAndCheckpointRoundTrip) {
  Rng rng(9);
  std::vector<TokenSequence> data;
  for (int i = 0; i < 6; ++i) data.push_back(random_sequence(rng, 258, 8));
  StudentTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-2;
  auto a = std::make_shared<StudentModel>(toy_spec(), 1);
  StudentModel b(toy_spec(), 1);
  auto ra = train_student(*a, data, {data[0]}, cfg);
  auto rb = train_student(b, data, {data[0]}, cfg);
  EXPECT_EQ(ra.train_loss, rb.train_loss);
  EXPECT_EQ(ra.val_loss, rb.val_loss);
  EXPECT_LT(ra.train_loss.back(), ra.initial_loss);

  auto path = std::filesystem::temp_directory_path() / "cotdrive_student_test.ckpt";
  Student s{Tokenizer{}, a};
  save_student(path, s);
  auto back = load_student(path);
  EXPECT_EQ(back.model->spec(), s.model->spec());
  EXPECT_EQ(evaluate_stage1(*back.model, data, false), evaluate_stage1(*s.model, data, false));
  std::filesystem::remove(path);
}

TEST(Train, EmptyCorpusRejected) {
  StudentModel m(toy_spec(), 1);
  EXPECT_THROW(train_student(m, {}, {}, StudentTrainConfig{}), ArgumentError);
}

TEST(Train, DivergenceRestoresLastFiniteWeights) {
  Rng rng(10);
  std::vector<TokenSequence> data = {random_sequence(rng, 258, 8)};
  StudentModel m(toy_spec(), 1);
  StudentTrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.clip_norm = 0;
  cfg.epochs = 3;
  EXPECT_THROW(train_student(m, data, {}, cfg), DivergenceError);
  for (const auto& [name, var] : m.parameters().entries()) EXPECT_TRUE(var.value().allFinite()) << name;
}

TEST(BertScore, IdenticalTextsScoreExactlyOne) {
  Student s{Tokenizer{}, std::make_shared<StudentModel>(toy_spec(), 3)};
  StudentEmbedder e(s);
  const std::string text = "The target vehicle will keep lane and decelerate.";
  auto r = bert_score(text, text, e);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(BertScore, HandComputedFixture) {
  nn::Matrix cand(1, 2), ref(2, 2);
  cand << 1, 0;
  ref << 1, 0, 0, 1;
  auto r = bert_score(cand, ref);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
}

TEST(BertScore, HarmonicMeanOfEqualHalves) {
  nn::Matrix cand(2, 2), ref(2, 2);
  cand << 1, 0, 0, -1;
  ref << 1, 0, 0, 1;
  auto r = bert_score(cand, ref);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(BertScore, EmptyTokenSetIsScoringError) {
  Student s{Tokenizer{}, std::make_shared<StudentModel>(toy_spec(), 3)};
  StudentEmbedder e(s);
  EXPECT_THROW(bert_score("", "abc", e), ScoringError);
}

TEST(BertScore, F1BetweenPrecisionRecallAndSwapSymmetric) {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    auto a = testutil::random_matrix(1 + static_cast<int>(rng.below(6)), 4, rng);
    auto b = testutil::random_matrix(1 + static_cast<int>(rng.below(6)), 4, rng);
    auto ab = bert_score(a, b), ba = bert_score(b, a);
    EXPECT_EQ(ab.precision, ba.recall);
    EXPECT_EQ(ab.recall, ba.precision);
    EXPECT_GE(ab.f1, std::min(ab.precision, ab.recall) - 1e-12);
    EXPECT_LE(ab.f1, std::max(ab.precision, ab.recall) + 1e-12);
  }
}
