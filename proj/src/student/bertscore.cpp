#include "cotdrive/student/bertscore.hpp"

#include <algorithm>
#include <cmath>

#include "cotdrive/core/error.hpp"

namespace cotdrive::student {

nn::Matrix StudentEmbedder::embed(const std::string& text) const {
  return student_.model->embed(student_.tokenizer.encode(text));
}

BertScore bert_score(const nn::Matrix& cand, const nn::Matrix& ref) {
  if (cand.rows() == 0 || ref.rows() == 0) throw ScoringError("bert_score: empty token set");
  if (cand.cols() != ref.cols()) throw ScoringError("bert_score: embedding widths differ");
  const Eigen::VectorXd nc = cand.rowwise().squaredNorm();
  const Eigen::VectorXd nr = ref.rowwise().squaredNorm();
  const nn::Matrix dots = cand * ref.transpose();
  // dot / sqrt(|a|^2 |b|^2) is exactly 1 for identical rows.
  nn::Matrix cos(dots.rows(), dots.cols());
  for (Eigen::Index i = 0; i < dots.rows(); ++i)
    for (Eigen::Index j = 0; j < dots.cols(); ++j) {
      const double denom = std::sqrt(nc(i) * nr(j));
      cos(i, j) = denom > 0 ? std::clamp(dots(i, j) / denom, -1.0, 1.0) : 0.0;
    }
  BertScore s;
  s.precision = cos.rowwise().maxCoeff().mean();
  s.recall = cos.colwise().maxCoeff().mean();
  // With opposite signs the harmonic mean leaves [min, max] and can blow up;
  // zero is the only value guaranteed to sit between them.
  const double pr = s.precision * s.recall;
  s.f1 = pr > 0.0 ? 2.0 * pr / (s.precision + s.recall) : 0.0;
  return s;
}

BertScore bert_score(const std::string& candidate, const std::string& reference, const TokenEmbedder& embedder) {
  return bert_score(embedder.embed(candidate), embedder.embed(reference));
}

}  // namespace cotdrive::student
