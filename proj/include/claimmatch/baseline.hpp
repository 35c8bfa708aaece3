#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/provider.hpp"
#include "claimmatch/types.hpp"

namespace claimmatch {

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of an all-zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

struct Threshold {
  double value = 0.0;
  std::string model_name;
  std::size_t calibration_n = 0;
};

inline void to_json(nlohmann::json& j, const Threshold& t) {
  j = nlohmann::json{{"value", t.value}, {"model_name", t.model_name}, {"calibration_n", t.calibration_n}};
}

inline void from_json(const nlohmann::json& j, Threshold& t) {
  t.value = j.at("value").get<double>();
  t.model_name = j.at("model_name").get<std::string>();
  t.calibration_n = j.at("calibration_n").get<std::size_t>();
  if (t.calibration_n == 0 || !std::isfinite(t.value))
    throw Error(ErrorCode::InvalidInput, "threshold needs a finite value and calibration_n > 0");
}

/// Median; mean of the two middle values for even n.
inline double median(std::vector<double> xs) {
  if (xs.empty()) throw Error(ErrorCode::EmptyValidation, "median of nothing");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double upper = xs[mid];
  if (xs.size() % 2 == 1) return upper;
  const double lower = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

inline double pair_similarity(const ClaimPair& pair, Embedder& embedder) {
  return cosine_similarity(embedder.embed(pair.input_claim), embedder.embed(pair.verified_claim));
}

/// Median similarity over the positive validation pairs; negatives are ignored.
inline Threshold calibrate_threshold(std::span<const ClaimPair> validation, Embedder& embedder) {
  std::vector<double> scores;
  for (const auto& p : validation) {
    if (p.split == Split::Test)
      throw Error(ErrorCode::InvalidInput, "calibration pair " + p.pair_id + " is from the test split");
    if (p.label == Label::Match) scores.push_back(pair_similarity(p, embedder));
  }
  if (scores.empty()) throw Error(ErrorCode::EmptyValidation, "no positive validation pairs");
  return Threshold{median(scores), embedder.model_name(), scores.size()};
}

/// Match iff score >= threshold (ties are Match).
inline Label label_for_score(double score, double threshold) {
  return score >= threshold ? Label::Match : Label::NoMatch;
}

inline Prediction classify_by_similarity(const ClaimPair& pair, const Threshold& threshold, Embedder& embedder) {
  if (embedder.model_name() != threshold.model_name)
    throw Error(ErrorCode::ModelMismatch,
                "threshold calibrated with " + threshold.model_name + ", embedder is " + embedder.model_name());
  Prediction p;
  p.pair_id = pair.pair_id;
  const double score = pair_similarity(pair, embedder);
  p.label = label_for_score(score, threshold.value);
  p.parse_status = ParseStatus::Clean;
  char buf[48];
  std::snprintf(buf, sizeof buf, "cosine=%.6f", score);
  p.raw_text = buf;
  return p;
}

}  // namespace claimmatch
