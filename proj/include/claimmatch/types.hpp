#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>

#include "claimmatch/error.hpp"

namespace claimmatch {

enum class Label { Match, NoMatch };
enum class Split { TrainShots, Validation, Test };
enum class ClaimKind { InputClaim, VerifiedClaim };
enum class ParseStatus { Clean, FallbackNegative };

inline const char* to_string(Label l) { return l == Label::Match ? "Match" : "NoMatch"; }
inline const char* to_string(ParseStatus s) {
  return s == ParseStatus::Clean ? "clean" : "fallback_negative";
}
inline const char* to_string(Split s) {
  switch (s) {
    case Split::TrainShots: return "train_shots";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "test";
}
inline const char* to_string(ClaimKind k) {
  return k == ClaimKind::InputClaim ? "input_claim" : "verified_claim";
}

inline Label parse_label(const std::string& s) {
  if (s == "Match") return Label::Match;
  if (s == "NoMatch") return Label::NoMatch;
  throw Error(ErrorCode::InvalidInput, "unknown label '" + s + "'");
}
inline Split parse_split(const std::string& s) {
  if (s == "train_shots") return Split::TrainShots;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::InvalidInput, "unknown split '" + s + "'");
}
inline ClaimKind parse_claim_kind(const std::string& s) {
  if (s == "input_claim") return ClaimKind::InputClaim;
  if (s == "verified_claim") return ClaimKind::VerifiedClaim;
  throw Error(ErrorCode::InvalidInput, "unknown claim kind '" + s + "'");
}
inline ParseStatus parse_parse_status(const std::string& s) {
  if (s == "clean") return ParseStatus::Clean;
  if (s == "fallback_negative") return ParseStatus::FallbackNegative;
  throw Error(ErrorCode::InvalidInput, "unknown parse status '" + s + "'");
}

inline Label flip(Label l) { return l == Label::Match ? Label::NoMatch : Label::Match; }

struct RawClaim {
  std::string id;
  ClaimKind kind = ClaimKind::InputClaim;
  std::string text;
};

struct VerifiedClaimSource {
  std::string title;
  std::string subtitle;
  std::string body;
};

struct ClaimPair {
  std::string pair_id;
  std::string input_claim;
  std::string verified_claim;
  Label label = Label::NoMatch;
  std::pair<std::string, std::string> source_ids;
  Split split = Split::Test;

  bool operator==(const ClaimPair&) const = default;
};

struct Prediction {
  std::string pair_id;
  Label label = Label::NoMatch;
  ParseStatus parse_status = ParseStatus::FallbackNegative;
  std::optional<std::string> matched_token;
  std::string raw_text;
  // Set when the same-event relabel pass flipped this prediction.
  std::optional<std::string> relabel_rule;

  bool operator==(const Prediction&) const = default;
};

inline void to_json(nlohmann::json& j, const ClaimPair& p) {
  j = nlohmann::json{{"pair_id", p.pair_id},
                     {"input_claim", p.input_claim},
                     {"verified_claim", p.verified_claim},
                     {"label", to_string(p.label)},
                     {"source_ids", {p.source_ids.first, p.source_ids.second}},
                     {"split", to_string(p.split)}};
}

inline void from_json(const nlohmann::json& j, ClaimPair& p) {
  p.pair_id = j.at("pair_id").get<std::string>();
  p.input_claim = j.at("input_claim").get<std::string>();
  p.verified_claim = j.at("verified_claim").get<std::string>();
  p.label = parse_label(j.at("label").get<std::string>());
  const auto& ids = j.at("source_ids");
  p.source_ids = {ids.at(0).get<std::string>(), ids.at(1).get<std::string>()};
  p.split = j.contains("split") ? parse_split(j.at("split").get<std::string>()) : Split::Test;
}

inline void to_json(nlohmann::json& j, const Prediction& p) {
  j = nlohmann::json{{"pair_id", p.pair_id},
                     {"label", to_string(p.label)},
                     {"parse_status", to_string(p.parse_status)},
                     {"matched_token", p.matched_token ? nlohmann::json(*p.matched_token) : nlohmann::json()},
                     {"raw_text", p.raw_text}};
  if (p.relabel_rule) j["relabel_rule"] = *p.relabel_rule;
}

inline void from_json(const nlohmann::json& j, Prediction& p) {
  p.pair_id = j.at("pair_id").get<std::string>();
  p.label = parse_label(j.at("label").get<std::string>());
  p.parse_status = parse_parse_status(j.at("parse_status").get<std::string>());
  p.matched_token.reset();
  if (j.contains("matched_token") && !j.at("matched_token").is_null())
    p.matched_token = j.at("matched_token").get<std::string>();
  p.raw_text = j.value("raw_text", std::string{});
  p.relabel_rule.reset();
  if (j.contains("relabel_rule") && !j.at("relabel_rule").is_null())
    p.relabel_rule = j.at("relabel_rule").get<std::string>();
}

}  // namespace claimmatch
