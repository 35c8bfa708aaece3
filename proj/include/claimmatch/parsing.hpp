#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/jsonl.hpp"
#include "claimmatch/templates.hpp"
#include "claimmatch/types.hpp"

namespace claimmatch {

namespace detail {

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

inline bool word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

/// First standalone occurrence of word (already lower case) in text.
inline std::size_t find_word(std::string_view lower_text, std::string_view word) {
  for (auto pos = lower_text.find(word); pos != std::string_view::npos; pos = lower_text.find(word, pos + 1)) {
    const bool left = pos == 0 || !word_char(lower_text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end == lower_text.size() || !word_char(lower_text[end]);
    if (left && right) return pos;
  }
  return std::string_view::npos;
}

}  // namespace detail

inline constexpr std::string_view kPartialMatch = "partial match";

/// Maps a model answer to a label. The first standalone label word decides
/// (case-insensitive, punctuation ignored). No label word, or "partial
/// match" ahead of the first one, falls back to NoMatch.
inline Prediction parse_response(std::string_view raw, const LabelWords& words, std::string pair_id = {}) {
  Prediction p;
  p.pair_id = std::move(pair_id);
  p.raw_text = std::string(raw);

  const std::string text = detail::lowered(raw);
  const std::string pos_word = detail::lowered(words.positive);
  const std::string neg_word = detail::lowered(words.negative);
  const auto pos_at = detail::find_word(text, pos_word);
  const auto neg_at = detail::find_word(text, neg_word);
  const auto label_at = std::min(pos_at, neg_at);
  const auto hedge_at = text.find(kPartialMatch);

  if (label_at == std::string::npos || hedge_at < label_at) {
    p.label = Label::NoMatch;
    p.parse_status = ParseStatus::FallbackNegative;
    return p;
  }
  const bool positive = pos_at < neg_at;
  p.label = positive ? Label::Match : Label::NoMatch;
  p.parse_status = ParseStatus::Clean;
  p.matched_token = positive ? words.positive : words.negative;
  return p;
}

inline Prediction parse_response(std::string_view raw, const PromptTemplate& tpl, std::string pair_id = {}) {
  return parse_response(raw, tpl.labels, std::move(pair_id));
}

// ---------------------------------------------------------------------------
// Same-event relabel pass

struct RelabelRule {
  std::string id;
  std::string pattern;
  std::regex regex;

  RelabelRule(std::string rule_id, std::string rule_pattern)
      : id(std::move(rule_id)), pattern(std::move(rule_pattern)) {
    try {
      regex = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ConfigError, "relabel rule " + id + ": " + e.what());
    }
  }
};

/// Phrasings of "same topic or event, differing only in minor details".
inline std::vector<RelabelRule> default_relabel_rules() {
  return {
      {"similar-not-same", R"(similar,?\s+but\s+not\s+(the\s+)?same\s+(events?|topics?|incidents?))"},
      {"same-event-minor-details",
       R"(same\s+(topic|event)[^.]*?(differ|differs|vary|varies)[^.]*?(minor|small|slight|insignificant|non-substantial|not substantial)\s+details)"},
      {"differ-only-in-details", R"(differ\w*\s+only\s+in\s+(minor|small|slight|some)\s+details)"},
  };
}

/// Reads {"rules": [{"id": ..., "pattern": ...}, ...]}.
inline std::vector<RelabelRule> load_relabel_rules(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(jsonl::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  std::vector<RelabelRule> rules;
  for (const auto& r : j.at("rules")) rules.emplace_back(r.at("id").get<std::string>(), r.at("pattern").get<std::string>());
  return rules;
}

/// Flips a NoMatch whose explanation says the claims concern the same event
/// with only minor differences. Match predictions and parse status are never
/// touched.
inline Prediction relabel_same_event(Prediction pred, const std::vector<RelabelRule>& rules) {
  if (pred.label != Label::NoMatch || pred.raw_text.empty()) return pred;
  for (const auto& rule : rules) {
    if (std::regex_search(pred.raw_text, rule.regex)) {
      pred.label = Label::Match;
      pred.relabel_rule = rule.id;
      return pred;
    }
  }
  return pred;
}

}  // namespace claimmatch
