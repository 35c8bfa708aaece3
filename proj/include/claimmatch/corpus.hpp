#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/rng.hpp"
#include "claimmatch/types.hpp"
#include "claimmatch/unicode.hpp"

namespace claimmatch {

namespace detail {

inline bool ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline bool istarts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

/// Position of the leftmost URL start in a whitespace-free token, or npos.
inline std::size_t url_start(std::string_view token) {
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (istarts_with(token, i, "http://") || istarts_with(token, i, "https://")) return i;
    if (istarts_with(token, i, "www.") && (i == 0 || !ascii_alnum(token[i - 1]))) return i;
  }
  return std::string_view::npos;
}

inline std::vector<std::string_view> split_ascii_ws(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && unicode::is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !unicode::is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) tokens.push_back(s.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace detail

/// Normalizes tweet-style text: drops emoji, strips @/# markers (the word
/// stays), removes URLs and standalone "RT"/"RT:" tokens, and collapses
/// whitespace. Idempotent.
inline std::string preprocess_text(std::string_view raw) {
  std::string stripped;
  stripped.reserve(raw.size());
  for (char32_t cp : unicode::decode(raw)) {
    if (cp == '@' || cp == '#' || unicode::is_emoji(cp)) continue;
    unicode::append(stripped, cp);
  }

  std::string out;
  out.reserve(stripped.size());
  for (std::string_view token : detail::split_ascii_ws(stripped)) {
    token = token.substr(0, std::min(token.size(), detail::url_start(token)));
    if (token.empty() || token == "RT" || token == "RT:") continue;
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  }
  return out;
}

namespace detail {
inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return unicode::is_space(static_cast<unsigned char>(c)); });
}
}  // namespace detail

/// Title, subtitle and body joined by single spaces, empty parts skipped.
/// This is the raw form; compose_verified_text also preprocesses it.
inline std::string join_verified_parts(const VerifiedClaimSource& src) {
  std::string joined;
  for (const std::string* part : {&src.title, &src.subtitle, &src.body}) {
    if (detail::blank(*part)) continue;
    if (!joined.empty()) joined.push_back(' ');
    joined += *part;
  }
  if (joined.empty()) throw Error(ErrorCode::AllPartsEmpty, "verified claim has no title, subtitle or body");
  return joined;
}

inline std::string compose_verified_text(const VerifiedClaimSource& src) {
  return preprocess_text(join_verified_parts(src));
}

/// Character-level (code point) edit distance.
inline std::size_t levenshtein_distance(std::span<const char32_t> a, std::span<const char32_t> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

/// 1 - d(a, b) / max(|a|, |b|); 1.0 for two empty strings.
inline double levenshtein_ratio(std::string_view a, std::string_view b) {
  const auto ca = unicode::decode(a);
  const auto cb = unicode::decode(b);
  const std::size_t longest = std::max(ca.size(), cb.size());
  if (longest == 0) return 1.0;
  const auto d = levenshtein_distance(ca, cb);
  return 1.0 - static_cast<double>(d) / static_cast<double>(longest);
}

/// Drops pairs whose input and verified texts are near-duplicates
/// (ratio strictly above max_ratio). Survivor order is preserved.
inline std::vector<ClaimPair> dedup_near_duplicates(std::span<const ClaimPair> pairs, double max_ratio = 0.80) {
  if (!(max_ratio > 0.0 && max_ratio < 1.0))
    throw Error(ErrorCode::InvalidInput, "dedup ratio must lie in (0, 1)");
  std::vector<ClaimPair> kept;
  kept.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (levenshtein_ratio(p.input_claim, p.verified_claim) <= max_ratio) kept.push_back(p);
  }
  return kept;
}

inline std::string positive_pair_id(std::string_view input_id, std::string_view verified_id) {
  return "pos:" + std::string(input_id) + ":" + std::string(verified_id);
}
inline std::string negative_pair_id(std::string_view input_id, std::string_view verified_id) {
  return "neg:" + std::string(input_id) + ":" + std::string(verified_id);
}

/// Pairs every positive's input claim with a different verified claim from
/// the pool, each pool claim used at most once. The pool is shuffled with
/// the seed and assigned greedily; positives left without a candidate are
/// placed by augmenting-path search, so InsufficientPool means no valid
/// assignment exists at all.
/// known_links lists further (input id, verified id) gold pairs that must
/// not be emitted as negatives.
inline std::vector<ClaimPair> generate_negative_pairs(
    std::span<const ClaimPair> positives, std::span<const RawClaim> pool, std::uint64_t seed,
    std::span<const std::pair<std::string, std::string>> known_links = {}) {
  std::unordered_map<std::string, std::size_t> pool_index;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (pool[k].kind != ClaimKind::VerifiedClaim)
      throw Error(ErrorCode::InvalidInput, "pool entry '" + pool[k].id + "' is not a verified claim");
    pool_index.emplace(pool[k].id, k);
  }
  std::unordered_map<std::string, std::unordered_set<std::string>> forbidden;
  for (const auto& p : positives) {
    if (!pool_index.contains(p.source_ids.second))
      throw Error(ErrorCode::InvalidInput, "verified claim '" + p.source_ids.second + "' of pair '" + p.pair_id +
                                               "' is not in the pool");
    forbidden[p.source_ids.first].insert(p.source_ids.second);
  }
  for (const auto& [input_id, verified_id] : known_links) forbidden[input_id].insert(verified_id);
  if (pool.size() < positives.size())
    throw Error(ErrorCode::InsufficientPool, "pool smaller than the number of positives");

  std::vector<std::string> texts(pool.size());
  std::vector<std::size_t> order;
  order.reserve(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    texts[k] = preprocess_text(pool[k].text);
    if (!texts[k].empty()) order.push_back(k);
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> assigned(positives.size(), kNone);  // positive -> position in order
  std::vector<std::size_t> owner(order.size(), kNone);         // position in order -> positive
  auto allowed = [&](std::size_t i, std::size_t pos) {
    return !forbidden[positives[i].source_ids.first].contains(pool[order[pos]].id);
  };

  std::size_t first_free = 0;
  std::vector<std::size_t> stuck;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    while (first_free < order.size() && owner[first_free] != kNone) ++first_free;
    for (std::size_t pos = first_free; pos < order.size(); ++pos) {
      if (owner[pos] == kNone && allowed(i, pos)) {
        owner[pos] = i;
        assigned[i] = pos;
        break;
      }
    }
    if (assigned[i] == kNone) stuck.push_back(i);
  }

  if (!stuck.empty()) {
    std::vector<char> visited(order.size());
    std::function<bool(std::size_t)> augment = [&](std::size_t i) {
      for (std::size_t pos = 0; pos < order.size(); ++pos) {
        if (visited[pos] || !allowed(i, pos)) continue;
        visited[pos] = 1;
        if (owner[pos] == kNone || augment(owner[pos])) {
          owner[pos] = i;
          assigned[i] = pos;
          return true;
        }
      }
      return false;
    };
    for (std::size_t i : stuck) {
      std::fill(visited.begin(), visited.end(), 0);
      if (!augment(i))
        throw Error(ErrorCode::InsufficientPool,
                    "no unused verified claim available for input '" + positives[i].source_ids.first + "'");
    }
  }

  std::vector<ClaimPair> negatives;
  negatives.reserve(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const RawClaim& v = pool[order[assigned[i]]];
    ClaimPair n;
    n.pair_id = negative_pair_id(positives[i].source_ids.first, v.id);
    n.input_claim = positives[i].input_claim;
    n.verified_claim = texts[order[assigned[i]]];
    n.label = Label::NoMatch;
    n.source_ids = {positives[i].source_ids.first, v.id};
    n.split = positives[i].split;
    negatives.push_back(std::move(n));
  }
  return negatives;
}

struct CorpusStats {
  std::size_t n_pairs = 0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  double mean_chars_input = 0.0;
  double mean_chars_verified = 0.0;
  double mean_tokens_input = 0.0;
  double mean_tokens_verified = 0.0;
};

inline void to_json(nlohmann::json& j, const CorpusStats& s) {
  j = nlohmann::json{{"n_pairs", s.n_pairs},
                     {"n_positive", s.n_positive},
                     {"n_negative", s.n_negative},
                     {"mean_chars_input", s.mean_chars_input},
                     {"mean_chars_verified", s.mean_chars_verified},
                     {"mean_tokens_input", s.mean_tokens_input},
                     {"mean_tokens_verified", s.mean_tokens_verified}};
}

inline std::size_t count_tokens(std::string_view text) { return detail::split_ascii_ws(text).size(); }

inline CorpusStats corpus_stats(std::span<const ClaimPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyCorpus, "no pairs");
  CorpusStats s;
  double ci = 0, cv = 0, ti = 0, tv = 0;
  for (const auto& p : pairs) {
    ++s.n_pairs;
    (p.label == Label::Match ? s.n_positive : s.n_negative) += 1;
    ci += static_cast<double>(unicode::length(p.input_claim));
    cv += static_cast<double>(unicode::length(p.verified_claim));
    ti += static_cast<double>(count_tokens(p.input_claim));
    tv += static_cast<double>(count_tokens(p.verified_claim));
  }
  const auto n = static_cast<double>(s.n_pairs);
  s.mean_chars_input = ci / n;
  s.mean_chars_verified = cv / n;
  s.mean_tokens_input = ti / n;
  s.mean_tokens_verified = tv / n;
  return s;
}

// ---------------------------------------------------------------------------
// Dataset files

/// Accepts {"id","kind","text"} or {"id","kind","title","subtitle","body"}.
/// Structured verified claims are joined into text here, not preprocessed.
inline RawClaim raw_claim_from_json(const nlohmann::json& j) {
  RawClaim c;
  c.id = j.at("id").get<std::string>();
  c.kind = parse_claim_kind(j.at("kind").get<std::string>());
  if (j.contains("text")) {
    c.text = j.at("text").get<std::string>();
  } else {
    VerifiedClaimSource src{j.value("title", std::string{}), j.value("subtitle", std::string{}),
                            j.value("body", std::string{})};
    c.text = join_verified_parts(src);
  }
  if (c.id.empty()) throw Error(ErrorCode::InvalidInput, "claim with empty id");
  if (detail::blank(c.text)) throw Error(ErrorCode::InvalidInput, "claim '" + c.id + "' has empty text");
  return c;
}

struct GoldLink {
  std::string input_id;
  std::string verified_id;
};

struct DatasetBuildOptions {
  std::uint64_t seed = 0;
  std::optional<double> dedup_ratio;
  /// Draw this many candidate positives before dedup (0 = all).
  std::size_t presample = 0;
  /// Positives per split; test 0 means "all remaining".
  std::size_t test_positives = 0;
  std::size_t validation_positives = 0;
  std::size_t shot_positives = 0;
};

struct BuiltDataset {
  std::vector<ClaimPair> test;
  std::vector<ClaimPair> validation;
  std::vector<ClaimPair> shots;
  std::size_t dropped_empty = 0;
  std::size_t dropped_near_duplicate = 0;
};

/// Builds balanced splits from raw claims and gold links. Test and
/// validation negatives reuse their positives' input claims. Shot negatives
/// come from a separate set of input claims, so the shot block holds
/// 2 * shot_positives distinct inputs. Verified claims are used at most once
/// across all negatives of all splits.
inline BuiltDataset build_dataset(std::span<const RawClaim> claims, std::span<const GoldLink> links,
                                  const DatasetBuildOptions& opt) {
  std::unordered_map<std::string, const RawClaim*> by_id;
  std::vector<RawClaim> pool;
  for (const auto& c : claims) {
    if (c.id.empty()) throw Error(ErrorCode::InvalidInput, "claim with empty id");
    if (!by_id.emplace(c.id, &c).second) throw Error(ErrorCode::DuplicateId, "claim id '" + c.id + "'");
    if (c.kind == ClaimKind::VerifiedClaim) pool.push_back(c);
  }

  BuiltDataset out;
  std::vector<ClaimPair> positives;
  std::unordered_set<std::string> seen;
  for (const auto& link : links) {
    auto in = by_id.find(link.input_id);
    auto ver = by_id.find(link.verified_id);
    if (in == by_id.end() || in->second->kind != ClaimKind::InputClaim)
      throw Error(ErrorCode::InvalidInput, "link references unknown input claim '" + link.input_id + "'");
    if (ver == by_id.end() || ver->second->kind != ClaimKind::VerifiedClaim)
      throw Error(ErrorCode::InvalidInput, "link references unknown verified claim '" + link.verified_id + "'");
    ClaimPair p;
    p.pair_id = positive_pair_id(link.input_id, link.verified_id);
    if (!seen.insert(p.pair_id).second) continue;
    p.input_claim = preprocess_text(in->second->text);
    p.verified_claim = preprocess_text(ver->second->text);
    p.label = Label::Match;
    p.source_ids = {link.input_id, link.verified_id};
    if (p.input_claim.empty() || p.verified_claim.empty()) {
      ++out.dropped_empty;
      continue;
    }
    positives.push_back(std::move(p));
  }

  Rng rng(opt.seed);
  if (opt.presample > 0 && opt.presample < positives.size()) {
    rng.shuffle(std::span<ClaimPair>(positives));
    positives.resize(opt.presample);
  }
  if (opt.dedup_ratio) {
    const auto before = positives.size();
    positives = dedup_near_duplicates(positives, *opt.dedup_ratio);
    out.dropped_near_duplicate = before - positives.size();
  }
  rng.shuffle(std::span<ClaimPair>(positives));

  const std::size_t shot_block = 2 * opt.shot_positives;
  const std::size_t fixed = shot_block + opt.validation_positives;
  if (fixed > positives.size() || (opt.test_positives > 0 && fixed + opt.test_positives > positives.size()))
    throw Error(ErrorCode::InsufficientPool, "not enough positive links for the requested split sizes");
  const std::size_t n_test = opt.test_positives > 0 ? opt.test_positives : positives.size() - fixed;

  std::vector<ClaimPair> sources;
  std::vector<ClaimPair> kept_positives;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < shot_block; ++k, ++cursor) {
    ClaimPair p = positives[cursor];
    p.split = Split::TrainShots;
    if (k < opt.shot_positives) kept_positives.push_back(p);
    else sources.push_back(p);
  }
  for (std::size_t k = 0; k < opt.validation_positives; ++k, ++cursor) {
    ClaimPair p = positives[cursor];
    p.split = Split::Validation;
    kept_positives.push_back(p);
    sources.push_back(p);
  }
  for (std::size_t k = 0; k < n_test; ++k, ++cursor) {
    ClaimPair p = positives[cursor];
    p.split = Split::Test;
    kept_positives.push_back(p);
    sources.push_back(p);
  }

  std::vector<std::pair<std::string, std::string>> known;
  known.reserve(links.size());
  for (const auto& link : links) known.emplace_back(link.input_id, link.verified_id);
  auto negatives = generate_negative_pairs(sources, pool, rng.next(), known);

  auto route = [&](ClaimPair&& p) {
    switch (p.split) {
      case Split::TrainShots: out.shots.push_back(std::move(p)); break;
      case Split::Validation: out.validation.push_back(std::move(p)); break;
      case Split::Test: out.test.push_back(std::move(p)); break;
    }
  };
  for (auto& p : kept_positives) route(std::move(p));
  for (auto& n : negatives) route(std::move(n));
  return out;
}

}  // namespace claimmatch
