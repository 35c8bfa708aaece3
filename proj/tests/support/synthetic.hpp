#pragma once

// Deterministic synthetic claim corpora for tests and fixture generation.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "claimmatch/corpus.hpp"
#include "claimmatch/hash.hpp"
#include "claimmatch/rng.hpp"
#include "claimmatch/runner.hpp"

namespace claimmatch::synth {

struct SyntheticCorpus {
  std::vector<RawClaim> claims;
  std::vector<GoldLink> links;
};

struct SyntheticOptions {
  std::size_t n_links = 50;
  std::size_t extra_verified = 20;
  std::size_t body_words = 25;
  /// The first links get a verified text that nearly copies the input.
  std::size_t near_duplicates = 0;
  std::uint64_t seed = 1;
};

inline std::string make_word(Rng& rng) {
  static const char* kSyllables[] = {"ka", "lo", "mi", "ten", "ra", "vo", "su", "pe", "dan",
                                     "gri", "fo", "ul", "ze", "bar", "nim", "tos", "ly", "qua"};
  std::string w;
  const auto n = 2 + rng.below(2);
  for (std::uint64_t i = 0; i < n; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
  return w;
}

inline std::string make_sentence(Rng& rng, const std::vector<std::string>& topic, std::size_t words) {
  static const char* kCommon[] = {"the", "a", "video", "shows", "new", "report", "says", "people",
                                  "city", "claims", "after", "will", "is", "not", "official", "photo"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (!s.empty()) s += ' ';
    if (rng.uniform() < 0.6) s += topic[rng.below(topic.size())];
    else s += kCommon[rng.below(std::size(kCommon))];
  }
  if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
  Rng rng(opt.seed);
  SyntheticCorpus corpus;
  auto id = [](const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < opt.n_links; ++i) {
    std::vector<std::string> topic;
    for (int k = 0; k < 6; ++k) topic.push_back(make_word(rng));

    std::string tweet;
    if (rng.uniform() < 0.2) tweet += "RT ";
    if (rng.uniform() < 0.3) tweet += "@" + make_word(rng) + " ";
    const std::string core = make_sentence(rng, topic, 10 + rng.below(16));
    tweet += core;
    if (rng.uniform() < 0.3) tweet += " #" + topic[0];
    if (rng.uniform() < 0.4) tweet += " https://t.co/" + make_word(rng);
    if (rng.uniform() < 0.3) tweet += " \U0001F600";

    RawClaim input{id("tw", i), ClaimKind::InputClaim, tweet};
    RawClaim verified{id("vc", i), ClaimKind::VerifiedClaim, {}};
    if (i < opt.near_duplicates) {
      verified.text = core + " " + topic[1];
    } else {
      VerifiedClaimSource src;
      src.title = "Did " + make_sentence(rng, topic, 5) + "?";
      if (rng.uniform() < 0.7) src.subtitle = make_sentence(rng, topic, 8) + ".";
      src.body = make_sentence(rng, topic, opt.body_words) + ".";
      verified.text = join_verified_parts(src);
    }
    corpus.claims.push_back(std::move(input));
    corpus.claims.push_back(std::move(verified));
    corpus.links.push_back({id("tw", i), id("vc", i)});
  }
  for (std::size_t i = 0; i < opt.extra_verified; ++i) {
    std::vector<std::string> topic;
    for (int k = 0; k < 6; ++k) topic.push_back(make_word(rng));
    corpus.claims.push_back(
        {id("vx", i), ClaimKind::VerifiedClaim, "Is " + make_sentence(rng, topic, 5 + opt.body_words) + "?"});
  }
  return corpus;
}

/// Mostly-correct model answers in a mix of styles, keyed by pair id.
inline std::unordered_map<std::string, std::string> noisy_answers(std::span<const ClaimPair> pairs,
                                                                  const LabelWords& words, std::uint64_t seed) {
  std::unordered_map<std::string, std::string> answers;
  for (const auto& p : pairs) {
    Rng rng(fnv1a64(p.pair_id, seed));
    const double u = rng.uniform();
    const auto cap = [](std::string w) {
      w[0] = static_cast<char>(w[0] - 'a' + 'A');
      return w;
    };
    std::string text;
    if (u < 0.03) {
      text = "It is a partial match between these claims.";
    } else {
      const bool correct = u < 0.90;
      const Label said = correct ? p.label : flip(p.label);
      const std::string w = words.word_for(said);
      switch (rng.below(4)) {
        case 0: text = cap(w) + "."; break;
        case 1: text = cap(w) + ", the statements " + (said == Label::Match ? "refer to the same event." : "are about different events."); break;
        case 2: text = "**" + cap(w) + "**\n\nExplanation: compared the two statements."; break;
        default:
          text = said == Label::NoMatch && p.label == Label::Match
                     ? "The statements are about similar, but not the same events. " + cap(w) + "."
                     : "Answer: " + w;
      }
    }
    answers.emplace(p.pair_id, std::move(text));
  }
  return answers;
}

/// Configuration of the checked-in replay fixture run.
inline RunConfig fixture_replay_config() {
  RunConfig c;
  c.run_id = "fixture-pd6-few";
  c.provider = "mock";
  c.template_user = "PD-6";
  c.shot_mode = ShotMode::Few;
  c.seed = 7;
  c.concurrency = 4;
  c.transport = TransportMode::Replay;
  c.transcript_path = "transcript_short_pd6_few.jsonl";
  c.params = GenerationParams::preset("mistral", "mock-model");
  return c;
}

}  // namespace claimmatch::synth
