#include <gtest/gtest.h>

#include <fstream>

#include "claimmatch/parsing.hpp"
#include "claimmatch/rng.hpp"
#include "oracles.hpp"

using namespace claimmatch;

namespace {
const LabelWords kYesNo{"yes", "no"};
const LabelWords kTrueFalse{"true", "false"};
}  // namespace

TEST(Parse, FirstStandaloneWordWins) {
  auto p = parse_response("Yes, both statements refer to the same event.", kYesNo, "id");
  EXPECT_EQ(p.label, Label::Match);
  EXPECT_EQ(p.parse_status, ParseStatus::Clean);
  EXPECT_EQ(p.matched_token, "yes");
  EXPECT_EQ(p.pair_id, "id");

  EXPECT_EQ(parse_response("No. Yes would be wrong.", kYesNo).label, Label::NoMatch);
  EXPECT_EQ(parse_response("**YES**", kYesNo).label, Label::Match);
  EXPECT_EQ(parse_response("Answer:no", kYesNo).label, Label::NoMatch);
  EXPECT_EQ(parse_response("False.", kTrueFalse).label, Label::NoMatch);
  EXPECT_EQ(parse_response("it is TRUE", kTrueFalse).matched_token, "true");
}

TEST(Parse, SubstringsAreNotWords) {
  // "nothing", "know", "eyes" and "yesterday" hide label words inside them
  auto p = parse_response("I know nothing about eyes yesterday; yes_no", kYesNo);
  EXPECT_EQ(p.label, Label::NoMatch);
  EXPECT_EQ(p.parse_status, ParseStatus::FallbackNegative);
  EXPECT_FALSE(p.matched_token.has_value());
  EXPECT_EQ(parse_response("untrue, but yes-ish: true", kTrueFalse).label, Label::Match);
}

TEST(Parse, Fallbacks) {
  auto hedge = parse_response("This is a partial match, yes.", kYesNo);
  EXPECT_EQ(hedge.label, Label::NoMatch);
  EXPECT_EQ(hedge.parse_status, ParseStatus::FallbackNegative);
  auto after = parse_response("Yes. Though only a partial match.", kYesNo);
  EXPECT_EQ(after.label, Label::Match);
  EXPECT_EQ(after.parse_status, ParseStatus::Clean);
  auto empty = parse_response("", kYesNo);
  EXPECT_EQ(empty.parse_status, ParseStatus::FallbackNegative);
  EXPECT_EQ(parse_response("Partial Match", kYesNo).parse_status, ParseStatus::FallbackNegative);
}

TEST(Parse, KeepsRawTextAndHandlesOddBytes) {
  const std::string raw = "\xff\xfe yes \xc3\x28 \0 no";
  auto p = parse_response(raw, kYesNo);
  EXPECT_EQ(p.raw_text, raw);
  EXPECT_EQ(p.label, Label::Match);
  EXPECT_EQ(parse_response("été yes", kYesNo).label, Label::Match);
}

TEST(Relabel, SameEventPhrasings) {
  const auto rules = default_relabel_rules();
  auto flipped = relabel_same_event(
      parse_response("No. The statements are about similar, but not the same events.", kYesNo), rules);
  EXPECT_EQ(flipped.label, Label::Match);
  EXPECT_EQ(flipped.relabel_rule, "similar-not-same");
  EXPECT_EQ(flipped.parse_status, ParseStatus::Clean);

  auto minor = relabel_same_event(
      parse_response("No, they cover the same event but differ in some minor details.", kYesNo), rules);
  EXPECT_EQ(minor.relabel_rule, "same-event-minor-details");

  auto plain = relabel_same_event(parse_response("No, different events.", kYesNo), rules);
  EXPECT_EQ(plain.label, Label::NoMatch);
  EXPECT_FALSE(plain.relabel_rule.has_value());

  auto match = parse_response("Yes, similar, but not the same events", kYesNo);
  EXPECT_EQ(relabel_same_event(match, rules).relabel_rule, std::nullopt);
}

TEST(Relabel, RulesFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "claimmatch_rules.json";
  std::ofstream(path) << R"({"rules":[{"id":"custom","pattern":"basically\\s+identical"}]})";
  const auto rules = load_relabel_rules(path);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(relabel_same_event(parse_response("No, but basically  identical.", kYesNo), rules).label, Label::Match);
  std::ofstream(path) << R"({"rules":[{"id":"bad","pattern":"(unclosed"}]})";
  EXPECT_THROW(load_relabel_rules(path), Error);
  std::filesystem::remove(path);
}

TEST(Parse, FuzzedResponses) {
  Rng rng(123);
  const char* fillers[] = {"the", "claims", "eyes", "know", "nothing", "trueish", "No-", "answer", "\n", "**",
                           ",", ".", "é", "\U0001F600", "partial", "match", "yesterday", "YES!", "nO", "false"};
  for (int n = 0; n < 500; ++n) {
    std::vector<std::string> tokens;
    for (auto k = rng.below(12); k > 0; --k) tokens.push_back(fillers[rng.below(std::size(fillers))]);
    std::string raw;
    for (const auto& t : tokens) raw += t + (rng.below(2) ? " " : "");
    const auto p = parse_response(raw, kYesNo);
    const auto want = oracle::parse(raw, "yes", "no");
    ASSERT_EQ(p.label, want.label) << raw;
    ASSERT_EQ(p.parse_status == ParseStatus::Clean, want.clean) << raw;
  }
}
