#include <gtest/gtest.h>

#include <algorithm>

#include "claimmatch/baseline.hpp"
#include "claimmatch/rng.hpp"
#include "oracles.hpp"

using namespace claimmatch;

namespace {

ClaimPair pair_of(std::string id, std::string a, std::string b, Label l, Split s = Split::Validation) {
  ClaimPair p;
  p.pair_id = std::move(id);
  p.input_claim = std::move(a);
  p.verified_claim = std::move(b);
  p.label = l;
  p.split = s;
  return p;
}

}  // namespace

TEST(Cosine, KnownValuesAndErrors) {
  const std::vector<double> a{1, 0}, b{1, 1}, c{0, 0}, d{1, 0, 0};
  EXPECT_NEAR(cosine_similarity(a, b), 0.70711, 1e-5);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_THROW(cosine_similarity(a, c), Error);
  try {
    cosine_similarity(a, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(Median, OddEvenAndOracle) {
  EXPECT_DOUBLE_EQ(median({0.2, 0.6, 0.9}), 0.6);
  EXPECT_NEAR(median({0.4, 0.8}), 0.6, 1e-12);
  EXPECT_THROW(median({}), Error);
  Rng rng(8);
  for (int n = 0; n < 100; ++n) {
    std::vector<double> xs(1 + rng.below(40));
    for (auto& x : xs) x = rng.uniform() * 2 - 1;
    ASSERT_DOUBLE_EQ(median(xs), oracle::sorted_median(xs));
  }
}

TEST(Calibrate, UsesPositivesOnly) {
  SeparableEmbedder e("sep", 4, 20);
  e.assign("a", 0);
  e.assign("a'", 0);
  e.assign("b", 1);
  e.assign("c", 2);
  std::vector<ClaimPair> val{pair_of("1", "a", "a'", Label::Match), pair_of("2", "a", "b", Label::NoMatch),
                             pair_of("3", "b", "c", Label::NoMatch)};
  const auto t = calibrate_threshold(val, e);
  EXPECT_DOUBLE_EQ(t.value, e.same_topic_cosine());
  EXPECT_EQ(t.calibration_n, 1u);
  EXPECT_EQ(t.model_name, "sep");

  std::vector<ClaimPair> negatives_only{val[1]};
  EXPECT_THROW(calibrate_threshold(negatives_only, e), Error);
  std::vector<ClaimPair> leaked{pair_of("4", "a", "a'", Label::Match, Split::Test)};
  EXPECT_THROW(calibrate_threshold(leaked, e), Error);
}

TEST(Classify, InclusiveBoundaryAndModelCheck) {
  EXPECT_EQ(label_for_score(0.5, 0.5), Label::Match);
  EXPECT_EQ(label_for_score(std::nextafter(0.5, 0.0), 0.5), Label::NoMatch);

  SeparableEmbedder e("sep", 2, 4);
  e.assign("a", 0);
  e.assign("a'", 0);
  const auto p = pair_of("x", "a", "a'", Label::Match, Split::Test);
  const Threshold exact{e.same_topic_cosine(), "sep", 1};
  auto pred = classify_by_similarity(p, exact, e);
  EXPECT_EQ(pred.label, Label::Match);
  EXPECT_EQ(pred.pair_id, "x");
  EXPECT_EQ(pred.raw_text.rfind("cosine=", 0), 0u);
  try {
    classify_by_similarity(p, Threshold{0.5, "other-model", 1}, e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ModelMismatch);
  }
}

TEST(Classify, MonotoneInThreshold) {
  Rng rng(4);
  for (int n = 0; n < 1000; ++n) {
    const double s = rng.uniform() * 2 - 1;
    const double t1 = rng.uniform() * 2 - 1;
    const double t2 = t1 + rng.uniform();
    if (label_for_score(s, t2) == Label::Match) {
      ASSERT_EQ(label_for_score(s, t1), Label::Match);
    }
  }
}

TEST(Threshold, JsonRoundTrip) {
  const Threshold t{0.8123, "model", 500};
  const auto back = nlohmann::json(t).get<Threshold>();
  EXPECT_EQ(back.value, t.value);
  EXPECT_EQ(back.model_name, t.model_name);
  EXPECT_EQ(back.calibration_n, t.calibration_n);
  EXPECT_THROW((nlohmann::json{{"value", 0.5}, {"model_name", "m"}, {"calibration_n", 0}}.get<Threshold>()), Error);
}
