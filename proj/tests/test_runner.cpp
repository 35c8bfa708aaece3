#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "claimmatch/claimmatch.hpp"
#include "synthetic.hpp"

using namespace claimmatch;

namespace {

struct Data {
  std::vector<ClaimPair> test;
  std::vector<ClaimPair> shots;
};

const Data& data() {
  static const Data d = [] {
    synth::SyntheticOptions opt;
    opt.n_links = 40;
    opt.extra_verified = 30;
    opt.seed = 21;
    const auto corpus = synth::make_synthetic_corpus(opt);
    DatasetBuildOptions b;
    b.seed = 4;
    b.shot_positives = 5;
    const auto ds = build_dataset(corpus.claims, corpus.links, b);
    return Data{ds.test, ds.shots};
  }();
  return d;
}

RunConfig base_config(std::string tpl = "PD-6", ShotMode mode = ShotMode::Few) {
  RunConfig c;
  c.provider = "mock";
  c.template_user = std::move(tpl);
  c.shot_mode = mode;
  c.seed = 2;
  c.params = GenerationParams::preset("mistral", "mock-model");
  return c;
}

// Records every request; answers with the gold word after a random delay.
class SpyProvider : public ChatProvider {
 public:
  explicit SpyProvider(std::shared_ptr<ChatProvider> inner, bool jitter = false)
      : inner_(std::move(inner)), jitter_(jitter) {}
  ProviderResponse complete(const PromptRequest& req) override {
    if (jitter_) std::this_thread::sleep_for(std::chrono::microseconds(fnv1a64(req.request_id) % 500));
    {
      std::lock_guard lock(mu);
      seen.push_back(req);
    }
    return inner_->complete(req);
  }
  std::size_t context_tokens() const override { return inner_->context_tokens(); }
  std::mutex mu;
  std::vector<PromptRequest> seen;

 private:
  std::shared_ptr<ChatProvider> inner_;
  bool jitter_;
};

FewShotSet shots(std::uint64_t seed = 2) { return FewShotSet::create(data().shots, seed); }

}  // namespace

TEST(Run, EchoGoldIsPerfect) {
  const auto& r = TemplateRegistry::builtin();
  for (const auto& t : r.all())
    for (auto mode : {ShotMode::Zero, ShotMode::Few}) {
      auto provider = make_echo_gold_provider(data().test, t.labels);
      const auto res = run_experiment(base_config(t.id, mode), data().test, shots(), r, *provider);
      EXPECT_DOUBLE_EQ(res.metrics.f1_weighted, 1.0) << t.id;
      EXPECT_DOUBLE_EQ(res.metrics.accuracy, 1.0) << t.id;
      EXPECT_EQ(res.predictions.size(), data().test.size());
    }
}

TEST(Run, ZeroShotHasNoShotBlock) {
  const auto& r = TemplateRegistry::builtin();
  SpyProvider spy(make_echo_gold_provider(data().test, r.at("PD-6").labels));
  run_experiment(base_config("PD-6", ShotMode::Zero), data().test, shots(), r, spy);
  ASSERT_EQ(spy.seen.size(), data().test.size());
  for (const auto& req : spy.seen) {
    EXPECT_EQ(req.user_text.find(kShotSeparator), std::string::npos);
    EXPECT_EQ(req.system_text, kDefaultSystemText);
  }
}

TEST(Run, EnsemblePutsTaskInSystemMessage) {
  const auto& r = TemplateRegistry::builtin();
  SpyProvider spy(make_echo_gold_provider(data().test, r.at("NLI-5").labels));
  auto c = base_config("NLI-5");
  c.template_system = "PD-6";
  const auto res = run_experiment(c, data().test, shots(), r, spy);
  EXPECT_DOUBLE_EQ(res.metrics.f1_weighted, 1.0);
  for (const auto& req : spy.seen) EXPECT_EQ(req.system_text, r.at("PD-6").task_statement);
  EXPECT_EQ(res.manifest["config"]["instruction_mode"], "ensemble");
}

TEST(Run, OutputIndependentOfConcurrency) {
  const auto& r = TemplateRegistry::builtin();
  auto noisy = std::make_shared<ScriptedChatProvider>(synth::noisy_answers(data().test, r.at("PD-6").labels, 5));
  std::string first;
  for (std::size_t workers : {1u, 3u, 8u}) {
    SpyProvider spy(noisy, true);
    auto c = base_config();
    c.concurrency = workers;
    const auto res = run_experiment(c, data().test, shots(), r, spy);
    const auto out = jsonl::dump(res.predictions) + nlohmann::json(res.metrics).dump();
    if (first.empty()) first = out;
    EXPECT_EQ(out, first) << workers;
  }
}

TEST(Run, ShotLeakCaughtBeforeAnyCall) {
  const auto& r = TemplateRegistry::builtin();
  SpyProvider spy(make_echo_gold_provider(data().test, r.at("PD-6").labels));
  FewShotSet set;
  set.examples = data().shots;
  set.examples[0] = data().test[0];
  try {
    run_experiment(base_config(), data().test, set, r, spy);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShotLeak);
  }
  EXPECT_TRUE(spy.seen.empty());
}

TEST(Run, ContextOverflowCaughtBeforeAnyCall) {
  const auto& r = TemplateRegistry::builtin();
  SpyProvider spy(make_echo_gold_provider(data().test, r.at("PD-6").labels, 1000));
  try {
    run_experiment(base_config(), data().test, shots(), r, spy);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContextOverflow);
  }
  EXPECT_TRUE(spy.seen.empty());
  // zero-shot prompts fit
  EXPECT_NO_THROW(run_experiment(base_config("PD-6", ShotMode::Zero), data().test, shots(), r, spy));
}

TEST(Run, TransportFailureAbortsUnlessLenient) {
  const auto& r = TemplateRegistry::builtin();
  std::unordered_map<std::string, std::string> answers;
  for (const auto& p : data().test)
    if (p.pair_id != data().test[3].pair_id) answers.emplace(p.pair_id, "Yes.");
  ScriptedChatProvider holey(answers);
  try {
    run_experiment(base_config(), data().test, shots(), r, holey);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 3);
  }
  auto c = base_config();
  c.lenient = true;
  const auto res = run_experiment(c, data().test, shots(), r, holey);
  EXPECT_EQ(res.failed_pairs, std::vector<std::string>{data().test[3].pair_id});
  EXPECT_EQ(res.predictions.size(), data().test.size() - 1);
  EXPECT_EQ(res.metrics.n, data().test.size() - 1);
  EXPECT_EQ(res.manifest["failed_pairs"].size(), 1u);
}

TEST(Run, ReplayDetectsEditedPrompts) {
  const auto& r = TemplateRegistry::builtin();
  RecordingChatProvider rec(make_echo_gold_provider(data().test, r.at("PD-6").labels));
  const auto recorded = run_experiment(base_config(), data().test, shots(), r, rec);
  ReplayChatProvider replay(rec.transcript());
  auto c = base_config();
  c.transport = TransportMode::Replay;
  c.transcript_path = "unused";
  const auto replayed = run_experiment(c, data().test, shots(), r, replay);
  EXPECT_EQ(jsonl::dump(replayed.predictions), jsonl::dump(recorded.predictions));

  auto other_order = shots(99);
  try {
    run_experiment(c, data().test, other_order, r, replay);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TranscriptMismatch);
  }
}

TEST(Run, RelabelFlag) {
  const auto& r = TemplateRegistry::builtin();
  std::unordered_map<std::string, std::string> answers;
  for (const auto& p : data().test)
    answers.emplace(p.pair_id, p.label == Label::Match ? "No. They are similar, but not the same events." : "No.");
  ScriptedChatProvider p(answers);
  auto c = base_config();
  const auto plain = run_experiment(c, data().test, shots(), r, p);
  EXPECT_DOUBLE_EQ(plain.metrics.accuracy, 0.5);
  c.relabel_same_event = true;
  const auto relabeled = run_experiment(c, data().test, shots(), r, p);
  EXPECT_DOUBLE_EQ(relabeled.metrics.accuracy, 1.0);
}

TEST(Run, ManifestAndArtifacts) {
  const auto& r = TemplateRegistry::builtin();
  auto provider = make_echo_gold_provider(data().test, r.at("PD-6").labels);
  const auto res = run_experiment(base_config(), data().test, shots(), r, *provider);
  EXPECT_EQ(res.config.run_id, "PD-6_few_mock");
  EXPECT_EQ(res.manifest["shots"].size(), 10u);
  EXPECT_EQ(res.manifest["template_manifest_sha256"], r.manifest_sha256());
  EXPECT_EQ(res.manifest["dataset_sha256"].get<std::string>().size(), 64u);
  const auto dir = std::filesystem::temp_directory_path() / "claimmatch_runner_artifacts";
  std::filesystem::remove_all(dir);
  write_run_artifacts(dir, res);
  EXPECT_EQ(jsonl::read_as<Prediction>(dir / "predictions.jsonl").size(), data().test.size());
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.json"));
  std::filesystem::remove_all(dir);
}

TEST(Sweep, AllTemplatesAndFailures) {
  const auto& r = TemplateRegistry::builtin();
  std::vector<std::string> ids;
  for (const auto& t : r.all()) ids.push_back(t.id);
  const std::vector<InstructionKind> single{InstructionKind::Single};
  const std::vector<ShotMode> both{ShotMode::Zero, ShotMode::Few};
  const auto grid = sweep_grid(base_config(), ids, single, both);
  ASSERT_EQ(grid.size(), 26u);
  auto factory = [&](const RunConfig& c) -> std::shared_ptr<ChatProvider> {
    if (c.template_user == "CM-2") throw Error(ErrorCode::ConfigError, "transcript missing");
    return make_echo_gold_provider(data().test, r.at(c.template_user).labels);
  };
  const auto out = sweep(grid, factory, data().test, shots(), r);
  ASSERT_EQ(out.table.size(), 26u);
  EXPECT_EQ(out.runs.size(), 24u);
  EXPECT_TRUE(out.table[24].failed());
  EXPECT_TRUE(out.table[25].failed());
  EXPECT_FALSE(out.table[0].failed());
}

TEST(Sweep, EnsembleGrid) {
  const std::vector<std::string> ids{"CM-1", "PD-6", "NLI-5"};
  const std::vector<InstructionKind> kinds{InstructionKind::Ensemble};
  const std::vector<ShotMode> both{ShotMode::Zero, ShotMode::Few};
  const auto grid = sweep_grid(base_config(), ids, kinds, both);
  ASSERT_EQ(grid.size(), 6u);
  for (const auto& c : grid) EXPECT_EQ(c.template_system, "PD-6");
  EXPECT_EQ(grid[4].default_run_id(), "NLI-5+PD-6_zero_mock");
}

TEST(LongText, ShotSourceSelection) {
  const auto& r = TemplateRegistry::builtin();
  auto domain_pairs = data().shots;
  for (auto& p : domain_pairs) p.pair_id = "lt-" + p.pair_id;
  const auto domain = FewShotSet::create(domain_pairs, 1);
  SpyProvider spy(make_echo_gold_provider(data().test, r.at("PD-6").labels));
  auto c = base_config();
  c.shots_source = ShotsSource::InDomain;
  const auto res = long_text_pipeline(data().test, c, shots(), domain, r, spy);
  EXPECT_EQ(res.manifest["shots"][0].get<std::string>().substr(0, 3), "lt-");
  EXPECT_EQ(res.config.run_id, "PD-6_few-indomain_mock");
}
