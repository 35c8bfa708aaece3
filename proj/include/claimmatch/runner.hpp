#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/hash.hpp"
#include "claimmatch/jsonl.hpp"
#include "claimmatch/metrics.hpp"
#include "claimmatch/parsing.hpp"
#include "claimmatch/provider.hpp"
#include "claimmatch/templates.hpp"
#include "claimmatch/types.hpp"

namespace claimmatch {

enum class ShotMode { Zero, Few };
enum class ShotsSource { DomainIndependent, InDomain };
enum class TransportMode { Live, Record, Replay };

inline const char* to_string(ShotMode m) { return m == ShotMode::Zero ? "zero" : "few"; }
inline const char* to_string(ShotsSource s) {
  return s == ShotsSource::DomainIndependent ? "domain_independent" : "in_domain";
}
inline const char* to_string(TransportMode t) {
  switch (t) {
    case TransportMode::Live: return "live";
    case TransportMode::Record: return "record";
    case TransportMode::Replay: return "replay";
  }
  return "live";
}

inline ShotMode parse_shot_mode(std::string_view s) {
  if (s == "zero") return ShotMode::Zero;
  if (s == "few") return ShotMode::Few;
  throw Error(ErrorCode::ConfigError, "shot mode must be zero or few, got '" + std::string(s) + "'");
}
inline ShotsSource parse_shots_source(std::string_view s) {
  if (s == "domain_independent") return ShotsSource::DomainIndependent;
  if (s == "in_domain") return ShotsSource::InDomain;
  throw Error(ErrorCode::ConfigError, "unknown shots source '" + std::string(s) + "'");
}

struct RunConfig {
  std::string run_id;
  std::string provider;
  std::string template_user;
  std::optional<std::string> template_system;
  ShotMode shot_mode = ShotMode::Zero;
  ShotsSource shots_source = ShotsSource::DomainIndependent;
  std::uint64_t seed = 0;
  std::size_t concurrency = 4;
  TransportMode transport = TransportMode::Live;
  std::optional<std::string> transcript_path;
  bool relabel_same_event = false;
  /// Failed requests are skipped and listed instead of aborting the run.
  bool lenient = false;
  QuestionPosition question_position = QuestionPosition::Trailing;
  GenerationParams params;

  InstructionMode instruction_mode() const {
    return template_system ? InstructionMode::ensemble(*template_system, template_user)
                           : InstructionMode::single(template_user);
  }

  std::string template_label() const {
    return template_system ? template_user + " & " + *template_system : template_user;
  }

  /// Readable id derived from the configuration, safe as a directory name.
  std::string default_run_id() const {
    std::string id = template_user;
    if (template_system) id += "+" + *template_system;
    id += std::string("_") + to_string(shot_mode);
    if (shot_mode == ShotMode::Few && shots_source == ShotsSource::InDomain) id += "-indomain";
    if (question_position == QuestionPosition::Leading) id += "_leading";
    if (!provider.empty()) id += "_" + provider;
    for (auto& c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == '_')) c = '-';
    return id;
  }

  void validate() const {
    if (template_user.empty()) throw Error(ErrorCode::ConfigError, "no user template");
    if (concurrency == 0) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
    if (transport == TransportMode::Replay && (!transcript_path || transcript_path->empty()))
      throw Error(ErrorCode::ConfigError, "replay needs a transcript path");
    params.validate();
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"run_id", c.run_id},
                     {"provider", c.provider},
                     {"template_user", c.template_user},
                     {"template_system", c.template_system ? nlohmann::json(*c.template_system) : nlohmann::json()},
                     {"instruction_mode", to_string(c.instruction_mode().kind)},
                     {"shot_mode", to_string(c.shot_mode)},
                     {"shots_source", to_string(c.shots_source)},
                     {"seed", c.seed},
                     {"concurrency", c.concurrency},
                     {"record_or_replay", to_string(c.transport)},
                     {"transcript", c.transcript_path ? nlohmann::json(*c.transcript_path) : nlohmann::json()},
                     {"relabel_same_event", c.relabel_same_event},
                     {"lenient", c.lenient},
                     {"question_position", to_string(c.question_position)},
                     {"params", c.params}};
}

struct RunResult {
  RunConfig config;
  std::vector<Prediction> predictions;  // ordered by pair id
  MetricsReport metrics;
  std::vector<std::string> failed_pairs;
  nlohmann::json manifest;
};

inline std::string dataset_sha256(std::span<const ClaimPair> pairs) {
  std::vector<ClaimPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  return sha256_hex(jsonl::dump(sorted));
}

/// The request that run_experiment sends for one test pair.
inline PromptRequest build_request(const RunConfig& config, const ClaimPair& pair, const FewShotSet& shots,
                                   const TemplateRegistry& registry) {
  const PromptTemplate& tpl = registry.at(config.template_user);
  std::string user = config.shot_mode == ShotMode::Few ? render_few_shot(tpl, shots, pair, config.question_position)
                                                       : render_single(tpl, pair, config.question_position);
  RenderedPrompt prompt = compose_instructions(config.instruction_mode(), std::move(user), registry);
  return PromptRequest{pair.pair_id, std::move(prompt.system_text), std::move(prompt.user_text), config.params};
}

struct RunHooks {
  std::vector<RelabelRule> relabel_rules = default_relabel_rules();
};

/// Render, complete, parse (and optionally relabel) every test pair, then
/// score. Requests run on a bounded pool; outputs are always in pair id
/// order. Shot leaks and context overflows are detected before the first
/// provider call.
inline RunResult run_experiment(RunConfig config, std::span<const ClaimPair> test, const FewShotSet& shots,
                                const TemplateRegistry& registry, ChatProvider& provider, const RunHooks& hooks = {}) {
  config.validate();
  if (config.run_id.empty()) config.run_id = config.default_run_id();
  const PromptTemplate& user_tpl = registry.at(config.template_user);
  if (config.template_system) (void)registry.at(*config.template_system);
  if (test.empty()) throw Error(ErrorCode::EmptyCorpus, "empty test set");

  std::vector<ClaimPair> pairs(test.begin(), test.end());
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  std::unordered_set<std::string> test_ids;
  for (const auto& p : pairs) {
    if (p.split != Split::Test) throw Error(ErrorCode::InvalidInput, "pair " + p.pair_id + " is not in the test split");
    if (!test_ids.insert(p.pair_id).second) throw Error(ErrorCode::DuplicateId, "test pair " + p.pair_id);
  }
  const bool few = config.shot_mode == ShotMode::Few;
  if (few) {
    if (shots.empty()) throw Error(ErrorCode::ConfigError, "few-shot run without shots");
    for (const auto& s : shots.examples)
      if (s.split == Split::Test || test_ids.contains(s.pair_id))
        throw Error(ErrorCode::ShotLeak, "shot " + s.pair_id + " overlaps the test set");
  }

  const FewShotSet no_shots;
  std::vector<PromptRequest> requests;
  requests.reserve(pairs.size());
  const std::size_t context = provider.context_tokens();
  for (const auto& p : pairs) {
    requests.push_back(build_request(config, p, few ? shots : no_shots, registry));
    if (context > 0) {
      const auto& r = requests.back();
      const std::size_t need = estimate_tokens(r.system_text) + estimate_tokens(r.user_text) +
                               static_cast<std::size_t>(config.params.max_new_tokens.value_or(0));
      if (need > context)
        throw Error(ErrorCode::ContextOverflow, "pair " + p.pair_id + " needs ~" + std::to_string(need) +
                                                   " tokens, provider context is " + std::to_string(context));
    }
  }

  std::vector<ProviderResponse> responses(requests.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        responses[i] = provider.complete(requests[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };
  {
    const std::size_t n_workers = std::min(config.concurrency, requests.size());
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RunResult result;
  std::vector<ClaimPair> scored;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ProviderResponse& r = responses[i];
    if (!r.ok()) {
      if (!config.lenient)
        throw Error(ErrorCode::ProviderError, "pair " + pairs[i].pair_id + ": " + to_string(r.status) +
                                                  (r.detail.empty() ? "" : " (" + r.detail + ")"));
      result.failed_pairs.push_back(pairs[i].pair_id);
      continue;
    }
    Prediction pred = parse_response(r.raw_text, user_tpl, pairs[i].pair_id);
    if (config.relabel_same_event) pred = relabel_same_event(std::move(pred), hooks.relabel_rules);
    result.predictions.push_back(std::move(pred));
    scored.push_back(pairs[i]);
  }
  if (scored.empty()) throw Error(ErrorCode::ProviderError, "every request failed");
  result.metrics = compute_metrics(result.predictions, scored);

  nlohmann::json shot_ids = nlohmann::json::array();
  if (few)
    for (const auto& s : shots.examples) shot_ids.push_back(s.pair_id);
  result.manifest = nlohmann::json{{"run_id", config.run_id},
                                   {"config", config},
                                   {"dataset_sha256", dataset_sha256(pairs)},
                                   {"n_pairs", pairs.size()},
                                   {"template_manifest_sha256", registry.manifest_sha256()},
                                   {"shots", shot_ids},
                                   {"shot_order_seed", few ? nlohmann::json(shots.order_seed) : nlohmann::json()},
                                   {"failed_pairs", result.failed_pairs}};
  result.config = std::move(config);
  return result;
}

/// Writes manifest.json, predictions.jsonl and metrics.json (plus
/// transcript.jsonl when given) under dir.
inline void write_run_artifacts(const std::filesystem::path& dir, const RunResult& result,
                                const Transcript* transcript = nullptr) {
  std::filesystem::create_directories(dir);
  jsonl::write_text(dir / "manifest.json", result.manifest.dump(2) + "\n");
  jsonl::write_file(dir / "predictions.jsonl", result.predictions);
  jsonl::write_text(dir / "metrics.json", nlohmann::json(result.metrics).dump(2) + "\n");
  if (transcript) transcript->save(dir / "transcript.jsonl");
}

inline RunRow to_row(const RunConfig& config, const MetricsReport& m) {
  return RunRow{config.run_id.empty() ? config.default_run_id() : config.run_id,
                config.provider,
                config.template_label(),
                std::string(to_string(config.instruction_mode().kind)) + "/" + to_string(config.shot_mode),
                m,
                {}};
}

/// Every combination of user template, instruction kind and shot mode.
/// Ensemble cells put system_template in the system instruction.
inline std::vector<RunConfig> sweep_grid(const RunConfig& base, std::span<const std::string> templates,
                                         std::span<const InstructionKind> kinds, std::span<const ShotMode> shot_modes,
                                         const std::string& system_template = "PD-6") {
  std::vector<RunConfig> grid;
  for (const auto& t : templates)
    for (auto kind : kinds)
      for (auto shot : shot_modes) {
        RunConfig c = base;
        c.template_user = t;
        c.template_system = kind == InstructionKind::Ensemble ? std::optional<std::string>(system_template)
                                                              : std::nullopt;
        c.shot_mode = shot;
        c.run_id = c.default_run_id();
        grid.push_back(std::move(c));
      }
  return grid;
}

struct SweepResult {
  std::vector<RunRow> table;  // compare_runs order
  std::vector<RunResult> runs;
};

using ProviderFactory = std::function<std::shared_ptr<ChatProvider>(const RunConfig&)>;

/// One run per config. A failing run becomes a FAILED row; the sweep goes on.
inline SweepResult sweep(std::span<const RunConfig> configs, const ProviderFactory& make_provider,
                         std::span<const ClaimPair> test, const FewShotSet& shots, const TemplateRegistry& registry,
                         const RunHooks& hooks = {}) {
  SweepResult out;
  std::vector<RunRow> rows;
  for (const auto& config : configs) {
    try {
      auto provider = make_provider(config);
      RunResult r = run_experiment(config, test, shots, registry, *provider, hooks);
      rows.push_back(to_row(r.config, r.metrics));
      out.runs.push_back(std::move(r));
    } catch (const Error& e) {
      RunRow failed = to_row(config, MetricsReport{});
      failed.report.reset();
      failed.error = e.what();
      rows.push_back(std::move(failed));
    }
  }
  out.table = compare_runs(std::move(rows));
  return out;
}

/// Long-text evaluation: the same flow as run_experiment over whole
/// articles (no chunking), with shots taken from the short-text set or from
/// the long-text domain per config.shots_source.
inline RunResult long_text_pipeline(std::span<const ClaimPair> lt_test, RunConfig config,
                                    const FewShotSet& short_text_shots, const FewShotSet& domain_shots,
                                    const TemplateRegistry& registry, ChatProvider& provider,
                                    const RunHooks& hooks = {}) {
  const FewShotSet& shots =
      config.shots_source == ShotsSource::DomainIndependent ? short_text_shots : domain_shots;
  return run_experiment(std::move(config), lt_test, shots, registry, provider, hooks);
}

/// Oracle provider: answers every test pair with its gold label word.
inline std::shared_ptr<ScriptedChatProvider> make_echo_gold_provider(std::span<const ClaimPair> test,
                                                                     const LabelWords& words,
                                                                     std::size_t context_tokens = 0) {
  std::unordered_map<std::string, std::string> answers;
  for (const auto& p : test) {
    std::string word = words.word_for(p.label);
    if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    answers.emplace(p.pair_id, word + ".");
  }
  return std::make_shared<ScriptedChatProvider>(std::move(answers), context_tokens);
}

}  // namespace claimmatch
