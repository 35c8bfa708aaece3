// claimmatch command line.
//
// Exit codes: 0 ok, 2 configuration, 3 provider, 4 data validation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>

#include "claimmatch/claimmatch.hpp"
#include "claimmatch/http_provider.hpp"

namespace fs = std::filesystem;
using namespace claimmatch;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string record;
  std::string replay;
  std::optional<std::size_t> concurrency;
  bool relabel = false;
  bool lenient = false;
  std::string relabel_rules;
};

json load_json(const fs::path& path, ErrorCode on_error = ErrorCode::ConfigError) {
  try {
    return json::parse(jsonl::read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(on_error, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(on_error, e.what());
  }
}

void write_json(const fs::path& path, const json& j) { jsonl::write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Experiment configuration file
//
// {"provider": {"kind": "openai" | "gemini" | "echo-gold", ...},
//  "template_user": "PD-6", "template_system": null, "shot_mode": "few",
//  "shots_source": "domain_independent", "question_position": "trailing",
//  "seed": 0, "concurrency": 4, "lenient": false, "relabel_same_event": false,
//  "test": "test.jsonl", "shots": "shots.jsonl", "domain_shots": null,
//  "out_dir": "results",
//  "sweep": {"templates": [...], "instruction_kinds": ["single"],
//            "shot_modes": ["zero", "few"], "system_template": "PD-6"}}
//
// Relative paths resolve against the config file's directory.

struct Experiment {
  json provider;
  RunConfig run;
  fs::path test;
  fs::path shots;
  std::optional<fs::path> domain_shots;
  fs::path out_dir = "results";
  json sweep;
};

Experiment load_experiment(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required");
  const json j = load_json(g.config);
  const fs::path base = fs::path(g.config).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  Experiment x;
  try {
    x.provider = j.at("provider");
    if (x.provider.contains("api_key"))
      throw Error(ErrorCode::ConfigError, "credentials go in environment variables, not config files");
    const std::string kind = x.provider.value("kind", "openai");
    RunConfig& c = x.run;
    c.provider = x.provider.value("name", kind);
    c.template_user = j.value("template_user", "PD-6");
    if (j.contains("template_system") && !j["template_system"].is_null())
      c.template_system = j["template_system"].get<std::string>();
    c.shot_mode = parse_shot_mode(j.value("shot_mode", "few"));
    c.shots_source = parse_shots_source(j.value("shots_source", "domain_independent"));
    c.question_position = parse_question_position(j.value("question_position", "trailing"));
    c.seed = j.value("seed", std::uint64_t{0});
    c.concurrency = j.value("concurrency", std::size_t{4});
    c.lenient = j.value("lenient", false);
    c.relabel_same_event = j.value("relabel_same_event", false);
    c.run_id = j.value("run_id", std::string{});
    c.params = GenerationParams::preset(x.provider.value("preset", "api-default"),
                                        x.provider.value("model_name", kind));
    x.test = resolve(j.at("test").get<std::string>());
    if (j.contains("shots") && !j["shots"].is_null()) x.shots = resolve(j["shots"].get<std::string>());
    if (j.contains("domain_shots") && !j["domain_shots"].is_null())
      x.domain_shots = resolve(j["domain_shots"].get<std::string>());
    x.out_dir = resolve(j.value("out_dir", "results"));
    x.sweep = j.value("sweep", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, g.config + ": " + e.what());
  }
  if (g.seed) x.run.seed = *g.seed;
  if (g.concurrency) x.run.concurrency = *g.concurrency;
  if (g.relabel) x.run.relabel_same_event = true;
  if (g.lenient) x.run.lenient = true;
  return x;
}

std::shared_ptr<ChatProvider> live_provider(const json& provider, std::span<const ClaimPair> test,
                                            const TemplateRegistry& registry, const RunConfig& run) {
  const std::string kind = provider.value("kind", "openai");
  if (kind == "echo-gold")
    return make_echo_gold_provider(test, registry.at(run.template_user).labels,
                                   provider.value("context_tokens", std::size_t{0}));
  return make_live_chat_provider(ProviderConfig::from_json(provider));
}

FewShotSet load_shots(const std::optional<fs::path>& path, std::uint64_t seed) {
  if (!path || path->empty()) return {};
  return FewShotSet::create(jsonl::read_as<ClaimPair>(*path), seed);
}

RunHooks hooks_for(const Globals& g) {
  RunHooks h;
  if (!g.relabel_rules.empty()) h.relabel_rules = load_relabel_rules(g.relabel_rules);
  return h;
}

void print_summary(const RunResult& r, const fs::path& dir) {
  std::printf("%s: F1 %s%%, accuracy %s%%, n=%zu, fallback %s%%, failed %zu -> %s\n", r.config.run_id.c_str(),
              format_percent(r.metrics.f1_weighted).c_str(), format_percent(r.metrics.accuracy).c_str(),
              r.metrics.n, format_percent(r.metrics.fallback_rate).c_str(), r.failed_pairs.size(),
              dir.string().c_str());
}

// ---------------------------------------------------------------------------
// Subcommands

struct BuildArgs {
  std::string positives, pool, out, stats_out, validation_out, shots_out;
  std::optional<double> dedup_ratio;
  std::size_t presample = 0, test_positives = 0, validation_positives = 0, shot_positives = 0;
};

int cmd_build(const Globals& g, const BuildArgs& a) {
  std::vector<RawClaim> claims;
  for (const auto& j : jsonl::read_file(a.pool)) claims.push_back(raw_claim_from_json(j));
  std::vector<GoldLink> links;
  for (const auto& j : jsonl::read_file(a.positives)) {
    try {
      links.push_back({j.at("input_id").get<std::string>(), j.at("verified_id").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, a.positives + ": " + e.what());
    }
  }
  DatasetBuildOptions opt;
  opt.seed = g.seed.value_or(0);
  opt.dedup_ratio = a.dedup_ratio;
  opt.presample = a.presample;
  opt.test_positives = a.test_positives;
  opt.validation_positives = a.validation_positives;
  opt.shot_positives = a.shot_positives;
  const auto ds = build_dataset(claims, links, opt);

  jsonl::write_file(a.out, ds.test);
  if (!a.validation_out.empty()) jsonl::write_file(a.validation_out, ds.validation);
  else if (!ds.validation.empty()) std::cerr << "note: validation split built but --validation-out not given\n";
  if (!a.shots_out.empty()) jsonl::write_file(a.shots_out, ds.shots);
  else if (!ds.shots.empty()) std::cerr << "note: shot split built but --shots-out not given\n";
  json stats{{"test", corpus_stats(ds.test)},
             {"seed", opt.seed},
             {"dropped_empty", ds.dropped_empty},
             {"dropped_near_duplicate", ds.dropped_near_duplicate}};
  if (!ds.validation.empty()) stats["validation"] = corpus_stats(ds.validation);
  if (!ds.shots.empty()) stats["shots"] = corpus_stats(ds.shots);
  if (!a.stats_out.empty()) write_json(a.stats_out, stats);
  std::printf("test %zu pairs, validation %zu, shots %zu; dropped %zu empty, %zu near-duplicate\n", ds.test.size(),
              ds.validation.size(), ds.shots.size(), ds.dropped_empty, ds.dropped_near_duplicate);
  return 0;
}

std::shared_ptr<Embedder> make_embedder(const std::string& name) {
  std::shared_ptr<Embedder> inner;
  if (name == "mock-hash") inner = std::make_shared<HashEmbedder>();
  else if (name.ends_with(".json")) inner = std::make_shared<HttpEmbedder>(ProviderConfig::load(name));
  else throw Error(ErrorCode::ConfigError, "unknown embedder '" + name + "' (use mock-hash or a provider config .json)");
  return std::make_shared<CachingEmbedder>(inner);
}

int cmd_calibrate(const std::string& validation, const std::string& embedder, const std::string& out) {
  auto e = make_embedder(embedder);
  const auto pairs = jsonl::read_as<ClaimPair>(validation);
  const Threshold t = calibrate_threshold(pairs, *e);
  write_json(out, t);
  std::printf("threshold %.6f from %zu positive pairs (%s)\n", t.value, t.calibration_n, t.model_name.c_str());
  return 0;
}

int cmd_baseline(const std::string& test, const std::string& threshold, const std::string& embedder,
                 const std::string& out, const std::string& metrics_out) {
  auto e = make_embedder(embedder);
  const auto t = load_json(threshold, ErrorCode::InvalidInput).get<Threshold>();
  const auto pairs = jsonl::read_as<ClaimPair>(test);
  std::vector<Prediction> preds;
  preds.reserve(pairs.size());
  for (const auto& p : pairs) preds.push_back(classify_by_similarity(p, t, *e));
  std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  jsonl::write_file(out, preds);
  const auto m = compute_metrics(preds, pairs);
  if (!metrics_out.empty()) write_json(metrics_out, m);
  std::printf("baseline: F1 %s%%, accuracy %s%%\n", format_percent(m.f1_weighted).c_str(),
              format_percent(m.accuracy).c_str());
  return 0;
}

int cmd_run(const Globals& g) {
  Experiment x = load_experiment(g);
  const auto& registry = TemplateRegistry::builtin();
  const auto test = jsonl::read_as<ClaimPair>(x.test);
  const FewShotSet shots = load_shots(x.shots.empty() ? std::nullopt : std::optional(x.shots), x.run.seed);
  const FewShotSet domain = load_shots(x.domain_shots, x.run.seed);
  if (x.run.run_id.empty()) x.run.run_id = x.run.default_run_id();

  std::shared_ptr<ChatProvider> provider;
  std::shared_ptr<RecordingChatProvider> recorder;
  if (!g.replay.empty()) {
    x.run.transport = TransportMode::Replay;
    x.run.transcript_path = g.replay;
    provider = std::make_shared<ReplayChatProvider>(Transcript::load(g.replay),
                                                    x.provider.value("context_tokens", std::size_t{0}));
  } else {
    provider = live_provider(x.provider, test, registry, x.run);
    if (!g.record.empty()) {
      x.run.transport = TransportMode::Record;
      x.run.transcript_path = g.record;
      recorder = std::make_shared<RecordingChatProvider>(provider);
      provider = recorder;
    }
  }

  RunResult r;
  try {
    r = long_text_pipeline(test, x.run, shots, domain.empty() ? shots : domain, registry, *provider, hooks_for(g));
  } catch (...) {
    // keep whatever was recorded before the failure
    if (recorder) recorder->transcript().save(g.record);
    throw;
  }
  const fs::path dir = x.out_dir / r.config.run_id;
  std::optional<Transcript> transcript;
  if (recorder) {
    transcript = recorder->transcript();
    transcript->save(g.record);
  } else if (!g.replay.empty()) {
    transcript = Transcript::load(g.replay);
  }
  write_run_artifacts(dir, r, transcript ? &*transcript : nullptr);
  print_summary(r, dir);
  return 0;
}

int cmd_sweep(const Globals& g) {
  Experiment x = load_experiment(g);
  const auto& registry = TemplateRegistry::builtin();
  const auto test = jsonl::read_as<ClaimPair>(x.test);
  const FewShotSet shots = load_shots(x.shots.empty() ? std::nullopt : std::optional(x.shots), x.run.seed);

  std::vector<std::string> templates;
  std::vector<InstructionKind> kinds;
  std::vector<ShotMode> modes;
  std::string system_template;
  try {
    if (x.sweep.contains("templates")) templates = x.sweep["templates"].get<std::vector<std::string>>();
    else
      for (const auto& t : registry.all()) templates.push_back(t.id);
    for (const auto& k : x.sweep.value("instruction_kinds", std::vector<std::string>{"single"})) {
      if (k == "single") kinds.push_back(InstructionKind::Single);
      else if (k == "ensemble") kinds.push_back(InstructionKind::Ensemble);
      else throw Error(ErrorCode::ConfigError, "unknown instruction kind '" + k + "'");
    }
    for (const auto& m : x.sweep.value("shot_modes", std::vector<std::string>{"zero", "few"}))
      modes.push_back(parse_shot_mode(m));
    system_template = x.sweep.value("system_template", "PD-6");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("sweep: ") + e.what());
  }
  for (const auto& t : templates) (void)registry.at(t);
  const auto grid = sweep_grid(x.run, templates, kinds, modes, system_template);

  // --record / --replay name a directory holding one <run_id>.jsonl per run.
  std::map<std::string, std::shared_ptr<RecordingChatProvider>> recorders;
  ProviderFactory factory = [&](const RunConfig& c) -> std::shared_ptr<ChatProvider> {
    if (!g.replay.empty()) {
      const fs::path path = fs::path(g.replay) / (c.run_id + ".jsonl");
      if (!fs::exists(path)) throw Error(ErrorCode::ConfigError, "no transcript " + path.string());
      return std::make_shared<ReplayChatProvider>(Transcript::load(path),
                                                  x.provider.value("context_tokens", std::size_t{0}));
    }
    auto p = live_provider(x.provider, test, registry, c);
    if (g.record.empty()) return p;
    auto rec = std::make_shared<RecordingChatProvider>(p);
    recorders[c.run_id] = rec;
    return rec;
  };
  std::vector<RunConfig> configs = grid;
  for (auto& c : configs) {
    if (!g.replay.empty()) {
      c.transport = TransportMode::Replay;
      c.transcript_path = (fs::path(g.replay) / (c.run_id + ".jsonl")).string();
    } else if (!g.record.empty()) {
      c.transport = TransportMode::Record;
      c.transcript_path = (fs::path(g.record) / (c.run_id + ".jsonl")).string();
    }
  }
  const auto out = sweep(configs, factory, test, shots, registry, hooks_for(g));

  for (const auto& r : out.runs) {
    std::optional<Transcript> transcript;
    if (auto it = recorders.find(r.config.run_id); it != recorders.end()) {
      transcript = it->second->transcript();
      transcript->save(fs::path(g.record) / (r.config.run_id + ".jsonl"));
    }
    write_run_artifacts(x.out_dir / r.config.run_id, r, transcript ? &*transcript : nullptr);
  }
  const std::string table = render_table(out.table);
  jsonl::write_text(x.out_dir / "sweep_table.txt", table);
  write_json(x.out_dir / "sweep_table.json", out.table);
  std::cout << table;
  const bool any_failed = std::any_of(out.table.begin(), out.table.end(), [](const auto& r) { return r.failed(); });
  return any_failed ? 3 : 0;
}

int cmd_evaluate(const std::string& preds_path, const std::string& gold_path, const std::string& out) {
  const auto preds = jsonl::read_as<Prediction>(preds_path);
  const auto gold = jsonl::read_as<ClaimPair>(gold_path);
  const auto m = compute_metrics(preds, gold);
  if (!out.empty()) write_json(out, m);
  RunRow row{fs::path(preds_path).parent_path().filename().string(), "-", "-", "-", m, {}};
  std::cout << nlohmann::json(m).dump(2) << "\n" << render_table({row});
  return 0;
}

int cmd_aggregate(const std::vector<std::string>& files, const std::string& out) {
  std::vector<MetricsReport> reports;
  for (const auto& f : files) reports.push_back(load_json(f, ErrorCode::InvalidInput).get<MetricsReport>());
  const auto a = aggregate(reports);
  if (!out.empty()) write_json(out, a);
  std::cout << nlohmann::json(a).dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& results, const std::string& out) {
  std::vector<RunRow> rows;
  if (!fs::is_directory(results)) throw Error(ErrorCode::InvalidInput, "no results directory " + results);
  for (const auto& entry : fs::directory_iterator(results)) {
    const fs::path dir = entry.path();
    if (!fs::exists(dir / "manifest.json") || !fs::exists(dir / "metrics.json")) continue;
    const json manifest = load_json(dir / "manifest.json", ErrorCode::InvalidInput);
    const json& c = manifest.at("config");
    const std::string user = c.at("template_user");
    const std::string label = c.at("template_system").is_null() ? user : user + " & " + c["template_system"].get<std::string>();
    rows.push_back(RunRow{manifest.at("run_id"), c.at("provider"), label,
                          c.at("instruction_mode").get<std::string>() + "/" + c.at("shot_mode").get<std::string>(),
                          load_json(dir / "metrics.json", ErrorCode::InvalidInput).get<MetricsReport>(), {}});
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidInput, "no runs under " + results);
  const auto sorted = compare_runs(std::move(rows));
  const std::string table = render_table(sorted);
  if (!out.empty()) jsonl::write_text(out, table);
  std::cout << table;
  return 0;
}

int cmd_templates(const std::string& out) {
  const auto text = TemplateRegistry::builtin().to_manifest();
  if (out.empty()) std::cout << text;
  else jsonl::write_text(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Claim matching with LLM prompts and an embedding baseline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--seed", g.seed, "override the seed");
  auto* rec = app.add_option("--record", g.record, "record provider traffic to this transcript");
  app.add_option("--replay", g.replay, "answer from this transcript instead of the provider")->excludes(rec);
  app.add_option("--concurrency", g.concurrency, "requests in flight")->check(CLI::PositiveNumber);
  app.add_flag("--relabel-same-event", g.relabel, "flip 'same event, minor differences' answers to Match");
  app.add_option("--relabel-rules", g.relabel_rules, "JSON file with relabel patterns");
  app.add_flag("--lenient", g.lenient, "skip and list failed requests instead of aborting");

  BuildArgs b;
  auto* build = app.add_subcommand("build-dataset", "build balanced pair splits from claims and gold links");
  build->add_option("--positives", b.positives, "gold links JSONL {input_id, verified_id}")->required();
  build->add_option("--pool", b.pool, "raw claims JSONL")->required();
  build->add_option("--dedup-ratio", b.dedup_ratio, "drop positives above this Levenshtein ratio");
  build->add_option("--out", b.out, "test split JSONL")->required();
  build->add_option("--stats-out", b.stats_out);
  build->add_option("--validation-out", b.validation_out);
  build->add_option("--shots-out", b.shots_out);
  build->add_option("--presample", b.presample, "draw this many positives before dedup");
  build->add_option("--test-positives", b.test_positives, "0 = all remaining");
  build->add_option("--validation-positives", b.validation_positives);
  build->add_option("--shot-positives", b.shot_positives);

  std::string validation, embedder = "mock-hash", out, test, threshold, metrics_out, preds, gold, results;
  std::vector<std::string> metric_files;
  auto* calibrate = app.add_subcommand("calibrate", "median similarity threshold from validation positives");
  calibrate->add_option("--validation", validation)->required();
  calibrate->add_option("--embedder", embedder, "mock-hash or an embedding provider config .json");
  calibrate->add_option("--out", out)->required();

  auto* baseline = app.add_subcommand("baseline", "classify pairs by embedding similarity");
  baseline->add_option("--test", test)->required();
  baseline->add_option("--threshold", threshold)->required();
  baseline->add_option("--embedder", embedder);
  baseline->add_option("--out", out)->required();
  baseline->add_option("--metrics-out", metrics_out);

  auto* run = app.add_subcommand("run", "one prompt experiment");
  auto* sweep_cmd = app.add_subcommand("sweep", "template x instruction x shot grid");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold pairs");
  evaluate->add_option("--preds", preds)->required();
  evaluate->add_option("--gold", gold)->required();
  evaluate->add_option("--out", out);

  auto* agg = app.add_subcommand("aggregate", "mean and standard error over repeated runs");
  agg->add_option("metrics", metric_files, "metrics.json files")->required();
  agg->add_option("--out", out);

  auto* report = app.add_subcommand("report", "comparison table over a results directory");
  report->add_option("--results", results)->required();
  report->add_option("--out", out);

  auto* templates = app.add_subcommand("templates", "write the template manifest");
  templates->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*build) return cmd_build(g, b);
    if (*calibrate) return cmd_calibrate(validation, embedder, out);
    if (*baseline) return cmd_baseline(test, threshold, embedder, out, metrics_out);
    if (*run) return cmd_run(g);
    if (*sweep_cmd) return cmd_sweep(g);
    if (*evaluate) return cmd_evaluate(preds, gold, out);
    if (*agg) return cmd_aggregate(metric_files, out);
    if (*report) return cmd_report(results, out);
    if (*templates) return cmd_templates(out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
