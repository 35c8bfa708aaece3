#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/hash.hpp"
#include "claimmatch/rng.hpp"
#include "claimmatch/types.hpp"

namespace claimmatch {

enum class TaskFamily { CM, PD, NLI };
enum class QuestionPosition { Trailing, Leading };

inline const char* to_string(TaskFamily f) {
  switch (f) {
    case TaskFamily::CM: return "CM";
    case TaskFamily::PD: return "PD";
    case TaskFamily::NLI: return "NLI";
  }
  return "CM";
}
inline const char* to_string(QuestionPosition p) { return p == QuestionPosition::Trailing ? "trailing" : "leading"; }

inline QuestionPosition parse_question_position(std::string_view s) {
  if (s == "trailing") return QuestionPosition::Trailing;
  if (s == "leading") return QuestionPosition::Leading;
  throw Error(ErrorCode::ConfigError, "unknown question position '" + std::string(s) + "'");
}

struct LabelWords {
  std::string positive;
  std::string negative;

  const std::string& word_for(Label l) const { return l == Label::Match ? positive : negative; }
  bool operator==(const LabelWords&) const = default;
};

inline constexpr std::string_view kSlotA = "{A}";
inline constexpr std::string_view kSlotB = "{B}";
inline constexpr std::string_view kStatement1 = "Statement 1: ";
inline constexpr std::string_view kStatement2 = "Statement 2: ";
inline constexpr std::string_view kShotSeparator = "\n\n";
inline constexpr std::string_view kDefaultSystemText = "You are a helpful assistant.";

/// A prompt pattern with one {A} (input claim) and one {B} (verified claim)
/// slot. The leading variant puts the question before the statements.
struct PromptTemplate {
  std::string id;
  TaskFamily family = TaskFamily::PD;
  std::string pattern;
  std::string leading_pattern;
  LabelWords labels;
  /// Imperative form of the question, used as a system instruction.
  std::string task_statement;

  const std::string& pattern_for(QuestionPosition pos) const {
    return pos == QuestionPosition::Trailing ? pattern : leading_pattern;
  }
};

namespace detail {

inline std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

struct PatternParts {
  std::string_view before;  // text before the first slot
  std::string_view middle;
  std::string_view after;
  bool a_first = true;
};

inline PatternParts split_pattern(std::string_view pattern) {
  const auto a = pattern.find(kSlotA);
  const auto b = pattern.find(kSlotB);
  PatternParts parts;
  parts.a_first = a < b;
  const auto first = std::min(a, b);
  const auto second = std::max(a, b);
  parts.before = pattern.substr(0, first);
  parts.middle = pattern.substr(first + 3, second - first - 3);
  parts.after = pattern.substr(second + 3);
  return parts;
}

inline void validate_pattern(const std::string& id, std::string_view pattern) {
  if (count_occurrences(pattern, kSlotA) != 1 || count_occurrences(pattern, kSlotB) != 1)
    throw Error(ErrorCode::ConfigError, "template " + id + ": pattern needs exactly one {A} and one {B}");
}

}  // namespace detail

inline void validate(const PromptTemplate& t) {
  if (t.id.empty()) throw Error(ErrorCode::ConfigError, "template without id");
  detail::validate_pattern(t.id, t.pattern);
  detail::validate_pattern(t.id, t.leading_pattern);
  const bool yes_no = t.labels == LabelWords{"yes", "no"};
  const bool true_false = t.labels == LabelWords{"true", "false"};
  if (!yes_no && !true_false)
    throw Error(ErrorCode::ConfigError, "template " + t.id + ": label words must be yes/no or true/false");
  if (t.task_statement.empty()) throw Error(ErrorCode::ConfigError, "template " + t.id + ": empty task statement");
}

class TemplateRegistry {
 public:
  TemplateRegistry() = default;
  explicit TemplateRegistry(std::vector<PromptTemplate> templates) : templates_(std::move(templates)) {
    std::unordered_set<std::string> ids;
    for (const auto& t : templates_) {
      validate(t);
      if (!ids.insert(t.id).second) throw Error(ErrorCode::ConfigError, "duplicate template id " + t.id);
    }
  }

  /// The thirteen built-in claim-matching, paraphrase and inference templates.
  static const TemplateRegistry& builtin();

  static TemplateRegistry from_manifest(std::string_view text);
  std::string to_manifest() const;
  std::string manifest_sha256() const { return sha256_hex(to_manifest()); }

  const PromptTemplate& at(std::string_view id) const {
    for (const auto& t : templates_)
      if (t.id == id) return t;
    throw Error(ErrorCode::UnknownTemplate, "no template '" + std::string(id) + "'");
  }
  bool contains(std::string_view id) const {
    return std::any_of(templates_.begin(), templates_.end(), [&](const auto& t) { return t.id == id; });
  }

  std::span<const PromptTemplate> all() const { return templates_; }
  std::size_t size() const { return templates_.size(); }
  std::size_t count(TaskFamily f) const {
    return static_cast<std::size_t>(
        std::count_if(templates_.begin(), templates_.end(), [f](const auto& t) { return t.family == f; }));
  }

 private:
  std::vector<PromptTemplate> templates_;
};

inline const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry([] {
    const LabelWords yn{"yes", "no"};
    const LabelWords tf{"true", "false"};
    auto pd = [&](std::string id, const std::string& question, const std::string& task) {
      return PromptTemplate{std::move(id), TaskFamily::PD, "{A}. {B}. Question: " + question + " Answer:",
                            "Question: " + question + " {A}. {B}. Answer:", yn, task};
    };
    return std::vector<PromptTemplate>{
        {"CM-1", TaskFamily::CM, "{A} Matches to {B}. Correct? Answer:", "Correct? {A} Matches to {B}. Answer:", yn,
         "Decide whether Statement 1 matches Statement 2; answer yes or no."},
        {"CM-2", TaskFamily::CM, "{A} Means that {B}. Correct? Answer:", "Correct? {A} Means that {B}. Answer:", yn,
         "Decide whether Statement 1 means that Statement 2; answer yes or no."},
        pd("PD-1", "Do Statement 1 and Statement 2 express the same meaning? Yes or no?",
           "Decide whether Statement 1 and Statement 2 express the same meaning; answer yes or no."),
        pd("PD-2", "Do Statement 1 and Statement 2 express the same meaning?",
           "Decide whether Statement 1 and Statement 2 express the same meaning; answer yes or no."),
        pd("PD-3", "Do Statement 1 and Statement 2 have similar meanings? Yes or no?",
           "Decide whether Statement 1 and Statement 2 have similar meanings; answer yes or no."),
        pd("PD-4", "Are Statement 1 and Statement 2 saying the same thing? Yes or no?",
           "Decide whether Statement 1 and Statement 2 are saying the same thing; answer yes or no."),
        pd("PD-5", "Are Statement 1 and Statement 2 essentially the same? Yes or no?",
           "Decide whether Statement 1 and Statement 2 are essentially the same; answer yes or no."),
        pd("PD-6", "Do Statement 1 and Statement 2 both refer to the same event? Yes or no?",
           "Decide whether Statement 1 and Statement 2 both refer to the same event; answer yes or no."),
        {"NLI-1", TaskFamily::NLI, "Suppose it's true that {A}. Then, is {B}. Question: Is true or false? Answer:",
         "Question: Is true or false? Suppose it's true that {A}. Then, is {B}. Answer:", tf,
         "Suppose Statement 1 is true and decide whether Statement 2 is true or false; answer true or false."},
        {"NLI-2", TaskFamily::NLI, "Take the following as truth: {A}. Then {B} is true or false? Answer:",
         "Question: Is Statement 2 true or false? Take the following as truth: {A}. Then {B}. Answer:", tf,
         "Take Statement 1 as truth and decide whether Statement 2 is true or false; answer true or false."},
        {"NLI-3", TaskFamily::NLI, "{A}. Based on the previous statement, is it true that {B}? Yes or no? Answer:",
         "Question: Based on Statement 1, is it true that Statement 2? Yes or no? {A}. {B}. Answer:", yn,
         "Based on Statement 1, decide whether it is true that Statement 2; answer yes or no."},
        {"NLI-4", TaskFamily::NLI, "Given {A} Is it guaranteed true that {B}? Yes or no? Answer:",
         "Question: Given Statement 1, is it guaranteed true that Statement 2? Yes or no? {A}. {B}. Answer:", yn,
         "Given Statement 1, decide whether Statement 2 is guaranteed true; answer yes or no."},
        {"NLI-5", TaskFamily::NLI, "Suppose {A}. Can we infer that {B}? Yes or no? Answer:",
         "Question: Suppose Statement 1. Can we infer that Statement 2? Yes or no? {A}. {B}. Answer:", yn,
         "Suppose Statement 1 and decide whether we can infer Statement 2; answer yes or no."},
    };
  }());
  return registry;
}

// ---------------------------------------------------------------------------
// Manifest: "version 1" header, then blank-line separated records of
// "key: value" lines (id, family, labels, trailing, leading, task).

inline constexpr int kManifestVersion = 1;

inline std::string TemplateRegistry::to_manifest() const {
  std::ostringstream out;
  out << "# claimmatch prompt templates\n";
  out << "version " << kManifestVersion << "\n";
  for (const auto& t : templates_) {
    out << "\n";
    out << "id: " << t.id << "\n";
    out << "family: " << to_string(t.family) << "\n";
    out << "labels: " << t.labels.positive << "/" << t.labels.negative << "\n";
    out << "trailing: " << t.pattern << "\n";
    out << "leading: " << t.leading_pattern << "\n";
    out << "task: " << t.task_statement << "\n";
  }
  return out.str();
}

inline TemplateRegistry TemplateRegistry::from_manifest(std::string_view text) {
  std::vector<PromptTemplate> templates;
  std::optional<PromptTemplate> current;
  std::unordered_set<std::string> seen_keys;
  bool have_version = false;
  auto flush = [&] {
    if (!current) return;
    for (const char* key : {"id", "family", "labels", "trailing", "leading", "task"})
      if (!seen_keys.contains(key))
        throw Error(ErrorCode::ConfigError, "template manifest: record missing '" + std::string(key) + "'");
    templates.push_back(std::move(*current));
    current.reset();
    seen_keys.clear();
  };

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    if (!have_version) {
      if (line != "version " + std::to_string(kManifestVersion))
        throw Error(ErrorCode::ConfigError, "template manifest: unsupported version line '" + line + "'");
      have_version = true;
      continue;
    }
    const auto colon = line.find(": ");
    if (colon == std::string::npos)
      throw Error(ErrorCode::ConfigError, "template manifest line " + std::to_string(lineno) + ": expected 'key: value'");
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    if (!current) current.emplace();
    seen_keys.insert(key);
    if (key == "id") {
      current->id = value;
    } else if (key == "family") {
      if (value == "CM") current->family = TaskFamily::CM;
      else if (value == "PD") current->family = TaskFamily::PD;
      else if (value == "NLI") current->family = TaskFamily::NLI;
      else throw Error(ErrorCode::ConfigError, "template manifest: unknown family '" + value + "'");
    } else if (key == "labels") {
      const auto slash = value.find('/');
      if (slash == std::string::npos) throw Error(ErrorCode::ConfigError, "template manifest: labels need a '/'");
      current->labels = {value.substr(0, slash), value.substr(slash + 1)};
    } else if (key == "trailing") {
      current->pattern = value;
    } else if (key == "leading") {
      current->leading_pattern = value;
    } else if (key == "task") {
      current->task_statement = value;
    } else {
      throw Error(ErrorCode::ConfigError, "template manifest: unknown key '" + key + "'");
    }
  }
  flush();
  if (!have_version) throw Error(ErrorCode::ConfigError, "template manifest: missing version line");
  return TemplateRegistry(std::move(templates));
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_single(const PromptTemplate& tpl, const ClaimPair& pair,
                                 QuestionPosition pos = QuestionPosition::Trailing) {
  const auto parts = detail::split_pattern(tpl.pattern_for(pos));
  const std::string a = std::string(kStatement1) + pair.input_claim;
  const std::string b = std::string(kStatement2) + pair.verified_claim;
  std::string out;
  out.reserve(parts.before.size() + parts.middle.size() + parts.after.size() + a.size() + b.size());
  out += parts.before;
  out += parts.a_first ? a : b;
  out += parts.middle;
  out += parts.a_first ? b : a;
  out += parts.after;
  return out;
}

/// Recovers (input claim, verified claim) from a render_single output.
/// Ambiguous only when a claim itself contains the literal text between the
/// two slots.
inline std::optional<std::pair<std::string, std::string>> extract_claims(
    const PromptTemplate& tpl, std::string_view rendered, QuestionPosition pos = QuestionPosition::Trailing) {
  const auto parts = detail::split_pattern(tpl.pattern_for(pos));
  const std::string first_prefix(parts.a_first ? kStatement1 : kStatement2);
  const std::string second_prefix(parts.a_first ? kStatement2 : kStatement1);
  const std::string head = std::string(parts.before) + first_prefix;
  const std::string mid = std::string(parts.middle) + second_prefix;
  if (!rendered.starts_with(head) || !rendered.ends_with(parts.after)) return std::nullopt;
  std::string_view body = rendered.substr(head.size(), rendered.size() - head.size() - parts.after.size());
  const auto m = body.find(mid);
  if (m == std::string_view::npos) return std::nullopt;
  std::string first(body.substr(0, m));
  std::string second(body.substr(m + mid.size()));
  if (!parts.a_first) std::swap(first, second);
  return std::make_pair(std::move(first), std::move(second));
}

/// Priming examples, already in presentation order.
struct FewShotSet {
  std::vector<ClaimPair> examples;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::uint64_t order_seed = 0;

  bool empty() const { return examples.empty(); }

  /// Balanced set of examples put in a seeded Fisher-Yates order.
  static FewShotSet create(std::vector<ClaimPair> examples, std::uint64_t order_seed) {
    FewShotSet set;
    set.order_seed = order_seed;
    std::unordered_set<std::string> ids;
    for (const auto& e : examples) {
      if (!ids.insert(e.pair_id).second) throw Error(ErrorCode::DuplicateId, "shot pair " + e.pair_id);
      (e.label == Label::Match ? set.n_positive : set.n_negative) += 1;
    }
    if (set.n_positive != set.n_negative)
      throw Error(ErrorCode::InvalidInput, "few-shot set must be balanced (" + std::to_string(set.n_positive) +
                                               " positive vs " + std::to_string(set.n_negative) + " negative)");
    // Canonical order first so the permutation depends only on content and seed.
    std::sort(examples.begin(), examples.end(),
              [](const ClaimPair& x, const ClaimPair& y) { return x.pair_id < y.pair_id; });
    Rng rng(order_seed);
    rng.shuffle(std::span<ClaimPair>(examples));
    set.examples = std::move(examples);
    return set;
  }
};

/// Shot prompts each followed by their gold label word, then the test prompt
/// with an empty answer slot. No shots gives exactly render_single.
inline std::string render_few_shot(const PromptTemplate& tpl, const FewShotSet& shots, const ClaimPair& pair,
                                   QuestionPosition pos = QuestionPosition::Trailing) {
  std::string out;
  for (const auto& shot : shots.examples) {
    if (shot.split == Split::Test || shot.pair_id == pair.pair_id)
      throw Error(ErrorCode::ShotLeak, "shot " + shot.pair_id + " belongs to the test split");
    out += render_single(tpl, shot, pos);
    out += ' ';
    out += tpl.labels.word_for(shot.label);
    out += kShotSeparator;
  }
  out += render_single(tpl, pair, pos);
  return out;
}

enum class InstructionKind { Single, Ensemble };

inline const char* to_string(InstructionKind k) { return k == InstructionKind::Single ? "single" : "ensemble"; }

struct InstructionMode {
  InstructionKind kind = InstructionKind::Single;
  std::optional<std::string> system_template;
  std::string user_template;

  static InstructionMode single(std::string user) { return {InstructionKind::Single, std::nullopt, std::move(user)}; }
  static InstructionMode ensemble(std::string system, std::string user) {
    return {InstructionKind::Ensemble, std::move(system), std::move(user)};
  }
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
  LabelWords expected_labels;
};

inline RenderedPrompt compose_instructions(const InstructionMode& mode, std::string rendered_user,
                                           const TemplateRegistry& registry) {
  const PromptTemplate& user = registry.at(mode.user_template);
  RenderedPrompt out;
  out.user_text = std::move(rendered_user);
  out.expected_labels = user.labels;
  if (mode.kind == InstructionKind::Single) {
    out.system_text = std::string(kDefaultSystemText);
  } else {
    if (!mode.system_template || mode.system_template->empty())
      throw Error(ErrorCode::MissingSystemTemplate, "ensemble mode needs a system template");
    out.system_text = registry.at(*mode.system_template).task_statement;
  }
  return out;
}

}  // namespace claimmatch
