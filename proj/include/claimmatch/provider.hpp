#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/hash.hpp"
#include "claimmatch/jsonl.hpp"
#include "claimmatch/rng.hpp"

namespace claimmatch {

/// Sampling settings sent with each request. Unset fields are left to the
/// provider's defaults.
struct GenerationParams {
  std::string model_name;
  std::optional<int> max_new_tokens;
  std::optional<double> temperature;
  std::optional<double> top_p;

  void validate() const {
    if (max_new_tokens && *max_new_tokens <= 0)
      throw Error(ErrorCode::ConfigError, "max_new_tokens must be positive");
    if (temperature && !(*temperature >= 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
    if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) throw Error(ErrorCode::ConfigError, "top_p must lie in (0, 1]");
  }

  /// "llama": temperature 0.6, top_p 0.9, 400 new tokens.
  /// "mistral": 400 new tokens. "api-default": nothing pinned.
  static GenerationParams preset(std::string_view name, std::string model_name) {
    GenerationParams p;
    p.model_name = std::move(model_name);
    if (name == "llama") {
      p.temperature = 0.6;
      p.top_p = 0.9;
      p.max_new_tokens = 400;
    } else if (name == "mistral") {
      p.max_new_tokens = 400;
    } else if (name != "api-default") {
      throw Error(ErrorCode::ConfigError, "unknown params preset '" + std::string(name) + "'");
    }
    return p;
  }
};

inline void to_json(nlohmann::json& j, const GenerationParams& p) {
  j = nlohmann::json{{"model_name", p.model_name}};
  j["max_new_tokens"] = p.max_new_tokens ? nlohmann::json(*p.max_new_tokens) : nlohmann::json();
  j["temperature"] = p.temperature ? nlohmann::json(*p.temperature) : nlohmann::json();
  j["top_p"] = p.top_p ? nlohmann::json(*p.top_p) : nlohmann::json();
}

struct PromptRequest {
  std::string request_id;
  std::string system_text;
  std::string user_text;
  GenerationParams params;
};

/// Covers everything that shapes the model's answer, so any prompt or
/// parameter change invalidates a recorded response.
inline std::string request_sha256(const PromptRequest& req) {
  nlohmann::json canon{{"system_text", req.system_text}, {"user_text", req.user_text}, {"params", req.params}};
  return sha256_hex(canon.dump());
}

/// Rough token estimate (four UTF-8 bytes per token) for context checks.
inline std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

enum class ResponseStatus { Ok, RateLimited, ProviderError, Timeout };

inline const char* to_string(ResponseStatus s) {
  switch (s) {
    case ResponseStatus::Ok: return "ok";
    case ResponseStatus::RateLimited: return "rate_limited";
    case ResponseStatus::ProviderError: return "provider_error";
    case ResponseStatus::Timeout: return "timeout";
  }
  return "provider_error";
}

inline ResponseStatus parse_response_status(std::string_view s) {
  if (s == "ok") return ResponseStatus::Ok;
  if (s == "rate_limited") return ResponseStatus::RateLimited;
  if (s == "provider_error") return ResponseStatus::ProviderError;
  if (s == "timeout") return ResponseStatus::Timeout;
  throw Error(ErrorCode::InvalidInput, "unknown response status '" + std::string(s) + "'");
}

struct ProviderResponse {
  std::string raw_text;
  std::uint64_t latency_ms = 0;
  ResponseStatus status = ResponseStatus::Ok;
  std::string detail;
  int attempts = 1;

  bool ok() const { return status == ResponseStatus::Ok; }
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  /// Must be safe to call concurrently.
  virtual ProviderResponse complete(const PromptRequest& req) = 0;

  /// Declared context window in tokens, 0 when unbounded.
  virtual std::size_t context_tokens() const { return 0; }
};

// ---------------------------------------------------------------------------
// Retry

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;

  std::chrono::milliseconds delay_after(int attempt) const {
    const double ms = static_cast<double>(backoff_base.count()) * std::pow(backoff_factor, attempt - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

/// Retries rate-limited and timed-out calls with exponential backoff. Other
/// failures pass through on the first attempt. When attempts run out the
/// response is reported as provider_error.
class RetryingChatProvider : public ChatProvider {
 public:
  RetryingChatProvider(std::shared_ptr<ChatProvider> inner, RetryPolicy policy, Sleeper sleeper = real_sleep)
      : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleeper)) {
    if (policy_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
  }

  ProviderResponse complete(const PromptRequest& req) override {
    std::uint64_t total_latency = 0;
    for (int attempt = 1;; ++attempt) {
      ProviderResponse r = inner_->complete(req);
      total_latency += r.latency_ms;
      r.latency_ms = total_latency;
      r.attempts = attempt;
      const bool transient = r.status == ResponseStatus::RateLimited || r.status == ResponseStatus::Timeout;
      if (!transient) return r;
      if (attempt >= policy_.max_attempts) {
        r.detail = "retries exhausted after " + std::to_string(attempt) + " attempts (last status " +
                   to_string(r.status) + ")" + (r.detail.empty() ? "" : ": " + r.detail);
        r.status = ResponseStatus::ProviderError;
        return r;
      }
      sleep_(policy_.delay_after(attempt));
    }
  }

  std::size_t context_tokens() const override { return inner_->context_tokens(); }

 private:
  std::shared_ptr<ChatProvider> inner_;
  RetryPolicy policy_;
  Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Record / replay

struct TranscriptEntry {
  std::string request_id;
  std::string request_sha256;
  std::string raw_text;
  std::uint64_t latency_ms = 0;
  ResponseStatus status = ResponseStatus::Ok;
};

inline void to_json(nlohmann::json& j, const TranscriptEntry& e) {
  j = nlohmann::json{{"request_id", e.request_id},
                     {"request_sha256", e.request_sha256},
                     {"raw_text", e.raw_text},
                     {"latency_ms", e.latency_ms},
                     {"status", to_string(e.status)}};
}

inline void from_json(const nlohmann::json& j, TranscriptEntry& e) {
  e.request_id = j.at("request_id").get<std::string>();
  e.request_sha256 = j.at("request_sha256").get<std::string>();
  e.raw_text = j.at("raw_text").get<std::string>();
  e.latency_ms = j.value("latency_ms", std::uint64_t{0});
  e.status = parse_response_status(j.value("status", std::string("ok")));
}

class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::vector<TranscriptEntry> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  static Transcript load(const std::filesystem::path& path) {
    return Transcript(jsonl::read_as<TranscriptEntry>(path));
  }

  void add(TranscriptEntry e) {
    auto id = e.request_id;
    if (!entries_.emplace(std::move(id), std::move(e)).second)
      throw Error(ErrorCode::DuplicateId, "transcript has two entries for one request id");
  }

  const TranscriptEntry* find(std::string_view request_id) const {
    auto it = entries_.find(std::string(request_id));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  /// Entries ordered by request id.
  std::vector<TranscriptEntry> entries() const {
    std::vector<TranscriptEntry> out;
    out.reserve(entries_.size());
    for (const auto& [_, e] : entries_) out.push_back(e);
    return out;
  }

  void save(const std::filesystem::path& path) const { jsonl::write_file(path, entries()); }

 private:
  std::map<std::string, TranscriptEntry> entries_;
};

/// Wraps a live provider and keeps every exchange for later replay.
class RecordingChatProvider : public ChatProvider {
 public:
  explicit RecordingChatProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}

  ProviderResponse complete(const PromptRequest& req) override {
    ProviderResponse r = inner_->complete(req);
    TranscriptEntry e{req.request_id, request_sha256(req), r.raw_text, r.latency_ms, r.status};
    std::lock_guard lock(mu_);
    transcript_.add(std::move(e));
    return r;
  }

  std::size_t context_tokens() const override { return inner_->context_tokens(); }

  Transcript transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

 private:
  std::shared_ptr<ChatProvider> inner_;
  mutable std::mutex mu_;
  Transcript transcript_;
};

/// Answers from a transcript and never touches the network. A request whose
/// hash differs from the recorded one raises TranscriptMismatch; an unknown
/// request id yields provider_error.
class ReplayChatProvider : public ChatProvider {
 public:
  explicit ReplayChatProvider(Transcript transcript, std::size_t context_tokens = 0)
      : transcript_(std::move(transcript)), context_tokens_(context_tokens) {}

  ProviderResponse complete(const PromptRequest& req) override {
    const TranscriptEntry* e = transcript_.find(req.request_id);
    if (!e) {
      ProviderResponse miss;
      miss.status = ResponseStatus::ProviderError;
      miss.detail = "no recorded response for request " + req.request_id;
      return miss;
    }
    if (e->request_sha256 != request_sha256(req))
      throw Error(ErrorCode::TranscriptMismatch, "request " + req.request_id + " differs from the recorded one");
    ProviderResponse r;
    r.raw_text = e->raw_text;
    r.latency_ms = e->latency_ms;
    r.status = e->status;
    return r;
  }

  std::size_t context_tokens() const override { return context_tokens_; }

 private:
  Transcript transcript_;
  std::size_t context_tokens_;
};

/// Fixed answers keyed by request id; used for oracle and fixture runs.
class ScriptedChatProvider : public ChatProvider {
 public:
  explicit ScriptedChatProvider(std::unordered_map<std::string, std::string> answers, std::size_t context_tokens = 0)
      : answers_(std::move(answers)), context_tokens_(context_tokens) {}

  ProviderResponse complete(const PromptRequest& req) override {
    ProviderResponse r;
    auto it = answers_.find(req.request_id);
    if (it == answers_.end()) {
      r.status = ResponseStatus::ProviderError;
      r.detail = "no scripted answer for " + req.request_id;
    } else {
      r.raw_text = it->second;
    }
    return r;
  }

  std::size_t context_tokens() const override { return context_tokens_; }

 private:
  std::unordered_map<std::string, std::string> answers_;
  std::size_t context_tokens_;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_name;

  std::size_t dim() const { return values.size(); }
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) = 0;
  virtual std::string model_name() const = 0;
};

inline void check_embedding(const EmbeddingVector& v) {
  if (v.values.empty()) throw Error(ErrorCode::ProviderError, "empty embedding from " + v.model_name);
  for (double x : v.values)
    if (!std::isfinite(x)) throw Error(ErrorCode::ProviderError, "non-finite embedding value from " + v.model_name);
}

/// Deterministic pseudo-random vectors seeded by a hash of model and text.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::string model_name = "mock-hash", std::size_t dim = 64)
      : model_(std::move(model_name)), dim_(dim) {}

  EmbeddingVector embed(std::string_view text) override {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    Rng rng(fnv1a64(text, fnv1a64(model_ + '\0')));
    EmbeddingVector v{std::vector<double>(dim_), model_};
    for (auto& x : v.values) x = rng.normal();
    return v;
  }

  std::string model_name() const override { return model_; }

 private:
  std::string model_;
  std::size_t dim_;
};

/// Analytically separable vectors: a text tagged with topic k maps to
/// a*e_k + b*e_(n_topics + i), i being a per-text index. Same-topic texts
/// have cosine a^2/(a^2+b^2) exactly, cross-topic texts cosine 0.
class SeparableEmbedder : public Embedder {
 public:
  SeparableEmbedder(std::string model_name, std::size_t n_topics, std::size_t max_texts, double topic_weight = 1.0,
                    double noise_weight = 0.2)
      : model_(std::move(model_name)), n_topics_(n_topics), max_texts_(max_texts), a_(topic_weight), b_(noise_weight) {}

  void assign(const std::string& text, std::size_t topic) {
    if (topic >= n_topics_) throw Error(ErrorCode::InvalidInput, "topic out of range");
    std::lock_guard lock(mu_);
    if (texts_.contains(text)) return;
    if (texts_.size() >= max_texts_) throw Error(ErrorCode::InvalidInput, "separable embedder is full");
    texts_.emplace(text, std::make_pair(topic, texts_.size()));
  }

  double same_topic_cosine() const { return a_ * a_ / (a_ * a_ + b_ * b_); }

  EmbeddingVector embed(std::string_view text) override {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    std::lock_guard lock(mu_);
    auto it = texts_.find(std::string(text));
    if (it == texts_.end()) throw Error(ErrorCode::ProviderError, "separable embedder has no topic for text");
    EmbeddingVector v{std::vector<double>(n_topics_ + max_texts_, 0.0), model_};
    v.values[it->second.first] = a_;
    v.values[n_topics_ + it->second.second] = b_;
    return v;
  }

  std::string model_name() const override { return model_; }

 private:
  std::string model_;
  std::size_t n_topics_;
  std::size_t max_texts_;
  double a_;
  double b_;
  std::mutex mu_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> texts_;
};

/// Memoizes embeddings by (model name, text hash).
class CachingEmbedder : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {}

  EmbeddingVector embed(std::string_view text) override {
    const std::string key = inner_->model_name() + '\n' + sha256_hex(text);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    EmbeddingVector v = inner_->embed(text);
    check_embedding(v);
    std::lock_guard lock(mu_);
    cache_.emplace(key, v);
    return v;
  }

  std::string model_name() const override { return inner_->model_name(); }

  std::size_t cached() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  std::shared_ptr<Embedder> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

}  // namespace claimmatch
