#pragma once

// Live chat and embedding providers over HTTP(S). Kept apart from
// provider.hpp so offline code does not pull in httplib and OpenSSL.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/jsonl.hpp"
#include "claimmatch/provider.hpp"

namespace claimmatch {

/// Provider selection file:
/// {"kind": "openai" | "gemini", "endpoint": "...", "model_name": "...",
///  "preset": "api-default" | "llama" | "mistral", "context_tokens": 0,
///  "api_key_env": "...", "timeout_s": 60, "max_retries": 5, "backoff_base_ms": 1000}
struct ProviderConfig {
  std::string kind = "openai";
  std::string endpoint;
  std::string path;
  std::string model_name;
  std::string preset = "api-default";
  std::size_t context_tokens = 0;
  std::string api_key_env;
  int timeout_s = 60;
  int max_retries = 5;
  int backoff_base_ms = 1000;

  GenerationParams params() const { return GenerationParams::preset(preset, model_name); }

  RetryPolicy retry_policy() const {
    return RetryPolicy{max_retries, std::chrono::milliseconds(backoff_base_ms), 2.0};
  }

  std::string default_key_env() const {
    if (kind == "gemini") return "GEMINI_API_KEY";
    return "OPENAI_API_KEY";
  }

  std::string default_endpoint() const {
    if (kind == "gemini") return "https://generativelanguage.googleapis.com";
    return "https://api.openai.com";
  }

  static ProviderConfig from_json(const nlohmann::json& j) {
    ProviderConfig c;
    if (j.contains("api_key"))
      throw Error(ErrorCode::ConfigError, "credentials go in environment variables, not config files");
    try {
      c.kind = j.value("kind", c.kind);
      c.endpoint = j.value("endpoint", std::string{});
      c.path = j.value("path", std::string{});
      c.model_name = j.at("model_name").get<std::string>();
      c.preset = j.value("preset", c.preset);
      c.context_tokens = j.value("context_tokens", std::size_t{0});
      c.api_key_env = j.value("api_key_env", std::string{});
      c.timeout_s = j.value("timeout_s", c.timeout_s);
      c.max_retries = j.value("max_retries", c.max_retries);
      c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("provider config: ") + e.what());
    }
    if (c.endpoint.empty()) c.endpoint = c.default_endpoint();
    if (c.api_key_env.empty()) c.api_key_env = c.default_key_env();
    if (c.timeout_s <= 0 || c.max_retries < 1)
      throw Error(ErrorCode::ConfigError, "provider config: timeout_s and max_retries must be positive");
    (void)c.params();
    return c;
  }

  static ProviderConfig load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(jsonl::read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidInput) throw Error(ErrorCode::ConfigError, e.what());
      throw;
    }
  }
};

inline std::string api_key_from_env(const std::string& var) {
  const char* v = std::getenv(var.c_str());
  if (!v || !*v) throw Error(ErrorCode::ConfigError, "credentials missing: set " + var);
  return v;
}

namespace wire {

inline nlohmann::json openai_chat_request(const PromptRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", req.user_text}});
  nlohmann::json body{{"model", req.params.model_name}, {"messages", messages}};
  if (req.params.max_new_tokens) body["max_tokens"] = *req.params.max_new_tokens;
  if (req.params.temperature) body["temperature"] = *req.params.temperature;
  if (req.params.top_p) body["top_p"] = *req.params.top_p;
  return body;
}

inline std::string openai_chat_text(const nlohmann::json& body) {
  const auto& content = body.at("choices").at(0).at("message").at("content");
  return content.is_null() ? std::string{} : content.get<std::string>();
}

inline nlohmann::json gemini_request(const PromptRequest& req) {
  nlohmann::json body{{"contents", {{{"role", "user"}, {"parts", {{{"text", req.user_text}}}}}}}};
  if (!req.system_text.empty()) body["system_instruction"] = {{"parts", {{{"text", req.system_text}}}}};
  nlohmann::json gen = nlohmann::json::object();
  if (req.params.max_new_tokens) gen["maxOutputTokens"] = *req.params.max_new_tokens;
  if (req.params.temperature) gen["temperature"] = *req.params.temperature;
  if (req.params.top_p) gen["topP"] = *req.params.top_p;
  if (!gen.empty()) body["generationConfig"] = gen;
  return body;
}

inline std::string gemini_text(const nlohmann::json& body) {
  std::string text;
  for (const auto& part : body.at("candidates").at(0).at("content").at("parts"))
    if (part.contains("text")) text += part.at("text").get<std::string>();
  return text;
}

inline nlohmann::json openai_embedding_request(std::string_view text, const std::string& model) {
  return {{"model", model}, {"input", std::string(text)}};
}

inline std::vector<double> openai_embedding_values(const nlohmann::json& body) {
  return body.at("data").at(0).at("embedding").get<std::vector<double>>();
}

inline ResponseStatus status_for_http(int code) {
  if (code >= 200 && code < 300) return ResponseStatus::Ok;
  if (code == 429 || code == 503) return ResponseStatus::RateLimited;
  if (code == 408 || code == 504) return ResponseStatus::Timeout;
  return ResponseStatus::ProviderError;
}

}  // namespace wire

namespace detail {

struct HttpOutcome {
  ResponseStatus status = ResponseStatus::ProviderError;
  std::string body;
  std::string detail;
  std::uint64_t latency_ms = 0;
};

inline HttpOutcome post_json(const ProviderConfig& cfg, const std::string& path, const nlohmann::json& body,
                             const httplib::Headers& headers) {
  HttpOutcome out;
  const auto start = std::chrono::steady_clock::now();
  httplib::Client cli(cfg.endpoint);
  cli.set_connection_timeout(std::chrono::seconds(cfg.timeout_s));
  cli.set_read_timeout(std::chrono::seconds(cfg.timeout_s));
  cli.set_write_timeout(std::chrono::seconds(cfg.timeout_s));
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  out.latency_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
  if (!res) {
    const auto err = res.error();
    out.status = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                     ? ResponseStatus::Timeout
                     : ResponseStatus::ProviderError;
    out.detail = "transport: " + httplib::to_string(err);
    return out;
  }
  out.status = wire::status_for_http(res->status);
  out.body = res->body;
  if (out.status != ResponseStatus::Ok) out.detail = "HTTP " + std::to_string(res->status);
  return out;
}

}  // namespace detail

/// OpenAI-style /v1/chat/completions or Gemini generateContent.
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)), key_(api_key_from_env(cfg_.api_key_env)) {
    if (cfg_.kind != "openai" && cfg_.kind != "gemini")
      throw Error(ErrorCode::ConfigError, "unknown provider kind '" + cfg_.kind + "'");
  }

  ProviderResponse complete(const PromptRequest& req) override {
    const bool gemini = cfg_.kind == "gemini";
    const std::string path = !cfg_.path.empty() ? cfg_.path
                             : gemini ? "/v1beta/models/" + req.params.model_name + ":generateContent"
                                      : "/v1/chat/completions";
    httplib::Headers headers;
    if (gemini) headers.emplace("x-goog-api-key", key_);
    else headers.emplace("Authorization", "Bearer " + key_);

    auto outcome = detail::post_json(cfg_, path, gemini ? wire::gemini_request(req) : wire::openai_chat_request(req),
                                     headers);
    ProviderResponse r;
    r.latency_ms = outcome.latency_ms;
    r.status = outcome.status;
    r.detail = outcome.detail;
    if (r.status != ResponseStatus::Ok) return r;
    try {
      const auto body = nlohmann::json::parse(outcome.body);
      r.raw_text = gemini ? wire::gemini_text(body) : wire::openai_chat_text(body);
    } catch (const nlohmann::json::exception& e) {
      r.status = ResponseStatus::ProviderError;
      r.detail = std::string("unreadable response: ") + e.what();
    }
    return r;
  }

  std::size_t context_tokens() const override { return cfg_.context_tokens; }

 private:
  ProviderConfig cfg_;
  std::string key_;
};

/// OpenAI-style /v1/embeddings with the same retry rules as chat calls.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(ProviderConfig cfg, Sleeper sleeper = real_sleep)
      : cfg_(std::move(cfg)), key_(api_key_from_env(cfg_.api_key_env)), sleep_(std::move(sleeper)) {}

  EmbeddingVector embed(std::string_view text) override {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    const auto policy = cfg_.retry_policy();
    const std::string path = cfg_.path.empty() ? "/v1/embeddings" : cfg_.path;
    httplib::Headers headers{{"Authorization", "Bearer " + key_}};
    for (int attempt = 1;; ++attempt) {
      auto outcome = detail::post_json(cfg_, path, wire::openai_embedding_request(text, cfg_.model_name), headers);
      if (outcome.status == ResponseStatus::Ok) {
        try {
          EmbeddingVector v{wire::openai_embedding_values(nlohmann::json::parse(outcome.body)), cfg_.model_name};
          check_embedding(v);
          return v;
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::ProviderError, std::string("unreadable embedding response: ") + e.what());
        }
      }
      const bool transient = outcome.status == ResponseStatus::RateLimited || outcome.status == ResponseStatus::Timeout;
      if (!transient || attempt >= policy.max_attempts)
        throw Error(ErrorCode::ProviderError, "embedding request failed: " + outcome.detail);
      sleep_(policy.delay_after(attempt));
    }
  }

  std::string model_name() const override { return cfg_.model_name; }

 private:
  ProviderConfig cfg_;
  std::string key_;
  Sleeper sleep_;
};

/// Live chat provider with the configured retry policy.
inline std::shared_ptr<ChatProvider> make_live_chat_provider(const ProviderConfig& cfg, Sleeper sleeper = real_sleep) {
  return std::make_shared<RetryingChatProvider>(std::make_shared<HttpChatProvider>(cfg), cfg.retry_policy(),
                                                std::move(sleeper));
}

}  // namespace claimmatch
