#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "guardforge/error.hpp"
#include "guardforge/jsonl.hpp"
#include "guardforge/parser.hpp"

namespace guardforge {

/// Connection settings for an OpenAI-style chat completion endpoint.
/// api_key_env names an environment variable; the key itself is never
/// stored in config files or manifests.
struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string api_key_env = "GUARDFORGE_API_KEY";
    std::string model = "guard-reasoner-8b";
    int timeout_ms = 30000;
    int max_retries = 3;
    int max_inflight = 4;
    int retry_backoff_ms = 250;

    void validate() const;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

/// One chat completion call. sample_tag travels as the X-Sample-Id header so
/// scripted backends can route canned outputs without inspecting the prompt.
struct CompletionRequest {
    std::vector<ChatMessage> messages;
    double temperature = 1.0;
    double top_p = 0.95;
    int n = 1;
    std::optional<std::uint64_t> seed;
    bool logprobs = false;
    std::string sample_tag;

    void validate() const;
};

struct Choice {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
    std::vector<double> token_logprobs;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t total_tokens = 0;

    Usage& operator+=(const Usage& o);
};

struct ChatResult {
    std::vector<Choice> choices;
    Usage usage;
    std::string model;
    double latency_ms = 0.0;
};

/// Serialized request body with a fixed key order, so identical requests
/// produce byte-identical payloads.
json build_request_json(const EndpointConfig& cfg, const CompletionRequest& req);

/// Blocking client. 429 and 5xx responses are retried with exponential
/// backoff; 401/403 raise AuthFailure immediately. An endpoint that rejects
/// n > 1 with HTTP 400 is retried as n sequential single-choice requests
/// (seed incremented per choice when set). Token usage is accumulated across
/// all calls and is safe to read concurrently.
class ChatClient {
public:
    explicit ChatClient(EndpointConfig cfg);

    ChatResult chat_complete(const CompletionRequest& req) const;

    Usage total_usage() const;
    const EndpointConfig& config() const { return cfg_; }

private:
    ChatResult attempt_once(const CompletionRequest& req, const std::string& body) const;

    EndpointConfig cfg_;
    mutable std::mutex usage_mu_;
    mutable Usage usage_;
};

/// One canned completion a scripted backend hands out.
struct ScriptedChoice {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
};

/// In-process HTTP server speaking the same chat completion dialect as the
/// real endpoint. Each sample id owns a list of scripted choices consumed
/// through a cycling cursor, so repeated calls for the same id walk the list
/// and wrap. Requests for ids without a script get a 404 carrying the
/// unknown_sample_id error code.
class MockBackend {
public:
    MockBackend();
    ~MockBackend();
    MockBackend(const MockBackend&) = delete;
    MockBackend& operator=(const MockBackend&) = delete;

    void add_script(const std::string& sample_id, std::vector<ScriptedChoice> outputs);

    /// Respond 400 to any request with n > 1 (exercises the client's
    /// sequential fallback).
    void set_reject_multi_choice(bool reject);

    /// Fail the next `count` requests with the given HTTP status before
    /// serving normally (exercises retry paths).
    void set_fail_first(int count, int status);

    /// Require "Authorization: Bearer <token>" and respond 401 otherwise.
    void set_require_auth(std::string token);

    std::string base_url() const;
    int request_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace guardforge
