#include "guardforge/client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

namespace guardforge {

namespace {

// base_url may carry a path prefix (".../v1"); httplib's client wants the
// origin only, so the prefix is split off and prepended to the request path.
void split_base_url(const std::string& base_url, std::string& origin, std::string& prefix) {
    auto scheme_end = base_url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) {
        origin = base_url;
        prefix.clear();
    } else {
        origin = base_url.substr(0, path_start);
        prefix = base_url.substr(path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

// Internal signal for HTTP-level failures so the retry loop can decide on
// status codes instead of parsing error strings. status 0 means the request
// never produced a response.
struct HttpFailure {
    int status = 0;
    bool timeout = false;
    std::string message;
};

std::string error_code_of(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("error")) return {};
    const auto& e = j["error"];
    if (e.is_object() && e.contains("code") && e["code"].is_string()) {
        return e["code"].get<std::string>();
    }
    return {};
}

std::string error_message_of(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("error")) return body;
    const auto& e = j["error"];
    if (e.is_object() && e.contains("message") && e["message"].is_string()) {
        return e["message"].get<std::string>();
    }
    return body;
}

void sleep_backoff(int base_ms, int attempt) {
    // Exponential backoff with a small uniform jitter to spread concurrent
    // retries apart.
    static thread_local std::mt19937_64 eng{std::random_device{}()};
    const double base = static_cast<double>(base_ms) * std::pow(2.0, attempt);
    std::uniform_real_distribution<double> jitter(0.0, base * 0.25 + 1.0);
    const auto ms = static_cast<std::int64_t>(base + jitter(eng));
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

ChatResult parse_chat_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::EndpointUnavailable,
                    std::string("malformed endpoint response: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw Error(ErrorKind::EndpointUnavailable, "endpoint response has no choices");
    }
    ChatResult out;
    if (j.contains("model") && j["model"].is_string()) {
        out.model = j["model"].get<std::string>();
    }
    for (const auto& c : j["choices"]) {
        Choice ch;
        if (c.contains("message") && c["message"].contains("content") &&
            c["message"]["content"].is_string()) {
            ch.text = c["message"]["content"].get<std::string>();
        }
        if (c.contains("finish_reason") && c["finish_reason"].is_string()) {
            ch.finish_reason = finish_reason_from_name(c["finish_reason"].get<std::string>());
        }
        if (c.contains("logprobs") && c["logprobs"].is_object() &&
            c["logprobs"].contains("content") && c["logprobs"]["content"].is_array()) {
            for (const auto& t : c["logprobs"]["content"]) {
                if (t.contains("logprob") && t["logprob"].is_number()) {
                    ch.token_logprobs.push_back(t["logprob"].get<double>());
                }
            }
        }
        out.choices.push_back(std::move(ch));
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens")) out.usage.prompt_tokens = u["prompt_tokens"].get<std::int64_t>();
        if (u.contains("completion_tokens")) out.usage.completion_tokens = u["completion_tokens"].get<std::int64_t>();
        if (u.contains("total_tokens")) out.usage.total_tokens = u["total_tokens"].get<std::int64_t>();
    }
    return out;
}

} // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) throw Error(ErrorKind::InvalidArgument, "base_url is empty");
    if (model.empty()) throw Error(ErrorKind::InvalidArgument, "model is empty");
    if (timeout_ms <= 0) throw Error(ErrorKind::InvalidArgument, "timeout_ms must be > 0");
    if (max_retries < 0) throw Error(ErrorKind::InvalidArgument, "max_retries must be >= 0");
    if (max_inflight < 1) throw Error(ErrorKind::InvalidArgument, "max_inflight must be >= 1");
    if (retry_backoff_ms < 0) {
        throw Error(ErrorKind::InvalidArgument, "retry_backoff_ms must be >= 0");
    }
}

void CompletionRequest::validate() const {
    if (messages.empty()) throw Error(ErrorKind::InvalidArgument, "messages is empty");
    for (const auto& m : messages) {
        if (m.role.empty()) throw Error(ErrorKind::InvalidArgument, "message role is empty");
    }
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorKind::InvalidArgument, "temperature must be finite and >= 0");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "top_p must be in (0, 1]");
    }
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
}

Usage& Usage::operator+=(const Usage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    total_tokens += o.total_tokens;
    return *this;
}

json build_request_json(const EndpointConfig& cfg, const CompletionRequest& req) {
    json j;
    j["model"] = cfg.model;
    j["messages"] = json::array();
    for (const auto& m : req.messages) {
        j["messages"].push_back(json{{"role", m.role}, {"content", m.content}});
    }
    j["temperature"] = req.temperature;
    j["top_p"] = req.top_p;
    j["n"] = req.n;
    if (req.seed.has_value()) j["seed"] = *req.seed;
    if (req.logprobs) j["logprobs"] = true;
    return j;
}

ChatClient::ChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

Usage ChatClient::total_usage() const {
    std::lock_guard<std::mutex> lk(usage_mu_);
    return usage_;
}

ChatResult ChatClient::attempt_once(const CompletionRequest& req, const std::string& body) const {
    std::string origin, prefix;
    split_base_url(cfg_.base_url, origin, prefix);
    httplib::Client cli(origin);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!req.sample_tag.empty()) headers.emplace("X-Sample-Id", req.sample_tag);
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    auto res = cli.Post(prefix + "/chat/completions", headers, body, "application/json");
    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               err == httplib::Error::Read || err == httplib::Error::Write;
        throw HttpFailure{0, timed_out,
                          std::string("endpoint unreachable: ") + httplib::to_string(err)};
    }

    const int status = res->status;
    if (status == 200) return parse_chat_response(res->body);
    if (status == 401 || status == 403) {
        throw Error(ErrorKind::AuthFailure,
                    "endpoint rejected credentials (" + std::to_string(status) + "): " +
                        error_message_of(res->body));
    }
    if (status == 404 && error_code_of(res->body) == "unknown_sample_id") {
        throw Error(ErrorKind::UnknownSampleId, error_message_of(res->body));
    }
    throw HttpFailure{status, false,
                      "endpoint returned " + std::to_string(status) + ": " +
                          error_message_of(res->body)};
}

ChatResult ChatClient::chat_complete(const CompletionRequest& req) const {
    req.validate();
    const std::string body = build_request_json(cfg_, req).dump();
    const auto started = std::chrono::steady_clock::now();

    ChatResult result;
    bool fell_back = false;
    for (int attempt = 0;; ++attempt) {
        try {
            result = attempt_once(req, body);
            break;
        } catch (const HttpFailure& f) {
            // HTTP 400 with a multi-choice request: endpoint does not
            // support n > 1, redo as n single-choice calls.
            if (f.status == 400 && req.n > 1) {
                fell_back = true;
                break;
            }
            const bool retryable = f.status == 0 || f.status == 429 || f.status >= 500;
            if (!retryable || attempt >= cfg_.max_retries) {
                throw Error(f.timeout ? ErrorKind::Timeout : ErrorKind::EndpointUnavailable,
                            f.message);
            }
            sleep_backoff(cfg_.retry_backoff_ms, attempt);
        }
    }

    if (fell_back) {
        for (int i = 0; i < req.n; ++i) {
            CompletionRequest single = req;
            single.n = 1;
            if (req.seed.has_value()) single.seed = *req.seed + static_cast<std::uint64_t>(i);
            ChatResult r = chat_complete(single);
            if (i == 0) result.model = r.model;
            for (auto& c : r.choices) result.choices.push_back(std::move(c));
            result.usage += r.usage;
        }
        // Usage for the single-choice calls was accumulated recursively.
        result.latency_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - started)
                                .count();
        return result;
    }

    result.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    {
        std::lock_guard<std::mutex> lk(usage_mu_);
        usage_ += result.usage;
    }
    return result;
}

} // namespace guardforge
