#include <map>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "guardforge/client.hpp"

namespace guardforge {

namespace {

// Deterministic toy tokenizer so usage numbers are reproducible: one token
// per four characters, minimum one.
std::int64_t count_tokens(const std::string& text) {
    return static_cast<std::int64_t>(text.size() / 4 + 1);
}

json error_body(const std::string& code, const std::string& message) {
    return json{{"error", json{{"code", code}, {"message", message}}}};
}

} // namespace

struct MockBackend::Impl {
    httplib::Server svr;
    std::thread th;
    int port = 0;

    std::mutex mu;
    std::map<std::string, std::vector<ScriptedChoice>> scripts;
    std::map<std::string, std::size_t> cursors;
    bool reject_multi = false;
    int fail_count = 0;
    int fail_status = 429;
    std::string auth_token;
    int requests = 0;

    void handle(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard<std::mutex> lk(mu);
        ++requests;

        if (fail_count > 0) {
            --fail_count;
            res.status = fail_status;
            res.set_content(error_body("scripted_failure", "scripted failure").dump(),
                            "application/json");
            return;
        }
        if (!auth_token.empty() &&
            req.get_header_value("Authorization") != "Bearer " + auth_token) {
            res.status = 401;
            res.set_content(error_body("invalid_api_key", "missing or invalid api key").dump(),
                            "application/json");
            return;
        }

        auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            res.status = 400;
            res.set_content(error_body("invalid_request", "request body is not json").dump(),
                            "application/json");
            return;
        }
        const int n = body.value("n", 1);
        const bool want_logprobs = body.value("logprobs", false);
        if (n > 1 && reject_multi) {
            res.status = 400;
            res.set_content(
                error_body("unsupported_parameter", "multiple choices not supported").dump(),
                "application/json");
            return;
        }

        const std::string sample_id = req.get_header_value("X-Sample-Id");
        auto it = scripts.find(sample_id);
        if (it == scripts.end()) {
            res.status = 404;
            res.set_content(
                error_body("unknown_sample_id", "no script for sample id: " + sample_id).dump(),
                "application/json");
            return;
        }
        const auto& script = it->second;

        std::int64_t prompt_tokens = 0;
        if (body.contains("messages") && body["messages"].is_array()) {
            for (const auto& m : body["messages"]) {
                if (m.contains("content") && m["content"].is_string()) {
                    prompt_tokens += count_tokens(m["content"].get<std::string>());
                }
            }
        }

        json choices = json::array();
        std::int64_t completion_tokens = 0;
        std::size_t& cursor = cursors[sample_id];
        for (int i = 0; i < n; ++i) {
            const auto& sc = script[cursor % script.size()];
            ++cursor;
            completion_tokens += count_tokens(sc.text);
            json choice;
            choice["index"] = i;
            choice["message"] = json{{"role", "assistant"}, {"content", sc.text}};
            choice["finish_reason"] = finish_reason_name(sc.finish_reason);
            if (want_logprobs) {
                json entries = json::array();
                std::istringstream words(sc.text);
                std::string w;
                for (int t = 0; words >> w; ++t) {
                    entries.push_back(
                        json{{"token", w}, {"logprob", -0.05 * static_cast<double>(t + 1)}});
                }
                choice["logprobs"] = json{{"content", entries}};
            }
            choices.push_back(std::move(choice));
        }

        json out;
        out["id"] = "mock-" + sample_id + "-" + std::to_string(requests);
        out["model"] = body.value("model", "mock");
        out["choices"] = std::move(choices);
        out["usage"] = json{{"prompt_tokens", prompt_tokens},
                            {"completion_tokens", completion_tokens},
                            {"total_tokens", prompt_tokens + completion_tokens}};
        res.status = 200;
        res.set_content(out.dump(), "application/json");
    }
};

MockBackend::MockBackend() : impl_(std::make_unique<Impl>()) {
    impl_->svr.Post("/v1/chat/completions",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        impl_->handle(req, res);
                    });
    impl_->port = impl_->svr.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0) {
        throw Error(ErrorKind::Io, "mock backend failed to bind a port");
    }
    impl_->th = std::thread([this] { impl_->svr.listen_after_bind(); });
    impl_->svr.wait_until_ready();
}

MockBackend::~MockBackend() {
    impl_->svr.stop();
    if (impl_->th.joinable()) impl_->th.join();
}

void MockBackend::add_script(const std::string& sample_id, std::vector<ScriptedChoice> outputs) {
    if (outputs.empty()) {
        throw Error(ErrorKind::InvalidArgument, "script for " + sample_id + " is empty");
    }
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->scripts[sample_id] = std::move(outputs);
    impl_->cursors[sample_id] = 0;
}

void MockBackend::set_reject_multi_choice(bool reject) {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->reject_multi = reject;
}

void MockBackend::set_fail_first(int count, int status) {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->fail_count = count;
    impl_->fail_status = status;
}

void MockBackend::set_require_auth(std::string token) {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->auth_token = std::move(token);
}

std::string MockBackend::base_url() const {
    // The /v1 prefix exercises the client's base-url path splitting.
    return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1";
}

int MockBackend::request_count() const {
    std::lock_guard<std::mutex> lk(impl_->mu);
    return impl_->requests;
}

} // namespace guardforge
