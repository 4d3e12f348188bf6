// SPDX-License-Identifier: Apache-2.0
#pragma once

// RemoteHttp transports and the profile -> client factories. Kept separate
// from backends.hpp so fixture-only code does not pull in the HTTP stack.

#include <chrono>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fusewire/backends.hpp"
#include "fusewire/errors.hpp"

namespace fusewire {

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace detail

/// POSTs the de-facto chat-completion JSON body and extracts the first choice.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(BackendProfile profile) : profile_(std::move(profile)) {}

    std::string complete(const ChatRequest& request) override {
        auto url = detail::split_url(profile_.endpoint_url);
        json body = {{"model", profile_.model},
                     {"messages", request.messages},
                     {"temperature", request.sampling.temperature}};
        if (request.sampling.seed) body["seed"] = *request.sampling.seed;

        std::string last_error;
        for (int attempt = 0; attempt <= profile_.retries; ++attempt) {
            httplib::Client client(url.base);
            client.set_connection_timeout(static_cast<time_t>(profile_.timeout_s), 0);
            client.set_read_timeout(static_cast<time_t>(profile_.timeout_s), 0);
            auto res = client.Post(url.path, body.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                if (detail::retryable_status(res->status)) continue;
                break;
            }
            return extract_text(res->body);
        }
        throw BackendError("chat_complete failed after " + std::to_string(profile_.retries + 1) +
                           " attempts: " + last_error);
    }

private:
    static std::string extract_text(const std::string& body) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded()) throw BackendError("chat response is not JSON");
        if (j.contains("choices") && !j["choices"].empty()) {
            const auto& first = j["choices"][0];
            if (first.contains("message")) return first["message"].value("content", "");
            if (first.contains("text")) return first.value("text", "");
        }
        if (j.contains("response")) return j.value("response", "");
        throw BackendError("chat response carries no choice text");
    }

    BackendProfile profile_;
};

class HttpToolClient : public ToolClient {
public:
    explicit HttpToolClient(BackendProfile profile) : profile_(std::move(profile)) {}

    ToolResult invoke(const ToolRequest& request) override {
        auto url = detail::split_url(profile_.endpoint_url);
        json body = {{"tool", request.tool}, {"audio", request.audio}, {"params", request.params}};
        if (request.time_range) body["time_range"] = *request.time_range;

        std::string last_error;
        for (int attempt = 0; attempt <= profile_.retries; ++attempt) {
            httplib::Client client(url.base);
            client.set_connection_timeout(static_cast<time_t>(profile_.timeout_s), 0);
            client.set_read_timeout(static_cast<time_t>(profile_.timeout_s), 0);
            auto started = std::chrono::steady_clock::now();
            auto res = client.Post(url.path, body.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 404) throw BackendError("unknown tool at endpoint: " + request.tool);
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                if (detail::retryable_status(res->status)) continue;
                break;
            }
            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded()) throw BackendError("tool response is not JSON");
            ToolResult r;
            r.request = request;
            r.output = j.value("output", json::object());
            r.raw_confidence = j.value("raw_confidence", 0.0);
            r.relevance = j.value("relevance", 0.5);
            r.duration_ms = j.value(
                "duration_ms", static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                     std::chrono::steady_clock::now() - started)
                                                     .count()));
            return r;
        }
        throw BackendError("tool_invoke failed after " + std::to_string(profile_.retries + 1) +
                           " attempts: " + last_error);
    }

private:
    BackendProfile profile_;
};

// ---- factories ----------------------------------------------------------------

inline std::unique_ptr<ChatClient> make_chat_client(const BackendProfile& profile) {
    switch (profile.kind) {
        case BackendKind::RemoteHttp: return std::make_unique<HttpChatClient>(profile);
        case BackendKind::Fixture: return std::make_unique<FixtureChatClient>(profile.fixture_path);
        case BackendKind::Replay: break;
    }
    // Replay clients are built from a record log; see replay_chat_client_from_records.
    throw ConfigError("replay chat client requires a record log, not a bare profile");
}

inline std::unique_ptr<ToolClient> make_tool_client(const BackendProfile& profile) {
    switch (profile.kind) {
        case BackendKind::RemoteHttp: return std::make_unique<HttpToolClient>(profile);
        case BackendKind::Fixture: return std::make_unique<FixtureToolClient>(profile.fixture_path);
        case BackendKind::Replay: break;
    }
    throw ConfigError("replay tool client requires a record log, not a bare profile");
}

}  // namespace fusewire
