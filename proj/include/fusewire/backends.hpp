// SPDX-License-Identifier: Apache-2.0
#pragma once

// The wire boundary. Chat-completion and tool-invocation clients with three
// interchangeable transports: RemoteHttp (JSON over HTTP), Fixture
// (digest-keyed files, no network) and Replay (recorded responses in order).
// Fixture and Replay make the whole pipeline testable offline.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/errors.hpp"
#include "fusewire/textutil.hpp"
#include "fusewire/tools.hpp"

namespace fusewire {

enum class BackendKind { RemoteHttp, Fixture, Replay };

inline const char* to_string(BackendKind k) {
    switch (k) {
        case BackendKind::RemoteHttp: return "remote_http";
        case BackendKind::Fixture: return "fixture";
        case BackendKind::Replay: return "replay";
    }
    return "fixture";
}

inline BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "remote_http") return BackendKind::RemoteHttp;
    if (s == "fixture") return BackendKind::Fixture;
    if (s == "replay") return BackendKind::Replay;
    throw ConfigError("unknown backend kind: " + s);
}

struct BackendProfile {
    BackendKind kind = BackendKind::Fixture;
    std::string endpoint_url;  // RemoteHttp
    std::string model;
    std::string fixture_path;  // Fixture / Replay
    double timeout_s = 120.0;
    int retries = 2;
    int max_in_flight = 8;  // caller-enforced concurrency limit
};

inline void to_json(json& j, const BackendProfile& p) {
    j = json{{"kind", to_string(p.kind)},       {"endpoint_url", p.endpoint_url},
             {"model", p.model},                {"fixture_path", p.fixture_path},
             {"timeout_s", p.timeout_s},        {"retries", p.retries},
             {"max_in_flight", p.max_in_flight}};
}

inline void from_json(const json& j, BackendProfile& p) {
    p.kind = backend_kind_from_string(j.value("kind", "fixture"));
    p.endpoint_url = j.value("endpoint_url", "");
    p.model = j.value("model", "");
    p.fixture_path = j.value("fixture_path", "");
    p.timeout_s = j.value("timeout_s", 120.0);
    p.retries = j.value("retries", 2);
    p.max_in_flight = j.value("max_in_flight", 8);
    if (p.kind == BackendKind::RemoteHttp && p.endpoint_url.empty())
        throw ConfigError("remote_http profile requires endpoint_url");
    if (p.kind != BackendKind::RemoteHttp && p.fixture_path.empty())
        throw ConfigError("fixture/replay profile requires fixture_path");
}

struct SamplingParams {
    double temperature = 0.6;
    std::optional<uint64_t> seed;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    std::optional<std::string> audio_ref;
};

inline void to_json(json& j, const ChatMessage& m) {
    j = json{{"role", m.role}, {"content", m.content}};
    if (m.audio_ref) j["audio"] = *m.audio_ref;
}

inline void from_json(const json& j, ChatMessage& m) {
    m.role = j.at("role").get<std::string>();
    m.content = j.at("content").get<std::string>();
    if (j.contains("audio")) m.audio_ref = j.at("audio").get<std::string>();
}

struct ChatRequest {
    std::string endpoint_id;  // role name, e.g. "source_a" or "reasoner"
    std::vector<ChatMessage> messages;
    SamplingParams sampling;
};

/// One completed exchange, response recorded verbatim.
struct ChatExchange {
    std::string endpoint_id;
    std::string digest;
    std::vector<ChatMessage> messages;
    std::string response;
    long latency_ms = 0;
};

inline void to_json(json& j, const ChatExchange& e) {
    j = json{{"endpoint_id", e.endpoint_id},
             {"digest", e.digest},
             {"messages", e.messages},
             {"response", e.response},
             {"latency_ms", e.latency_ms}};
}

inline void from_json(const json& j, ChatExchange& e) {
    e.endpoint_id = j.at("endpoint_id").get<std::string>();
    e.digest = j.value("digest", "");
    e.messages = j.value("messages", std::vector<ChatMessage>{});
    e.response = j.at("response").get<std::string>();
    e.latency_ms = j.value("latency_ms", 0L);
}

// ---- digests ----------------------------------------------------------------

inline std::string digest64(std::string_view data) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Canonical form: stable key order, whitespace-normalized content, sampling
/// params excluded. Cosmetic prompt changes still change the digest; only the
/// identical request hits the same fixture.
inline std::string canonical_chat_payload(const ChatRequest& request) {
    json msgs = json::array();
    for (const auto& m : request.messages) {
        json jm = {{"content", text::normalize_whitespace(m.content)}, {"role", m.role}};
        if (m.audio_ref) jm["audio"] = *m.audio_ref;
        msgs.push_back(jm);
    }
    json payload = {{"endpoint", request.endpoint_id}, {"messages", msgs}};
    return payload.dump();
}

inline std::string chat_digest(const ChatRequest& request) {
    return digest64(canonical_chat_payload(request));
}

inline std::string canonical_tool_payload(const ToolRequest& request) {
    json payload = {{"audio", request.audio}, {"params", request.params}, {"tool", request.tool}};
    if (request.time_range)
        payload["time_range"] = {{"end_s", request.time_range->end_s},
                                 {"start_s", request.time_range->start_s}};
    return payload.dump();
}

inline std::string tool_digest(const ToolRequest& request) {
    return digest64(canonical_tool_payload(request));
}

// ---- chat clients -------------------------------------------------------------

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Deterministic lookup keyed by the request digest. A miss is an error that
/// names the digest so the fixture can be authored.
class FixtureChatClient : public ChatClient {
public:
    explicit FixtureChatClient(std::string dir) : dir_(std::move(dir)) {}

    std::string complete(const ChatRequest& request) override {
        auto path = fixture_file(dir_, request);
        std::ifstream in(path);
        if (!in) throw FixtureMissError(path.parent_path().string(), chat_digest(request));
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("response"))
            throw BackendError("malformed chat fixture: " + path.string());
        return j.at("response").get<std::string>();
    }

    static std::filesystem::path fixture_file(const std::filesystem::path& dir,
                                              const ChatRequest& request) {
        return dir / "chat" / (chat_digest(request) + ".json");
    }

    static void write_fixture(const std::filesystem::path& dir, const ChatRequest& request,
                              const std::string& response) {
        auto path = fixture_file(dir, request);
        std::filesystem::create_directories(path.parent_path());
        json j = {{"request_echo", json::parse(canonical_chat_payload(request))},
                  {"response", response}};
        std::ofstream out(path);
        out << j.dump(2) << "\n";
    }

private:
    std::filesystem::path dir_;
};

/// Replays recorded responses per endpoint in log order; a request whose
/// digest differs from the recording is a divergence, reported with both.
class ReplayChatClient : public ChatClient {
public:
    explicit ReplayChatClient(std::vector<ChatExchange> log) {
        for (auto& e : log) queues_[e.endpoint_id].push_back(std::move(e));
    }

    std::string complete(const ChatRequest& request) override {
        auto& q = queues_[request.endpoint_id];
        if (cursor_[request.endpoint_id] >= q.size())
            throw BackendError("replay exhausted for endpoint " + request.endpoint_id);
        const ChatExchange& rec = q[cursor_[request.endpoint_id]++];
        std::string live = chat_digest(request);
        if (!rec.digest.empty() && rec.digest != live)
            throw ReplayDivergenceError(rec.digest, live);
        return rec.response;
    }

private:
    std::map<std::string, std::vector<ChatExchange>> queues_;
    std::map<std::string, size_t> cursor_;
};

// ---- tool clients -------------------------------------------------------------

class ToolClient {
public:
    virtual ~ToolClient() = default;
    virtual ToolResult invoke(const ToolRequest& request) = 0;
};

class FixtureToolClient : public ToolClient {
public:
    explicit FixtureToolClient(std::string dir) : dir_(std::move(dir)) {}

    ToolResult invoke(const ToolRequest& request) override {
        auto path = fixture_file(dir_, request);
        std::ifstream in(path);
        if (!in) throw FixtureMissError(path.parent_path().string(), tool_digest(request));
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw BackendError("malformed tool fixture: " + path.string());
        ToolResult r;
        r.request = request;
        r.output = j.value("output", json::object());
        r.raw_confidence = j.value("raw_confidence", 0.0);
        r.relevance = j.value("relevance", 0.5);
        r.duration_ms = j.value("duration_ms", 0L);
        return r;
    }

    static std::filesystem::path fixture_file(const std::filesystem::path& dir,
                                              const ToolRequest& request) {
        return dir / "tools" / (tool_digest(request) + ".json");
    }

    static void write_fixture(const std::filesystem::path& dir, const ToolRequest& request,
                              const json& output, double raw_confidence, double relevance,
                              long duration_ms = 0) {
        auto path = fixture_file(dir, request);
        std::filesystem::create_directories(path.parent_path());
        json j = {{"request_echo", json::parse(canonical_tool_payload(request))},
                  {"output", output},
                  {"raw_confidence", raw_confidence},
                  {"relevance", relevance},
                  {"duration_ms", duration_ms}};
        std::ofstream out(path);
        out << j.dump(2) << "\n";
    }

private:
    std::filesystem::path dir_;
};

/// Thin wrapper every pipeline stage talks through: records each exchange into
/// the sample's chat log and converts backend failures into nullopt so the
/// caller's deterministic fallback can take over.
struct RecordingChat {
    ChatClient* client = nullptr;
    std::vector<ChatExchange>* log = nullptr;
    bool measure_latency = false;

    std::optional<std::string> try_complete(const ChatRequest& request) const {
        if (!client) return std::nullopt;
        auto started = std::chrono::steady_clock::now();
        std::string response;
        try {
            response = client->complete(request);
        } catch (const BackendError&) {
            return std::nullopt;
        }
        long latency = 0;
        if (measure_latency)
            latency = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                            std::chrono::steady_clock::now() - started)
                                            .count());
        if (log)
            log->push_back(
                {request.endpoint_id, chat_digest(request), request.messages, response, latency});
        return response;
    }
};

/// Serves recorded tool results in invocation order, digest-checked.
class ReplayToolClient : public ToolClient {
public:
    explicit ReplayToolClient(std::vector<ToolResult> log) : log_(std::move(log)) {}

    ToolResult invoke(const ToolRequest& request) override {
        if (cursor_ >= log_.size()) throw BackendError("tool replay exhausted");
        const ToolResult& rec = log_[cursor_++];
        std::string recorded = tool_digest(rec.request);
        std::string live = tool_digest(request);
        if (recorded != live) throw ReplayDivergenceError(recorded, live);
        return rec;
    }

private:
    std::vector<ToolResult> log_;
    size_t cursor_ = 0;
};

}  // namespace fusewire
