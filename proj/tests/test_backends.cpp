// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "fusewire/backends.hpp"
#include "fusewire/backends_http.hpp"

using namespace fusewire;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::path(FUSEWIRE_BINARY_DIR) / "test_tmp" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ChatRequest sample_request() {
    ChatRequest r;
    r.endpoint_id = "reasoner";
    r.messages = {{"system", "You are terse.", {}}, {"user", "Count the speakers.", {}}};
    return r;
}

}  // namespace

TEST_CASE("chat digest ignores sampling and cosmetic whitespace") {
    ChatRequest a = sample_request();
    ChatRequest b = sample_request();
    b.sampling.temperature = 0.1;
    b.sampling.seed = 42;
    CHECK(chat_digest(a) == chat_digest(b));

    ChatRequest c = sample_request();
    c.messages[1].content = "Count   the\n speakers.";
    CHECK(chat_digest(a) == chat_digest(c));

    ChatRequest d = sample_request();
    d.messages[1].content = "Count the drums.";
    CHECK(chat_digest(a) != chat_digest(d));
}

TEST_CASE("fixture chat client is deterministic and misses loudly") {
    auto dir = temp_dir("fixture_chat");
    FixtureChatClient client(dir.string());
    ChatRequest request = sample_request();

    try {
        client.complete(request);
        FAIL("expected a fixture miss");
    } catch (const FixtureMissError& e) {
        CHECK(e.digest == chat_digest(request));
    }

    FixtureChatClient::write_fixture(dir, request, "two speakers");
    CHECK(client.complete(request) == "two speakers");
    CHECK(client.complete(request) == client.complete(request));
}

TEST_CASE("replay chat client consumes the recorded sequence in order") {
    ChatRequest first = sample_request();
    ChatRequest second = sample_request();
    second.messages[1].content = "And the instruments?";

    std::vector<ChatExchange> log = {
        {"reasoner", chat_digest(first), first.messages, "two speakers", 0},
        {"reasoner", chat_digest(second), second.messages, "one guitar", 0},
    };
    ReplayChatClient client(log);
    CHECK(client.complete(first) == "two speakers");
    CHECK(client.complete(second) == "one guitar");
    CHECK_THROWS_AS(client.complete(second), BackendError);  // exhausted
}

TEST_CASE("replay divergence reports both digests") {
    ChatRequest recorded = sample_request();
    std::vector<ChatExchange> log = {
        {"reasoner", chat_digest(recorded), recorded.messages, "two speakers", 0}};
    ReplayChatClient client(log);

    ChatRequest live = sample_request();
    live.messages[1].content = "something else entirely";
    try {
        client.complete(live);
        FAIL("expected divergence");
    } catch (const ReplayDivergenceError& e) {
        CHECK(e.expected == chat_digest(recorded));
        CHECK(e.actual == chat_digest(live));
    }
}

TEST_CASE("fixture tool client round-trips results") {
    auto dir = temp_dir("fixture_tools");
    FixtureToolClient client(dir.string());
    ToolRequest request;
    request.tool = "diarization + transcription";
    request.audio = "fixture://x.wav";
    request.time_range = TimeRange{0.0, 10.0};

    CHECK_THROWS_AS(client.invoke(request), FixtureMissError);
    FixtureToolClient::write_fixture(dir, request, {{"summary", "2 speakers"},
                                                    {"speaker_count", 2}},
                                     0.85, 0.9, 120);
    ToolResult r = client.invoke(request);
    CHECK(r.summary() == "2 speakers");
    CHECK(r.raw_confidence == Catch::Approx(0.85));
    CHECK(r.output.at("speaker_count") == 2);

    ToolResult again = client.invoke(request);
    CHECK(json(r) == json(again));
}

TEST_CASE("replay tool client checks digests") {
    ToolRequest request;
    request.tool = "transcription";
    request.audio = "fixture://x.wav";
    ToolResult recorded;
    recorded.request = request;
    recorded.output = {{"summary", "hello"}};
    ReplayToolClient client({recorded});

    ToolRequest other = request;
    other.tool = "energy dynamics";
    CHECK_THROWS_AS(client.invoke(other), ReplayDivergenceError);
}

TEST_CASE("recording chat wrapper logs exchanges and absorbs failures") {
    auto dir = temp_dir("recording_chat");
    FixtureChatClient fixtures(dir.string());
    std::vector<ChatExchange> log;
    RecordingChat chat{&fixtures, &log, false};

    ChatRequest request = sample_request();
    CHECK_FALSE(chat.try_complete(request).has_value());  // miss -> nullopt, not throw
    CHECK(log.empty());

    FixtureChatClient::write_fixture(dir, request, "ok");
    auto response = chat.try_complete(request);
    REQUIRE(response.has_value());
    CHECK(*response == "ok");
    REQUIRE(log.size() == 1);
    CHECK(log[0].digest == chat_digest(request));
    CHECK(log[0].response == "ok");

    RecordingChat none{};
    CHECK_FALSE(none.try_complete(request).has_value());
}

TEST_CASE("http chat client talks to a server and retries on 5xx") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<bool> force_fail{false};
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        auto body = json::parse(req.body);
        REQUIRE(body.contains("messages"));
        CHECK(body.value("temperature", 0.0) == Catch::Approx(0.6));
        if (force_fail || hits <= 2) {
            res.status = 500;
            return;
        }
        json out = {{"choices", {{{"message", {{"content", "two speakers"}}}}}}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread run([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendProfile profile;
    profile.kind = BackendKind::RemoteHttp;
    profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    profile.model = "test-model";
    profile.retries = 2;
    profile.timeout_s = 5;

    HttpChatClient client(profile);
    CHECK(client.complete(sample_request()) == "two speakers");
    CHECK(hits == 3);  // 2 failures + 1 success

    // exhaust retries: retries=2 means exactly 3 attempts
    force_fail = true;
    hits = 0;
    CHECK_THROWS_AS(client.complete(sample_request()), BackendError);
    CHECK(hits == 3);

    server.stop();
    run.join();
}

TEST_CASE("http tool client round-trips a result and flags unknown tools") {
    httplib::Server server;
    server.Post("/invoke", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        if (body.value("tool", "") != "transcription") {
            res.status = 404;
            return;
        }
        json out = {{"output", {{"summary", "hello world"}}},
                    {"raw_confidence", 0.9},
                    {"relevance", 0.8},
                    {"duration_ms", 40}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread run([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendProfile profile;
    profile.kind = BackendKind::RemoteHttp;
    profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/invoke";
    profile.retries = 0;
    profile.timeout_s = 5;

    HttpToolClient client(profile);
    ToolRequest request;
    request.tool = "transcription";
    request.audio = "http://audio/x.wav";
    ToolResult r = client.invoke(request);
    CHECK(r.summary() == "hello world");
    CHECK(r.raw_confidence == Catch::Approx(0.9));
    CHECK(r.duration_ms == 40);

    request.tool = "unknown gadget";
    CHECK_THROWS_AS(client.invoke(request), BackendError);

    server.stop();
    run.join();
}

TEST_CASE("backend profiles validate their required fields") {
    CHECK_THROWS_AS(json::parse(R"({"kind": "remote_http"})").get<BackendProfile>(), ConfigError);
    CHECK_THROWS_AS(json::parse(R"({"kind": "fixture"})").get<BackendProfile>(), ConfigError);
    auto p = json::parse(R"({"kind": "fixture", "fixture_path": "/tmp/f"})").get<BackendProfile>();
    CHECK(p.retries == 2);
    CHECK(p.timeout_s == Catch::Approx(120.0));
    CHECK(p.max_in_flight == 8);
}
