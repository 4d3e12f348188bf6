// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fusewire/intake.hpp"

using namespace fusewire;

TEST_CASE("plan_queries tiles the audio in equal thirds") {
    auto queries = plan_queries(30.0, {"stepaudio", "qwenomni"});
    REQUIRE(queries.size() == 8);
    // per source: full + three segments
    CHECK(queries[0].scope.full);
    CHECK(queries[1].scope.start_s == Catch::Approx(0.0));
    CHECK(queries[1].scope.end_s == Catch::Approx(10.0));
    CHECK(queries[2].scope.start_s == Catch::Approx(10.0));
    CHECK(queries[2].scope.end_s == Catch::Approx(20.0));
    CHECK(queries[3].scope.start_s == Catch::Approx(20.0));
    CHECK(queries[3].scope.end_s == Catch::Approx(30.0));
    CHECK(queries[4].source == "qwenomni");

    CHECK(plan_queries(30.0, {"solo"}).size() == 4);
    CHECK_THROWS_AS(plan_queries(0.0, {"solo"}), InvalidInput);
    CHECK_THROWS_AS(plan_queries(-3.0, {"solo"}), InvalidInput);
}

TEST_CASE("segment bounds partition the duration exactly") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> dur(0.5, 3600.0);
    for (int i = 0; i < 300; ++i) {
        double d = dur(rng);
        auto queries = plan_queries(d, {"s"});
        REQUIRE(queries.size() == 4);
        double covered = 0.0;
        for (size_t q = 1; q < queries.size(); ++q) {
            const auto& scope = queries[q].scope;
            CHECK(scope.start_s == Catch::Approx(covered).margin(1e-9));
            covered = scope.end_s;
        }
        CHECK(covered == Catch::Approx(d));
    }
}

TEST_CASE("prompts instruct observation reporting, not answer selection") {
    auto queries = plan_queries(30.0, {"s"}, "What instrument leads?", {"piano", "guitar"});
    for (const auto& q : queries) {
        CHECK(q.prompt.find("report") != std::string::npos);
        CHECK(q.prompt.find("Do not select") != std::string::npos);
    }
}

TEST_CASE("parser reads structured observation blocks") {
    auto parsed = parse_intake_response(
        "OBS: two speakers conversing | time: 3.5-8.0 | tag: speech\n"
        "OBS: faint traffic noise | tag: environment\n"
        "CONTENT: speech\n"
        "TENTATIVE: b\n",
        AudioScope::full_audio());
    REQUIRE(parsed.observations.size() == 2);
    CHECK(parsed.observations[0].claim == "two speakers conversing");
    REQUIRE_FALSE(parsed.observations[0].scope.full);
    CHECK(parsed.observations[0].scope.start_s == Catch::Approx(3.5));
    CHECK(parsed.observations[0].tags == std::set<std::string>{"speech"});
    CHECK(parsed.observations[1].scope.full);
    REQUIRE(parsed.content.has_value());
    CHECK(*parsed.content == ContentType::Speech);
    REQUIRE(parsed.tentative_prediction.has_value());
    CHECK(*parsed.tentative_prediction == "B");
}

TEST_CASE("parser falls back to one observation per line") {
    auto parsed = parse_intake_response("- a dog barks twice\nrain against a window\n",
                                        AudioScope::segment(1, 10, 20));
    REQUIRE(parsed.observations.size() == 2);
    CHECK(parsed.observations[0].claim == "a dog barks twice");
    CHECK(parsed.observations[1].claim == "rain against a window");
    CHECK(parsed.observations[0].scope.index == 1);
}

namespace {

ParsedResponse response_with(const AudioScope& scope, std::vector<std::string> claims,
                             std::optional<ContentType> content = {},
                             std::optional<std::string> tentative = {}) {
    ParsedResponse r;
    r.scope = scope;
    for (const auto& c : claims) {
        Observation o;
        o.scope = scope;
        o.claim = c;
        r.observations.push_back(o);
    }
    r.content = content;
    r.tentative_prediction = tentative;
    return r;
}

}  // namespace

TEST_CASE("synthesize_source marks segment corroboration") {
    std::vector<ParsedResponse> responses = {
        response_with(AudioScope::full_audio(), {"two speakers talking", "soft piano underneath"},
                      ContentType::Speech, "B"),
        response_with(AudioScope::segment(0, 0, 10), {"two speakers are talking"}),
        response_with(AudioScope::segment(1, 10, 20), {"door slam near the end"}),
        response_with(AudioScope::segment(2, 20, 30), {}),
    };
    auto report = synthesize_source(responses, "stepaudio");
    // "two speakers talking" merged across full + seg0 -> corroborated
    REQUIRE(report.observations.size() == 3);
    CHECK(report.segment_corroborated_ids.size() == 1);
    CHECK(report.segment_corroborated_ids.count(report.observations[0].id) == 1);
    // claim only in a segment: not marked
    for (const auto& o : report.observations)
        if (o.claim == "door slam near the end")
            CHECK(report.segment_corroborated_ids.count(o.id) == 0);
    CHECK(report.content_vote == ContentType::Speech);
    REQUIRE(report.tentative_predictions.size() == 4);
    CHECK(report.tentative_predictions[0] == "B");
    CHECK_FALSE(report.partial);
}

TEST_CASE("synthesize_source is idempotent on already-merged input") {
    std::vector<ParsedResponse> responses = {
        response_with(AudioScope::full_audio(), {"two speakers talking"}),
        response_with(AudioScope::segment(0, 0, 10), {"two speakers talking"}),
        response_with(AudioScope::segment(1, 10, 20), {"rain outside"}),
        response_with(AudioScope::segment(2, 20, 30), {}),
    };
    auto first = synthesize_source(responses, "s");
    std::vector<ParsedResponse> again = {response_with(AudioScope::full_audio(), {}),
                                         response_with(AudioScope::segment(0, 0, 10), {}),
                                         response_with(AudioScope::segment(1, 10, 20), {}),
                                         response_with(AudioScope::segment(2, 20, 30), {})};
    for (const auto& o : first.observations) {
        Observation copy = o;
        again[0].observations.push_back(copy);
    }
    auto second = synthesize_source(again, "s");
    CHECK(second.observations.size() == first.observations.size());
}

TEST_CASE("partial intake throws but carries what was gathered") {
    std::vector<ParsedResponse> responses = {
        response_with(AudioScope::full_audio(), {"a claim"}, ContentType::Music),
        response_with(AudioScope::segment(0, 0, 10), {"another claim"}),
    };
    try {
        synthesize_source(responses, "qwenomni");
        FAIL("expected PartialIntakeError");
    } catch (const PartialIntakeError& e) {
        CHECK(e.report.partial);
        CHECK(e.report.observations.size() == 2);
        CHECK(e.report.source == "qwenomni");
        CHECK(e.report.content_vote == ContentType::Music);
    }
}

TEST_CASE("empty responses produce an empty report voting mixed") {
    std::vector<ParsedResponse> responses = {
        response_with(AudioScope::full_audio(), {}), response_with(AudioScope::segment(0, 0, 10), {}),
        response_with(AudioScope::segment(1, 10, 20), {}),
        response_with(AudioScope::segment(2, 20, 30), {})};
    auto report = synthesize_source(responses, "s");
    CHECK(report.observations.empty());
    CHECK(report.content_vote == ContentType::Mixed);
}

TEST_CASE("content classification takes the majority and ties go mixed") {
    SourceReport music_a, music_b, speech;
    music_a.content_vote = ContentType::Music;
    music_b.content_vote = ContentType::Music;
    speech.content_vote = ContentType::Speech;

    CHECK(classify_content({music_a, music_b}) == ContentType::Music);
    CHECK(classify_content({speech, music_a}) == ContentType::Mixed);
    SourceReport env;
    env.content_vote = ContentType::Environmental;
    CHECK(classify_content({env}) == ContentType::Environmental);
    CHECK(classify_content({speech, music_a}, {ContentType::Music}) == ContentType::Music);
    CHECK_THROWS_AS(classify_content({}), InvalidInput);
}

TEST_CASE("source report json keeps predictions") {
    SourceReport r;
    r.source = "stepaudio";
    r.content_vote = ContentType::Speech;
    r.tentative_predictions = {std::optional<std::string>{"B"}, std::nullopt,
                               std::optional<std::string>{"B"}, std::nullopt};
    auto round = json(r).get<SourceReport>();
    CHECK(round.source == "stepaudio");
    REQUIRE(round.tentative_predictions.size() == 4);
    CHECK(round.tentative_predictions[0] == "B");
    CHECK_FALSE(round.tentative_predictions[1].has_value());
}
