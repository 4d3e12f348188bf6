// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fusewire/argumentation.hpp"

using namespace fusewire;

namespace {

const ScoringConfig kScoring = ScoringConfig::defaults();

EvidenceItem item_for(const std::string& id, const std::string& source, const std::string& claim,
                      double confidence, double relevance) {
    EvidenceItem item;
    item.id = id;
    item.origin = EvidenceOrigin::lalm(source);
    item.claim = claim;
    item.tier = ReliabilityTier::Lalm;
    item.confidence = confidence;
    item.relevance = relevance;
    return item;
}

EvidenceBundle sample_bundle() {
    EvidenceBundle bundle;
    bundle.sample_id = "s1";
    bundle.question = "What dominates the recording?";
    bundle.choices = {"calm piano music", "street traffic", "a heated argument"};
    bundle.content = ContentType::Mixed;
    bundle.items = {item_for("e0", "stepaudio", "calm piano playing a melody", 0.7, 0.9),
                    item_for("e1", "qwenomni", "piano music in a calm register", 0.65, 0.9),
                    item_for("e2", "qwenomni", "faint traffic far away", 0.5, 0.4)};

    SourceReport a;
    a.source = "stepaudio";
    a.tentative_predictions = {std::string("A"), std::string("A"), std::nullopt, std::string("A")};
    Observation obs;
    obs.id = "stepaudio/o0";
    obs.source = "stepaudio";
    obs.claim = "calm piano playing a melody";
    obs.tentative_prediction = "A";
    a.observations.push_back(obs);
    SourceReport b;
    b.source = "qwenomni";
    b.tentative_predictions = {std::string("B"), std::nullopt, std::nullopt, std::nullopt};
    bundle.source_reports = {a, b};
    return bundle;
}

class CannedChat : public ChatClient {
public:
    explicit CannedChat(std::vector<std::string> responses) : responses_(std::move(responses)) {}
    std::string complete(const ChatRequest& request) override {
        requests.push_back(request);
        if (cursor_ >= responses_.size()) return responses_.back();
        return responses_[cursor_++];
    }
    std::vector<ChatRequest> requests;

private:
    std::vector<std::string> responses_;
    size_t cursor_ = 0;
};

std::string full_document(const std::string& selected) {
    std::string doc;
    for (const auto& title : reasoning_section_titles()) {
        doc += "## " + title + "\n";
        doc += "Calm piano playing a melody; piano music in a calm register; faint traffic far "
               "away. Selected " +
               selected + ".\n";
    }
    return doc;
}

}  // namespace

TEST_CASE("redact strips every tentative prediction and is idempotent") {
    auto bundle = sample_bundle();
    auto redacted = redact(bundle);
    CHECK(redacted.redacted);
    for (const auto& report : redacted.source_reports) {
        CHECK(report.tentative_predictions.empty());
        for (const auto& obs : report.observations)
            CHECK_FALSE(obs.tentative_prediction.has_value());
    }
    // structurally identical otherwise
    CHECK(redacted.items.size() == bundle.items.size());
    CHECK(redacted.source_reports.size() == bundle.source_reports.size());
    CHECK(redacted.source_reports[0].source == "stepaudio");

    auto twice = redact(redacted);
    CHECK(json(twice) == json(redacted));

    // serialized form carries no prediction field at all
    std::string s = json(redacted).dump();
    CHECK(s.find("tentative") == std::string::npos);
}

TEST_CASE("select_answer refuses unredacted bundles and tiny choice lists") {
    auto bundle = sample_bundle();
    CHECK_THROWS_AS(select_answer(bundle, RecordingChat{}, kScoring), InvalidInput);
    auto redacted = redact(bundle);
    redacted.choices = {"only one"};
    CHECK_THROWS_AS(select_answer(redacted, RecordingChat{}, kScoring), InvalidInput);
}

TEST_CASE("select_answer accepts a valid backend choice") {
    auto redacted = redact(sample_bundle());
    CannedChat chat({"CHOICE: A\nPiano evidence dominates."});
    RecordingChat backend{&chat, nullptr, false};
    auto decision = select_answer(redacted, backend, kScoring);
    CHECK(decision.chosen == "A");
    CHECK(decision.per_choice.size() == 3);
    CHECK(decision.per_choice.at("A").weight > decision.per_choice.at("B").weight);
    CHECK(decision.confidence > 0.0);
    CHECK(decision.confidence <= 1.0);
}

TEST_CASE("an invalid label gets one retry then the weight argmax") {
    auto redacted = redact(sample_bundle());

    SECTION("retry succeeds") {
        CannedChat chat({"CHOICE: E", "CHOICE: B"});
        RecordingChat backend{&chat, nullptr, false};
        auto decision = select_answer(redacted, backend, kScoring);
        CHECK(decision.chosen == "B");  // backend authority within valid labels
        CHECK(chat.requests.size() == 2);
    }

    SECTION("retry fails, fallback picks the heaviest choice") {
        CannedChat chat({"CHOICE: E", "still not a letter"});
        RecordingChat backend{&chat, nullptr, false};
        auto decision = select_answer(redacted, backend, kScoring);
        CHECK(decision.chosen == "A");  // piano items outweigh traffic
        CHECK(chat.requests.size() == 2);
    }

    SECTION("no backend at all falls directly to the argmax") {
        auto decision = select_answer(redacted, RecordingChat{}, kScoring);
        CHECK(decision.chosen == "A");
    }
}

TEST_CASE("the selection prompt never contains a tentative prediction") {
    std::mt19937 rng(53);
    std::vector<std::string> labels = {"A", "B", "C", "D"};
    for (int trial = 0; trial < 20; ++trial) {
        auto bundle = sample_bundle();
        for (auto& report : bundle.source_reports) {
            report.tentative_predictions.clear();
            for (int q = 0; q < 4; ++q)
                report.tentative_predictions.push_back(labels[rng() % labels.size()]);
        }
        auto request = build_selection_request(redact(bundle));
        std::string payload = json(request.messages).dump();
        CHECK(payload.find("tentative") == std::string::npos);
        CHECK(payload.find("TENTATIVE") == std::string::npos);
        // the only mention of predictions is the banner saying they are withheld
        auto banner = payload.find("source answer predictions withheld");
        REQUIRE(banner != std::string::npos);
        payload.erase(banner, std::string("source answer predictions withheld").size());
        CHECK(payload.find("prediction") == std::string::npos);
    }
}

TEST_CASE("generate_reasoning parses a well-formed seven-section document") {
    auto redacted = redact(sample_bundle());
    AnswerDecision decision;
    decision.chosen = "A";
    CannedChat chat({full_document("A")});
    RecordingChat backend{&chat, nullptr, false};
    auto doc = generate_reasoning(redacted, decision, backend);
    REQUIRE(doc.sections.size() == 7);
    const auto& titles = reasoning_section_titles();
    for (size_t i = 0; i < 7; ++i) {
        CHECK(doc.sections[i].title == titles[i]);
        CHECK_FALSE(doc.sections[i].body.empty());
    }
    CHECK(doc.stubbed.empty());
}

TEST_CASE("a missing section triggers regeneration, then a flagged stub") {
    auto redacted = redact(sample_bundle());
    AnswerDecision decision;
    decision.chosen = "A";

    std::string incomplete;
    for (const auto& title : reasoning_section_titles()) {
        if (title == "Per-Choice Evaluation") continue;
        incomplete += "## " + title + "\nBody text here.\n";
    }

    SECTION("second attempt completes the document") {
        CannedChat chat({incomplete, full_document("A")});
        RecordingChat backend{&chat, nullptr, false};
        auto doc = generate_reasoning(redacted, decision, backend);
        CHECK(doc.sections.size() == 7);
        CHECK(doc.stubbed.empty());
        CHECK(chat.requests.size() == 2);
        // the retry names the missing section
        CHECK(chat.requests[1].messages.back().content.find("Per-Choice Evaluation") !=
              std::string::npos);
    }

    SECTION("persistent omission yields a stubbed, flagged section") {
        CannedChat chat({incomplete, incomplete, incomplete});
        RecordingChat backend{&chat, nullptr, false};
        auto doc = generate_reasoning(redacted, decision, backend);
        REQUIRE(doc.sections.size() == 7);
        REQUIRE(doc.stubbed.size() == 1);
        CHECK(doc.stubbed[0] == "Per-Choice Evaluation");
    }
}

TEST_CASE("reasoning for an empty bundle still yields seven sections") {
    EvidenceBundle empty;
    empty.question = "anything?";
    empty.choices = {"yes", "no"};
    auto redacted = redact(empty);
    AnswerDecision decision;
    decision.chosen = "B";
    auto doc = generate_reasoning(redacted, decision, RecordingChat{});
    REQUIRE(doc.sections.size() == 7);
    CHECK(doc.stubbed.size() == 7);  // no backend: everything template-filled and flagged
}

TEST_CASE("selection before elaboration: prompts are one-directional") {
    auto redacted = redact(sample_bundle());
    AnswerDecision decision;
    decision.chosen = "A";
    auto selection_request = build_selection_request(redacted);
    auto reasoning_request = build_reasoning_request(redacted, decision);
    // the reasoning prompt carries the decision; the selection prompt carries
    // no reasoning-document content
    CHECK(reasoning_request.messages.back().content.find("Selected answer: A") !=
          std::string::npos);
    for (const auto& title : reasoning_section_titles())
        CHECK(selection_request.messages.back().content.find(title) == std::string::npos);
}

TEST_CASE("completeness check lists what the document failed to address") {
    auto bundle = redact(sample_bundle());
    ToolResult tr;
    tr.request.tool = "energy dynamics";
    tr.output = {{"summary", "rms stable"}};
    bundle.tool_results.push_back(tr);
    bundle.contradictions.push_back({"c0", ContradictionKind::LalmVsTool, {"e0", "t0"},
                                     "piano claim vs missing harmonic support", false, {}, ""});

    AnswerDecision decision;
    decision.chosen = "A";

    SECTION("a document citing everything passes") {
        ReasoningDocument doc;
        for (const auto& title : reasoning_section_titles())
            doc.sections.push_back(
                {title,
                 "calm piano playing melody; piano music calm register; faint traffic far away; "
                 "energy dynamics steady; piano claim vs missing harmonic support."});
        auto report = completeness_check(doc, bundle);
        CHECK(report.pass);
        CHECK(report.unreferenced_observations.empty());
        CHECK(report.unreferenced_tools.empty());
        CHECK(report.unaddressed_conflicts.empty());
    }

    SECTION("an ignored tool and conflict are reported") {
        ReasoningDocument doc;
        for (const auto& title : reasoning_section_titles())
            doc.sections.push_back(
                {title, "calm piano playing melody; piano music calm register; faint traffic far away."});
        auto report = completeness_check(doc, bundle);
        CHECK_FALSE(report.pass);
        REQUIRE(report.unreferenced_tools.size() == 1);
        CHECK(report.unreferenced_tools[0] == "energy dynamics");
        REQUIRE(report.unaddressed_conflicts.size() == 1);
        CHECK(report.unaddressed_conflicts[0] == "c0");
        CHECK(report.unreferenced_observations.empty());
    }

    SECTION("an unreferenced observation is reported") {
        ReasoningDocument doc;
        for (const auto& title : reasoning_section_titles())
            doc.sections.push_back(
                {title, "calm piano playing melody; piano music calm register; energy dynamics; "
                        "piano claim vs missing harmonic support."});
        auto report = completeness_check(doc, bundle);
        CHECK_FALSE(report.pass);
        REQUIRE(report.unreferenced_observations.size() == 1);
        CHECK(report.unreferenced_observations[0] == "e2");  // the traffic claim
    }
}
