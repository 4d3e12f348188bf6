// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end orchestration of one sample: intake -> unified analysis ->
// verification loop -> argumentation, producing the final answer and the full
// pipeline record. Stage failures degrade per-module; a sample always
// completes with a record.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/argumentation.hpp"
#include "fusewire/backends.hpp"
#include "fusewire/contradiction.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/intake.hpp"
#include "fusewire/loop.hpp"
#include "fusewire/record.hpp"
#include "fusewire/tools.hpp"
#include "fusewire/unified.hpp"

namespace fusewire {

struct SampleSpec {
    std::string id;
    std::string audio;
    double duration_s = 30.0;
    std::string question;
    std::vector<std::string> choices;
    std::optional<std::string> answer;  // gold label when known
};

inline void to_json(json& j, const SampleSpec& s) {
    j = json{{"id", s.id},
             {"audio", s.audio},
             {"duration_s", s.duration_s},
             {"question", s.question},
             {"choices", s.choices}};
    if (s.answer) j["answer"] = *s.answer;
}

inline void from_json(const json& j, SampleSpec& s) {
    s.id = j.at("id").get<std::string>();
    s.audio = j.value("audio", "");
    s.duration_s = j.value("duration_s", 30.0);
    s.question = j.at("question").get<std::string>();
    s.choices = j.at("choices").get<std::vector<std::string>>();
    if (j.contains("answer") && !j.at("answer").is_null())
        s.answer = j.at("answer").get<std::string>();
}

/// Run configuration: one backend profile per role, scoring and loop knobs,
/// and output settings. Absent keys take defaults; FW_-prefixed environment
/// variables override scalars.
struct RunConfig {
    std::vector<std::string> sources = {"stepaudio", "qwenomni"};
    std::map<std::string, BackendProfile> profiles;  // source_a, source_b, reasoner, tools
    ScoringConfig scoring = ScoringConfig::defaults();
    UnifiedConfig unified;
    IntakeConfig intake;
    LoopConfig loop;
    ContradictionConfig contradiction;
    ToolCatalog catalog = build_default_catalog();
    std::optional<ContentType> content_override;
    std::string out_dir = "out";
    uint64_t seed = 0;
    int workers = 1;
    bool measure_timings = false;  // off for fixture/replay runs so outputs are byte-stable

    static const std::vector<std::string>& roles() {
        static const std::vector<std::string> r = {"source_a", "source_b", "reasoner", "tools"};
        return r;
    }

    void validate() const {
        scoring.validate();
        for (const auto& role : roles())
            if (!profiles.count(role)) throw ConfigError("no backend profile for role " + role);
        if (sources.size() != 2) throw ConfigError("exactly two sources expected");
        auto report = validate_catalog(catalog);
        if (!report.valid()) throw ConfigError("invalid tool catalog: " + report.violations.front());
    }
};

inline void from_json(const json& j, RunConfig& c) {
    c = RunConfig{};
    if (j.contains("sources")) c.sources = j.at("sources").get<std::vector<std::string>>();
    if (j.contains("backends"))
        for (const auto& [role, profile] : j.at("backends").items())
            c.profiles[role] = profile.get<BackendProfile>();
    if (j.contains("scoring")) c.scoring = j.at("scoring").get<ScoringConfig>();
    if (j.contains("catalog_file")) {
        std::ifstream in(j.at("catalog_file").get<std::string>());
        if (!in) throw ConfigError("cannot open catalog file");
        json cat = json::parse(in, nullptr, false);
        if (cat.is_discarded()) throw ConfigError("catalog file is not valid JSON");
        c.catalog = cat.get<ToolCatalog>();
    }
    if (j.contains("limits")) {
        const auto& limits = j.at("limits");
        c.loop.step1_rounds = limits.value("step1_rounds", c.loop.step1_rounds);
        c.loop.step2_rounds = limits.value("step2_rounds", c.loop.step2_rounds);
        c.loop.max_per_round = limits.value("max_per_round", c.loop.max_per_round);
        c.loop.sufficiency_threshold =
            limits.value("sufficiency_threshold", c.loop.sufficiency_threshold);
    }
    if (j.contains("content_override"))
        c.content_override = content_from_string(j.at("content_override").get<std::string>());
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.measure_timings = j.value("measure_timings", c.measure_timings);
}

inline void apply_env_overrides(RunConfig& config) {
    if (const char* v = std::getenv("FW_OUT_DIR")) config.out_dir = v;
    if (const char* v = std::getenv("FW_SEED")) config.seed = std::strtoull(v, nullptr, 10);
    if (const char* v = std::getenv("FW_WORKERS"))
        config.workers = static_cast<int>(std::strtol(v, nullptr, 10));
    if (const char* v = std::getenv("FW_CONTENT_OVERRIDE"))
        config.content_override = content_from_string(v);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    RunConfig config = j.get<RunConfig>();
    apply_env_overrides(config);
    return config;
}

/// Non-owning per-role clients; null roles degrade to each stage's fallback.
struct PipelineBackends {
    ChatClient* source_a = nullptr;
    ChatClient* source_b = nullptr;
    ChatClient* reasoner = nullptr;
    ToolClient* tools = nullptr;
};

namespace detail {

inline long elapsed_ms(std::chrono::steady_clock::time_point since) {
    return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - since)
                                 .count());
}

inline SourceReport gather_source(const SampleSpec& sample, const std::string& source,
                                  const std::string& role, ChatClient* client,
                                  const RunConfig& config, std::vector<ChatExchange>* chat_log) {
    auto queries = plan_queries(sample.duration_s, {source}, sample.question, sample.choices,
                                config.intake);
    RecordingChat chat{client, chat_log, config.measure_timings};
    std::vector<ParsedResponse> responses;
    for (const auto& q : queries) {
        ChatRequest request;
        request.endpoint_id = role;
        request.sampling.seed = config.seed;
        ChatMessage user{"user", q.prompt, sample.audio};
        request.messages = {{"system", "You report audio observations.", {}}, user};
        if (auto response = chat.try_complete(request))
            responses.push_back(parse_intake_response(*response, q.scope));
    }
    try {
        return synthesize_source(responses, source, config.intake);
    } catch (const PartialIntakeError& e) {
        return e.report;  // degraded but usable
    }
}

}  // namespace detail

/// Runs the whole pipeline for one sample. Never throws for backend/tool
/// trouble; those degrade per-stage. Throws ConfigError for unusable
/// configuration and InvariantBreach for internal contract violations.
inline PipelineRecord run_sample(const SampleSpec& sample, const RunConfig& config,
                                 const PipelineBackends& backends) {
    auto started = std::chrono::steady_clock::now();
    PipelineRecord record;
    record.sample_id = sample.id;
    record.audio = sample.audio;
    record.duration_s = sample.duration_s;
    record.question = sample.question;
    record.choices = sample.choices;
    record.correct_choice = sample.answer;

    RecordingChat reasoner{backends.reasoner, &record.chat_log, config.measure_timings};

    // intake: 2 sources x 4 queries
    record.source_reports.push_back(detail::gather_source(
        sample, config.sources[0], "source_a", backends.source_a, config, &record.chat_log));
    record.source_reports.push_back(detail::gather_source(
        sample, config.sources[1], "source_b", backends.source_b, config, &record.chat_log));
    record.timings.stage_ms["intake"] =
        config.measure_timings ? detail::elapsed_ms(started) : 0;

    // content classification
    record.content = config.content_override
                         ? *config.content_override
                         : classify_content(record.source_reports);

    // unified cross-source analysis
    record.unified = corroborate_sources(record.source_reports[0], record.source_reports[1],
                                         reasoner, sample.question, sample.choices, config.scoring,
                                         config.unified);
    record.unified.agreement = agreement_level(record.source_reports[0], record.source_reports[1]);

    // verification loop
    LoopState state;
    state.sample_id = sample.id;
    state.audio = sample.audio;
    state.duration_s = sample.duration_s;
    state.question = sample.question;
    state.choices = sample.choices;
    state.content = record.content;
    state.evidence = record.unified.items;
    state.disagreements = record.unified.disagreements;

    if (needs_verification(record.unified, config.scoring, config.loop)) {
        run_step1(state, reasoner, backends.tools, config.catalog, config.scoring, config.loop,
                  config.contradiction);
        record.hypotheses = generate_hypotheses(state.contradictions, state.disagreements,
                                                state.evidence, config.catalog, state.content,
                                                sample.audio, sample.duration_s,
                                                config.loop.hypothesis_pad_s);
        run_step2(state, record.hypotheses, backends.tools, config.catalog, config.scoring,
                  config.loop);
    } else {
        // no verification needed; risk-assess the source evidence and move on
        state.risk_assessments =
            stage2_risk_assessment(state.evidence, state.tool_results, config.contradiction);
        apply_risk(state.evidence, state.risk_assessments);
        state.step = LoopStep::Done;
    }
    state.evidence = apply_non_dismissal(state.evidence, state.contradictions, state.disagreements);

    record.rounds = state.rounds;
    record.contradictions = state.contradictions;
    record.risk_assessments = state.risk_assessments;
    record.final_evidence = state.evidence;
    record.tool_results = state.tool_results;
    record.unified.disagreements = state.disagreements;  // resolution flags propagate

    // argumentation: selection over redacted evidence, then reasoning
    EvidenceBundle bundle;
    bundle.sample_id = sample.id;
    bundle.question = sample.question;
    bundle.choices = sample.choices;
    bundle.content = record.content;
    bundle.items = state.evidence;
    bundle.tool_results = state.tool_results;
    bundle.contradictions = state.contradictions;
    bundle.disagreements = state.disagreements;
    bundle.source_reports = record.source_reports;
    EvidenceBundle redacted = redact(std::move(bundle));

    record.decision = select_answer(redacted, reasoner, config.scoring);
    record.reasoning = generate_reasoning(redacted, record.decision, reasoner);
    record.completeness = completeness_check(record.reasoning, redacted);
    for (int attempt = 0; attempt < 2 && !record.completeness.pass && backends.reasoner;
         ++attempt) {
        std::string note = "A completeness check found unaddressed material. Reference these "
                           "explicitly:";
        for (const auto& id : record.completeness.unreferenced_observations) {
            const EvidenceItem* item = nullptr;
            for (const auto& it : redacted.items)
                if (it.id == id) item = &it;
            note += item ? "\n- observation: " + item->claim : "\n- observation " + id;
        }
        for (const auto& t : record.completeness.unreferenced_tools) note += "\n- tool: " + t;
        for (const auto& cid : record.completeness.unaddressed_conflicts)
            note += "\n- conflict " + cid;
        record.reasoning = generate_reasoning(redacted, record.decision, reasoner, 2, note);
        record.completeness = completeness_check(record.reasoning, redacted);
    }

    record.timings.total_ms = config.measure_timings ? detail::elapsed_ms(started) : 0;
    return record;
}

/// The compact answer record emitted next to the full pipeline record.
inline json final_output_json(const PipelineRecord& record) {
    return json{{"sample_id", record.sample_id},
                {"chosen", record.decision.chosen},
                {"confidence", text::round4(record.decision.confidence)},
                {"reasoning", record.reasoning},
                {"completeness", record.completeness}};
}

}  // namespace fusewire
