// SPDX-License-Identifier: Apache-2.0
#pragma once

// The per-sample debug log. A record is closed under replay: it carries
// everything the argumentation stage needs to re-run with no other input,
// plus every trace the analytics consume.

#include <fstream>
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
#include "fusewire/unified.hpp"

namespace fusewire {

inline constexpr int kRecordSchemaVersion = 1;

struct StageTimings {
    long total_ms = 0;
    std::map<std::string, long> stage_ms;
};

inline void to_json(json& j, const StageTimings& t) {
    j = json{{"total_ms", t.total_ms}, {"stage_ms", t.stage_ms}};
}

inline void from_json(const json& j, StageTimings& t) {
    t.total_ms = j.value("total_ms", 0L);
    t.stage_ms = j.value("stage_ms", std::map<std::string, long>{});
}

struct PipelineRecord {
    int schema_version = kRecordSchemaVersion;
    std::string sample_id;
    std::string audio;
    double duration_s = 0.0;
    std::string question;
    std::vector<std::string> choices;
    std::optional<std::string> correct_choice;
    ContentType content = ContentType::Mixed;
    std::vector<SourceReport> source_reports;  // tentative predictions included (logs only)
    UnifiedAnalysis unified;
    std::vector<RoundRecord> rounds;
    std::vector<Contradiction> contradictions;
    std::vector<RiskAssessment> risk_assessments;
    std::vector<VerificationHypothesis> hypotheses;
    std::vector<EvidenceItem> final_evidence;
    std::vector<ToolResult> tool_results;
    AnswerDecision decision;
    ReasoningDocument reasoning;
    CompletenessReport completeness;
    std::vector<ChatExchange> chat_log;
    StageTimings timings;
};

inline void to_json(json& j, const PipelineRecord& r) {
    j = json{{"schema_version", r.schema_version},
             {"sample_id", r.sample_id},
             {"audio", r.audio},
             {"duration_s", text::round4(r.duration_s)},
             {"question", r.question},
             {"choices", r.choices},
             {"content", to_string(r.content)},
             {"source_reports", r.source_reports},
             {"unified", r.unified},
             {"rounds", r.rounds},
             {"contradictions", r.contradictions},
             {"risk_assessments", r.risk_assessments},
             {"hypotheses", r.hypotheses},
             {"final_evidence", r.final_evidence},
             {"tool_results", r.tool_results},
             {"decision", r.decision},
             {"reasoning", r.reasoning},
             {"completeness", r.completeness},
             {"chat_log", r.chat_log},
             {"timings", r.timings}};
    if (r.correct_choice) j["correct_choice"] = *r.correct_choice;
}

inline void from_json(const json& j, PipelineRecord& r) {
    r.schema_version = j.value("schema_version", kRecordSchemaVersion);
    r.sample_id = j.at("sample_id").get<std::string>();
    r.audio = j.value("audio", "");
    r.duration_s = j.value("duration_s", 0.0);
    r.question = j.value("question", "");
    r.choices = j.value("choices", std::vector<std::string>{});
    if (j.contains("correct_choice") && !j.at("correct_choice").is_null())
        r.correct_choice = j.at("correct_choice").get<std::string>();
    r.content = content_from_string(j.value("content", "mixed"));
    r.source_reports = j.value("source_reports", std::vector<SourceReport>{});
    r.unified = j.value("unified", UnifiedAnalysis{});
    r.rounds = j.value("rounds", std::vector<RoundRecord>{});
    r.contradictions = j.value("contradictions", std::vector<Contradiction>{});
    r.risk_assessments = j.value("risk_assessments", std::vector<RiskAssessment>{});
    r.hypotheses = j.value("hypotheses", std::vector<VerificationHypothesis>{});
    r.final_evidence = j.value("final_evidence", std::vector<EvidenceItem>{});
    r.tool_results = j.value("tool_results", std::vector<ToolResult>{});
    r.decision = j.value("decision", AnswerDecision{});
    r.reasoning = j.value("reasoning", ReasoningDocument{});
    r.completeness = j.value("completeness", CompletenessReport{});
    r.chat_log = j.value("chat_log", std::vector<ChatExchange>{});
    r.timings = j.value("timings", StageTimings{});
}

/// Rebuilds the redacted-able evidence bundle from a record (replay closure).
inline EvidenceBundle bundle_from_record(const PipelineRecord& r) {
    EvidenceBundle b;
    b.sample_id = r.sample_id;
    b.question = r.question;
    b.choices = r.choices;
    b.content = r.content;
    b.items = r.final_evidence;
    b.tool_results = r.tool_results;
    b.contradictions = r.contradictions;
    b.disagreements = r.unified.disagreements;
    b.source_reports = r.source_reports;
    b.redacted = false;
    return b;
}

// ---- jsonl ------------------------------------------------------------------------

struct ReadWarning {
    size_t line_number = 0;
    std::string message;
};

inline void write_records(const std::string& path, const std::vector<PipelineRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    for (const auto& r : records) out << json(r).dump() << "\n";
}

inline void append_record(std::ofstream& out, const PipelineRecord& record) {
    out << json(record).dump() << "\n";
}

/// Reads a JSONL record stream. Malformed lines are skipped with a warning
/// carrying the line number; unknown fields are tolerated.
inline std::vector<PipelineRecord> read_records(const std::string& path,
                                                std::vector<ReadWarning>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open records file: " + path);
    std::vector<PipelineRecord> records;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (warnings) warnings->push_back({line_number, "not valid JSON"});
            continue;
        }
        try {
            records.push_back(j.get<PipelineRecord>());
        } catch (const std::exception& e) {
            if (warnings) warnings->push_back({line_number, e.what()});
        }
    }
    return records;
}

}  // namespace fusewire
