// SPDX-License-Identifier: Apache-2.0
#pragma once

// Catalog of the 25 acoustic tools with tier, scope, domain and music-only
// attributes. The catalog validates the step-1 (12, 23 with music) and step-2
// (5, 8 with music) counts and caps tool-result confidence by tier.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/errors.hpp"
#include "fusewire/evidence.hpp"

namespace fusewire {

enum class ToolScope { WholeAudio, SegmentLevel, Both };

inline const char* to_string(ToolScope s) {
    switch (s) {
        case ToolScope::WholeAudio: return "whole_audio";
        case ToolScope::SegmentLevel: return "segment_level";
        case ToolScope::Both: return "both";
    }
    return "whole_audio";
}

inline ToolScope tool_scope_from_string(const std::string& s) {
    if (s == "whole_audio") return ToolScope::WholeAudio;
    if (s == "segment_level") return ToolScope::SegmentLevel;
    if (s == "both") return ToolScope::Both;
    throw ConfigError("unknown tool scope: " + s);
}

enum class VerificationStep { Step1, Step2 };

/// Registry entry for one tool. `interpreted` marks tools whose raw output is
/// post-processed by an LLM before entering the evidence pool.
struct ToolSpec {
    std::string name;
    ReliabilityTier tier = ReliabilityTier::Heuristic;
    ToolScope scope = ToolScope::WholeAudio;
    std::set<ContentType> domains;
    bool music_only = false;
    bool interpreted = false;
};

struct TimeRange {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct ToolRequest {
    std::string tool;
    std::string audio;  // opaque URI resolved by the backend
    std::optional<TimeRange> time_range;
    json params = json::object();
};

/// Structured output of one invocation. Failed invocations keep ok=false and
/// never enter the evidence pool.
struct ToolResult {
    ToolRequest request;
    json output = json::object();  // key-value map including "summary"
    double raw_confidence = 0.0;
    double capped_confidence = 0.0;
    double relevance = 0.0;
    long duration_ms = 0;
    bool ok = true;
    std::string error;

    std::string summary() const { return output.value("summary", ""); }
};

struct CatalogReport {
    std::vector<std::string> violations;
    bool valid() const { return violations.empty(); }
};

struct ToolCatalog {
    std::vector<ToolSpec> specs;

    const ToolSpec* find(const std::string& name) const {
        for (const auto& s : specs)
            if (s.name == name) return &s;
        return nullptr;
    }
};

// ---- operations -----------------------------------------------------------

namespace detail {
inline std::set<ContentType> all_domains() {
    return {ContentType::Speech, ContentType::Music, ContentType::Mixed,
            ContentType::Environmental};
}
}  // namespace detail

/// The default 25-tool catalog. Step membership is scope-derived: step 1 takes
/// whole-audio/both tools, step 2 segment-level/both tools, music-only tools
/// gated on content. Counts: step 1 = 12 (23 with music), step 2 = 5 (8 with
/// music). Override via a catalog file when a deployment differs.
inline ToolCatalog build_default_catalog() {
    using RT = ReliabilityTier;
    using TS = ToolScope;
    const std::set<ContentType> speech = {ContentType::Speech};
    const std::set<ContentType> music = {ContentType::Music};
    const std::set<ContentType> environmental = {ContentType::Environmental};
    const std::set<ContentType> any = detail::all_domains();

    ToolCatalog c;
    // step 1: whole-audio (non-music 12 including the two source-model queries)
    c.specs.push_back({"speech llm query (qwen3)", RT::Lalm, TS::WholeAudio, any, false, false});
    c.specs.push_back({"speech llm query (stepaudio)", RT::Lalm, TS::WholeAudio, any, false, false});
    c.specs.push_back({"transcription", RT::Probabilistic, TS::Both, speech, false, false});
    c.specs.push_back({"diarization + transcription", RT::Probabilistic, TS::Both, speech, false, false});
    c.specs.push_back({"environment detection", RT::Heuristic, TS::WholeAudio, environmental, false, false});
    c.specs.push_back({"synthetic speech detection", RT::Probabilistic, TS::WholeAudio, speech, false, true});
    c.specs.push_back({"energy dynamics", RT::Analytic, TS::Both, any, false, false});
    c.specs.push_back({"spectral features", RT::Analytic, TS::WholeAudio, any, false, false});
    c.specs.push_back({"audio quality", RT::Analytic, TS::WholeAudio, any, false, true});
    c.specs.push_back({"scene context", RT::Heuristic, TS::WholeAudio, environmental, false, false});
    c.specs.push_back({"speaker count", RT::Probabilistic, TS::WholeAudio, speech, false, false});
    c.specs.push_back({"event sequence", RT::Probabilistic, TS::WholeAudio,
                       {ContentType::Environmental, ContentType::Mixed}, false, true});
    // step 1: music additions (11)
    c.specs.push_back({"melody transcription", RT::Probabilistic, TS::WholeAudio, music, true, true});
    c.specs.push_back({"instrument detection", RT::Probabilistic, TS::Both, music, true, true});
    c.specs.push_back({"harmonic analysis", RT::Analytic, TS::Both, music, true, false});
    c.specs.push_back({"beat & onset detection", RT::Analytic, TS::Both, music, true, true});
    c.specs.push_back({"chord progression", RT::Heuristic, TS::WholeAudio, music, true, true});
    c.specs.push_back({"tempo tracking", RT::Analytic, TS::WholeAudio, music, true, true});
    c.specs.push_back({"rhythm analysis", RT::Heuristic, TS::WholeAudio, music, true, true});
    c.specs.push_back({"source separation", RT::Probabilistic, TS::WholeAudio, music, true, false});
    c.specs.push_back({"vocal technique", RT::Heuristic, TS::WholeAudio, music, true, true});
    c.specs.push_back({"instrument sequence", RT::Probabilistic, TS::WholeAudio, music, true, false});
    c.specs.push_back({"rhythm patterns", RT::Heuristic, TS::WholeAudio, music, true, true});
    // step 2: segment-level only (2)
    c.specs.push_back({"temporal segments", RT::Analytic, TS::SegmentLevel, any, false, true});
    c.specs.push_back({"audio effects", RT::Analytic, TS::SegmentLevel,
                       {ContentType::Speech, ContentType::Music}, false, true});
    return c;
}

inline CatalogReport validate_catalog(const ToolCatalog& catalog) {
    CatalogReport report;
    std::set<std::string> names;
    for (const auto& s : catalog.specs) {
        if (!names.insert(s.name).second)
            report.violations.push_back("duplicate tool name: " + s.name);
        if (s.music_only && !s.domains.count(ContentType::Music))
            report.violations.push_back("music-only tool lacks music domain: " + s.name);
        if (s.domains.empty()) report.violations.push_back("tool has empty domain set: " + s.name);
    }
    auto count = [&](ToolScope a, ToolScope b, bool include_music) {
        int n = 0;
        for (const auto& s : catalog.specs)
            if ((s.scope == a || s.scope == b) && (include_music || !s.music_only)) ++n;
        return n;
    };
    struct Check {
        const char* label;
        int actual;
        int expected;
    } checks[] = {
        {"step-1 count", count(ToolScope::WholeAudio, ToolScope::Both, false), 12},
        {"step-1 count with music tools", count(ToolScope::WholeAudio, ToolScope::Both, true), 23},
        {"step-2 count", count(ToolScope::SegmentLevel, ToolScope::Both, false), 5},
        {"step-2 count with music tools", count(ToolScope::SegmentLevel, ToolScope::Both, true), 8},
    };
    for (const auto& chk : checks) {
        if (chk.actual != chk.expected)
            report.violations.push_back(std::string(chk.label) + " " + std::to_string(chk.actual) +
                                        " != " + std::to_string(chk.expected));
    }
    return report;
}

/// Tools selectable in the given step for the given content type. Music-only
/// tools are included only for Music and Mixed content.
inline std::vector<ToolSpec> tools_for_step(const ToolCatalog& catalog, VerificationStep step,
                                            ContentType content) {
    auto report = validate_catalog(catalog);
    if (!report.valid())
        throw ConfigError("tools_for_step on invalid catalog: " + report.violations.front());
    bool music = content == ContentType::Music || content == ContentType::Mixed;
    std::vector<ToolSpec> out;
    for (const auto& s : catalog.specs) {
        bool in_step = step == VerificationStep::Step1
                           ? (s.scope == ToolScope::WholeAudio || s.scope == ToolScope::Both)
                           : (s.scope == ToolScope::SegmentLevel || s.scope == ToolScope::Both);
        if (!in_step) continue;
        if (s.music_only && !music) continue;
        out.push_back(s);
    }
    return out;
}

/// capped = min(tier cap, raw x domain appropriateness factor).
inline ToolResult cap_tool_confidence(ToolResult result, const ToolSpec& spec, ContentType content,
                                      const ScoringConfig& config) {
    if (result.raw_confidence < 0.0 || result.raw_confidence > 1.0)
        throw InvalidInput("cap_tool_confidence: raw_confidence must be in [0,1]");
    double factor = domain_factor(spec.domains, content, config);
    result.capped_confidence =
        std::min(tier_policy(spec.tier, config).cap, result.raw_confidence * factor);
    return result;
}

// ---- json -----------------------------------------------------------------

inline void to_json(json& j, const ToolSpec& s) {
    std::vector<std::string> domains;
    for (auto d : s.domains) domains.push_back(to_string(d));
    std::sort(domains.begin(), domains.end());
    j = json{{"name", s.name},
             {"tier", to_string(s.tier)},
             {"scope", to_string(s.scope)},
             {"domains", domains},
             {"music_only", s.music_only},
             {"interpreted", s.interpreted}};
}

inline void from_json(const json& j, ToolSpec& s) {
    s.name = j.at("name").get<std::string>();
    s.tier = tier_from_string(j.at("tier").get<std::string>());
    s.scope = tool_scope_from_string(j.at("scope").get<std::string>());
    s.domains.clear();
    for (const auto& d : j.at("domains")) s.domains.insert(content_from_string(d.get<std::string>()));
    s.music_only = j.value("music_only", false);
    s.interpreted = j.value("interpreted", false);
}

inline void to_json(json& j, const ToolCatalog& c) { j = c.specs; }

inline void from_json(const json& j, ToolCatalog& c) {
    c.specs = j.get<std::vector<ToolSpec>>();
}

inline void to_json(json& j, const TimeRange& t) {
    j = json{{"start_s", text::round4(t.start_s)}, {"end_s", text::round4(t.end_s)}};
}

inline void from_json(const json& j, TimeRange& t) {
    t.start_s = j.at("start_s").get<double>();
    t.end_s = j.at("end_s").get<double>();
}

inline void to_json(json& j, const ToolRequest& r) {
    j = json{{"tool", r.tool}, {"audio", r.audio}, {"params", r.params}};
    if (r.time_range) j["time_range"] = *r.time_range;
}

inline void from_json(const json& j, ToolRequest& r) {
    r.tool = j.at("tool").get<std::string>();
    r.audio = j.at("audio").get<std::string>();
    r.params = j.value("params", json::object());
    if (j.contains("time_range")) r.time_range = j.at("time_range").get<TimeRange>();
}

inline void to_json(json& j, const ToolResult& r) {
    j = json{{"request", r.request},
             {"output", r.output},
             {"raw_confidence", text::round4(r.raw_confidence)},
             {"capped_confidence", text::round4(r.capped_confidence)},
             {"relevance", text::round4(r.relevance)},
             {"duration_ms", r.duration_ms},
             {"ok", r.ok}};
    if (!r.ok) j["error"] = r.error;
}

inline void from_json(const json& j, ToolResult& r) {
    r.request = j.at("request").get<ToolRequest>();
    r.output = j.value("output", json::object());
    r.raw_confidence = j.value("raw_confidence", 0.0);
    r.capped_confidence = j.value("capped_confidence", 0.0);
    r.relevance = j.value("relevance", 0.0);
    r.duration_ms = j.value("duration_ms", 0L);
    r.ok = j.value("ok", true);
    r.error = j.value("error", "");
}

}  // namespace fusewire
