// SPDX-License-Identifier: Apache-2.0
#pragma once

// Three-stage contradiction detection: (1) keyword reclassification of LALM
// confidence against reproducible tool output, (2) rule-based hallucination
// risk assessment with domain guards, (3) conflict classification with four
// logical-pitfall checks. Unresolved contradictions become verification
// hypotheses with concrete tool calls and time ranges.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/backends.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/textutil.hpp"
#include "fusewire/tools.hpp"
#include "fusewire/unified.hpp"

namespace fusewire {

enum class ContradictionKind { InterTool, IntraTool, HierarchyViolation, LalmVsTool };

inline const char* to_string(ContradictionKind k) {
    switch (k) {
        case ContradictionKind::InterTool: return "inter_tool";
        case ContradictionKind::IntraTool: return "intra_tool";
        case ContradictionKind::HierarchyViolation: return "hierarchy_violation";
        case ContradictionKind::LalmVsTool: return "lalm_vs_tool";
    }
    return "inter_tool";
}

inline ContradictionKind contradiction_kind_from_string(const std::string& s) {
    if (s == "inter_tool") return ContradictionKind::InterTool;
    if (s == "intra_tool") return ContradictionKind::IntraTool;
    if (s == "hierarchy_violation") return ContradictionKind::HierarchyViolation;
    if (s == "lalm_vs_tool") return ContradictionKind::LalmVsTool;
    throw ConfigError("unknown contradiction kind: " + s);
}

enum class Pitfall {
    AbsenceAsProof,
    SingleSourceDismissal,
    DiarizationOversegmentation,
    NonOverlappingTranscripts,
};

inline const char* to_string(Pitfall p) {
    switch (p) {
        case Pitfall::AbsenceAsProof: return "absence_as_proof";
        case Pitfall::SingleSourceDismissal: return "single_source_dismissal";
        case Pitfall::DiarizationOversegmentation: return "diarization_oversegmentation";
        case Pitfall::NonOverlappingTranscripts: return "non_overlapping_transcripts";
    }
    return "absence_as_proof";
}

inline Pitfall pitfall_from_string(const std::string& s) {
    if (s == "absence_as_proof") return Pitfall::AbsenceAsProof;
    if (s == "single_source_dismissal") return Pitfall::SingleSourceDismissal;
    if (s == "diarization_oversegmentation") return Pitfall::DiarizationOversegmentation;
    if (s == "non_overlapping_transcripts") return Pitfall::NonOverlappingTranscripts;
    throw ConfigError("unknown pitfall: " + s);
}

struct Contradiction {
    std::string id;
    ContradictionKind kind = ContradictionKind::InterTool;
    std::vector<std::string> item_ids;
    std::string description;
    bool resolved = false;
    std::set<Pitfall> pitfall_flags;
    std::string resolved_against;  // losing item id when targeted validation sided
};

struct RiskAssessment {
    std::string item_id;
    RiskLevel risk = RiskLevel::Low;
    std::string rationale;
};

struct VerificationHypothesis {
    std::string id;
    std::string statement;
    std::vector<ToolRequest> tool_calls;
    std::string contradiction_id;
    bool unverifiable = false;
};

struct ContradictionConfig {
    double keyword_overlap_threshold = 0.30;  // stemmed content-word Jaccard
    double speaker_guard_ratio = 3.0;         // clustering count vs diarization estimate
    double confidence_floor = 0.05;           // stage-1 clamp lower bound
};

namespace detail {

inline std::optional<double> first_count(const json& output, const std::string& key,
                                         const std::string& summary) {
    if (output.contains(key) && output.at(key).is_number())
        return output.at(key).get<double>();
    auto q = text::quantities(summary);
    if (auto it = q.find("speaker"); it != q.end() && !it->second.empty()) return *it->second.begin();
    for (const auto& [head, vals] : q)
        if (!vals.empty()) return *vals.begin();
    return std::nullopt;
}

inline const EvidenceItem* find_item(const std::vector<EvidenceItem>& items,
                                     const std::string& id) {
    for (const auto& it : items)
        if (it.id == id) return &it;
    return nullptr;
}

inline bool disjoint_ranges(const EvidenceItem& a, const EvidenceItem& b) {
    if (!a.time_range || !b.time_range) return false;
    return a.time_range->second <= b.time_range->first ||
           b.time_range->second <= a.time_range->first;
}

}  // namespace detail

// ---- stage 1: keyword reclassification ---------------------------------------

/// Adjusts LALM confidence by keyword overlap with reproducible tool output:
/// +0.15 on content-word overlap, -0.15 on an explicit conflict (negated shared
/// term or numeric mismatch on the same quantity), clamped to [0.05, 0.70].
/// One net adjustment per item per pipeline run.
inline std::vector<EvidenceItem> stage1_keyword_reclassify(
    std::vector<EvidenceItem> items, const std::vector<ToolResult>& tool_results,
    const ToolCatalog& catalog, const ScoringConfig& scoring,
    const ContradictionConfig& config = {}) {
    for (auto& item : items) {
        if (!item.origin.is_lalm() || item.keyword_adjustment != 0.0) continue;
        double adjust = 0.0;
        for (const auto& result : tool_results) {
            if (!result.ok) continue;
            const ToolSpec* spec = catalog.find(result.request.tool);
            if (!spec || !is_reproducible(spec->tier)) continue;
            const std::string summary = result.summary();
            if (summary.empty()) continue;
            if (text::conflicting(item.claim, summary)) {
                adjust = -scoring.keyword_adjust;
                break;  // an explicit conflict outweighs any overlap bonus
            }
            if (text::claim_similarity(item.claim, summary) >= config.keyword_overlap_threshold)
                adjust = scoring.keyword_adjust;
        }
        if (adjust != 0.0) {
            item.keyword_adjustment = adjust;
            item.confidence = std::min(scoring.lalm_hard_cap,
                                       std::max(config.confidence_floor, item.confidence + adjust));
        }
    }
    return items;
}

// ---- stage 2: hallucination risk assessment -----------------------------------

/// Base risk from (tier, status): corroborated -> Low; source-specific -> Low
/// for reproducible tiers, Medium otherwise; disagreement -> High. Guard: a
/// cosine-clustering speaker count at or above 3x the diarization estimate is
/// a segmentation artifact, not a measurement.
inline std::vector<RiskAssessment> stage2_risk_assessment(
    const std::vector<EvidenceItem>& items, const std::vector<ToolResult>& tool_results,
    const ContradictionConfig& config = {}) {
    std::optional<double> cluster_count;
    std::optional<double> diarization_count;
    for (const auto& r : tool_results) {
        if (!r.ok) continue;
        if (r.request.tool == "speaker count")
            cluster_count = detail::first_count(r.output, "speaker_count", r.summary());
        else if (r.request.tool == "diarization + transcription")
            diarization_count = detail::first_count(r.output, "speaker_count", r.summary());
    }
    bool artifact = cluster_count && diarization_count && *diarization_count > 0 &&
                    *cluster_count >= config.speaker_guard_ratio * *diarization_count;

    std::vector<RiskAssessment> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        RiskAssessment a;
        a.item_id = item.id;
        switch (item.status) {
            case EvidenceStatus::Corroborated:
                a.risk = RiskLevel::Low;
                a.rationale = "corroborated";
                break;
            case EvidenceStatus::SourceSpecific:
                if (is_reproducible(item.tier)) {
                    a.risk = RiskLevel::Low;
                    a.rationale = "single-source but reproducible tier";
                } else {
                    a.risk = RiskLevel::Medium;
                    a.rationale = "single-source, non-reproducible tier";
                }
                break;
            case EvidenceStatus::Disagreement:
                a.risk = RiskLevel::High;
                a.rationale = "conflicting claims";
                break;
        }
        if (artifact && item.origin.kind == EvidenceOrigin::Kind::ToolMeasurement &&
            item.origin.name == "speaker count") {
            a.risk = RiskLevel::SegmentationArtifact;
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "clustering count %.0f >= %.0fx diarization estimate %.0f",
                          *cluster_count, config.speaker_guard_ratio, *diarization_count);
            a.rationale = buf;
        }
        out.push_back(std::move(a));
    }
    return out;
}

inline void apply_risk(std::vector<EvidenceItem>& items,
                       const std::vector<RiskAssessment>& assessments) {
    std::map<std::string, RiskLevel> by_id;
    for (const auto& a : assessments) by_id[a.item_id] = a.risk;
    for (auto& item : items)
        if (auto it = by_id.find(item.id); it != by_id.end()) item.risk = it->second;
}

// ---- stage 3: conflict classification -------------------------------------------

namespace detail {

inline ContradictionKind derive_kind(const EvidenceItem& a, const EvidenceItem& b,
                                     const ScoringConfig& scoring) {
    if (a.tier != b.tier) {
        const EvidenceItem& lower = outranks(a.tier, b.tier) ? b : a;
        const EvidenceItem& higher = outranks(a.tier, b.tier) ? a : b;
        if (evidence_weight(lower, scoring) > evidence_weight(higher, scoring))
            return ContradictionKind::HierarchyViolation;
    }
    bool a_lalm = a.origin.is_lalm();
    bool b_lalm = b.origin.is_lalm();
    if (a_lalm != b_lalm) return ContradictionKind::LalmVsTool;
    if (!a_lalm && a.origin.name == b.origin.name) return ContradictionKind::IntraTool;
    return ContradictionKind::InterTool;
}

inline void flag_pitfalls(Contradiction& c, const std::vector<EvidenceItem>& items) {
    if (c.item_ids.size() < 2) return;
    const EvidenceItem* a = find_item(items, c.item_ids[0]);
    const EvidenceItem* b = find_item(items, c.item_ids[1]);
    if (!a || !b) return;
    if (disjoint_ranges(*a, *b)) {
        // claims about different moments do not actually conflict
        c.pitfall_flags.insert(Pitfall::NonOverlappingTranscripts);
        c.resolved = true;
    }
    if (text::is_absence_claim(a->claim) != text::is_absence_claim(b->claim))
        c.pitfall_flags.insert(Pitfall::AbsenceAsProof);
    if (a->risk == RiskLevel::SegmentationArtifact || b->risk == RiskLevel::SegmentationArtifact)
        c.pitfall_flags.insert(Pitfall::DiarizationOversegmentation);
}

}  // namespace detail

/// Classifies contradictions via the backend when available, with a rule-only
/// fallback (numeric mismatch and tier-inversion scans). Both paths run the
/// four pitfall checks; disjoint-time conflicts auto-resolve. LALM-vs-LALM
/// conflicts stay in the unified analysis as disagreements and are not
/// re-detected here.
inline std::vector<Contradiction> stage3_detect(const std::vector<EvidenceItem>& items,
                                                const RecordingChat& backend,
                                                const ScoringConfig& scoring) {
    std::vector<Contradiction> out;
    int counter = 0;

    auto add_rule_based = [&]() {
        for (size_t i = 0; i < items.size(); ++i) {
            for (size_t j = i + 1; j < items.size(); ++j) {
                const auto& a = items[i];
                const auto& b = items[j];
                if (a.origin.is_lalm() && b.origin.is_lalm()) continue;
                if (!text::conflicting(a.claim, b.claim)) continue;
                Contradiction c;
                c.id = "c" + std::to_string(counter++);
                c.kind = detail::derive_kind(a, b, scoring);
                c.item_ids = {a.id, b.id};
                c.description = a.id + " \"" + a.claim + "\" vs " + b.id + " \"" + b.claim + "\"";
                detail::flag_pitfalls(c, items);
                out.push_back(std::move(c));
            }
        }
    };

    if (!backend.client) {
        add_rule_based();
        return out;
    }

    std::string prompt =
        "Detect contradictions in the evidence below. Classify each as inter_tool, "
        "intra_tool, hierarchy_violation or lalm_vs_tool, and check four pitfalls: "
        "absence_as_proof, single_source_dismissal, diarization_oversegmentation, "
        "non_overlapping_transcripts.\nRespond with a JSON list of {\"kind\", \"item_ids\", "
        "\"description\", \"pitfalls\", \"resolved\"}.\nEvidence:\n";
    for (const auto& item : items)
        prompt += "- [" + item.id + "|" + to_string(item.tier) + "|" +
                  (item.origin.is_lalm() ? "lalm:" : "tool:") + item.origin.name + "] " +
                  item.claim + "\n";
    ChatRequest request;
    request.endpoint_id = "reasoner";
    request.messages = {{"system", "You are a contradiction detection assistant.", {}},
                        {"user", prompt, {}}};
    auto response = backend.try_complete(request);
    if (!response) {
        add_rule_based();
        return out;
    }

    auto open = response->find('[');
    auto close = response->rfind(']');
    json arr = open != std::string::npos && close != std::string::npos && close > open
                   ? json::parse(response->substr(open, close - open + 1), nullptr, false)
                   : json();
    if (!arr.is_array()) {
        add_rule_based();
        return out;
    }

    for (const auto& entry : arr) {
        if (!entry.is_object() || !entry.contains("item_ids")) continue;
        Contradiction c;
        c.item_ids.clear();
        for (const auto& id : entry.at("item_ids"))
            if (id.is_string() && detail::find_item(items, id.get<std::string>()))
                c.item_ids.push_back(id.get<std::string>());
        if (c.item_ids.size() < 2) continue;
        try {
            c.kind = contradiction_kind_from_string(entry.value("kind", "inter_tool"));
        } catch (const ConfigError&) {
            c.kind = ContradictionKind::InterTool;
        }
        c.id = "c" + std::to_string(counter++);
        c.description = entry.value("description", "");
        c.resolved = entry.value("resolved", false);
        for (const auto& p : entry.value("pitfalls", json::array())) {
            if (!p.is_string()) continue;
            try {
                c.pitfall_flags.insert(pitfall_from_string(p.get<std::string>()));
            } catch (const ConfigError&) {
            }
        }
        const EvidenceItem* a = detail::find_item(items, c.item_ids[0]);
        const EvidenceItem* b = detail::find_item(items, c.item_ids[1]);
        // hierarchy violations only exist when the lower tier actually outweighs
        if (c.kind == ContradictionKind::HierarchyViolation &&
            detail::derive_kind(*a, *b, scoring) != ContradictionKind::HierarchyViolation)
            c.kind = detail::derive_kind(*a, *b, scoring);
        // veto dismissal of a single-source claim that nothing actually conflicts with
        if (!text::conflicting(a->claim, b->claim) &&
            ((a->origin.is_lalm() && a->status == EvidenceStatus::SourceSpecific) ||
             (b->origin.is_lalm() && b->status == EvidenceStatus::SourceSpecific))) {
            c.pitfall_flags.insert(Pitfall::SingleSourceDismissal);
            c.resolved = true;
        }
        detail::flag_pitfalls(c, items);
        out.push_back(std::move(c));
    }
    return out;
}

// ---- non-dismissal policy ------------------------------------------------------

/// LALM items become hallucination-suspect (High) only when actively
/// contradicted by reproducible tool evidence: an unresolved non-absence
/// contradiction against a reproducible-tier tool result, or a targeted
/// validation that sided against them. Every other conflicted LALM item is
/// kept as Speculative. Item count is always preserved.
inline std::vector<EvidenceItem> apply_non_dismissal(
    std::vector<EvidenceItem> items, const std::vector<Contradiction>& contradictions,
    const std::vector<Disagreement>& disagreements = {}) {
    for (auto& item : items) {
        if (!item.origin.is_lalm()) continue;
        bool actively_contradicted = false;
        bool conflicted = false;
        for (const auto& c : contradictions) {
            if (std::find(c.item_ids.begin(), c.item_ids.end(), item.id) == c.item_ids.end())
                continue;
            if (c.resolved) {
                if (c.resolved_against == item.id) actively_contradicted = true;
                continue;
            }
            conflicted = true;
            if (c.pitfall_flags.count(Pitfall::AbsenceAsProof)) continue;
            for (const auto& other_id : c.item_ids) {
                if (other_id == item.id) continue;
                const EvidenceItem* other = detail::find_item(items, other_id);
                if (other && !other->origin.is_lalm() && is_reproducible(other->tier) &&
                    other->risk != RiskLevel::SegmentationArtifact)
                    actively_contradicted = true;
            }
        }
        for (const auto& d : disagreements) {
            if (std::find(d.item_ids.begin(), d.item_ids.end(), item.id) == d.item_ids.end())
                continue;
            if (d.resolved) {
                if (d.resolved_against == item.id) actively_contradicted = true;
                continue;
            }
            conflicted = true;
        }
        // item carries disagreement status but no Disagreement entry was passed
        if (disagreements.empty() && item.status == EvidenceStatus::Disagreement)
            conflicted = true;
        if (actively_contradicted)
            item.risk = RiskLevel::High;
        else if (conflicted)
            item.risk = RiskLevel::Speculative;
    }
    return items;
}

// ---- hypothesis generation -------------------------------------------------------

namespace detail {

inline std::string preferred_tool_for(const std::string& topic_text) {
    auto stems = text::content_words(topic_text);
    auto has = [&](std::initializer_list<const char*> words) {
        for (const char* w : words)
            if (stems.count(text::stem(w))) return true;
        return false;
    };
    if (has({"speaker", "speakers", "diarization", "voice", "voices"}))
        return "diarization + transcription";
    if (has({"transcript", "transcription", "say", "says", "said", "word", "words", "sentence"}))
        return "transcription";
    if (has({"energy", "loud", "loudness", "volume", "quiet", "dynamics"}))
        return "energy dynamics";
    if (has({"instrument", "instruments", "piano", "guitar", "drums", "violin"}))
        return "instrument detection";
    if (has({"beat", "beats", "tempo", "onset", "rhythm", "bpm"}))
        return "beat & onset detection";
    if (has({"chord", "chords", "harmony", "harmonic", "key", "melody", "pitch"}))
        return "harmonic analysis";
    if (has({"effect", "effects", "reverb", "echo", "delay"})) return "audio effects";
    return "temporal segments";
}

}  // namespace detail

/// One hypothesis per unresolved conflict (stage-3 contradictions and
/// cross-source disagreements alike). Tool calls come from the step-2 catalog
/// for the sample's content type; the time range is the union of the
/// conflicting items' scopes, padded and clipped to the audio bounds. When no
/// applicable segment tool exists the hypothesis is marked unverifiable and
/// passes to argumentation as an open conflict.
inline std::vector<VerificationHypothesis> generate_hypotheses(
    const std::vector<Contradiction>& contradictions, const std::vector<Disagreement>& disagreements,
    const std::vector<EvidenceItem>& items, const ToolCatalog& catalog, ContentType content,
    const std::string& audio_uri, double duration_s, double pad_s = 1.0) {
    auto step2 = tools_for_step(catalog, VerificationStep::Step2, content);
    auto in_step2 = [&](const std::string& name) {
        return std::any_of(step2.begin(), step2.end(),
                           [&](const ToolSpec& s) { return s.name == name; });
    };

    std::vector<VerificationHypothesis> out;
    int counter = 0;
    auto emit = [&](const std::string& conflict_id, const std::string& description,
                    const std::vector<std::string>& item_ids) {
        VerificationHypothesis h;
        h.id = "h" + std::to_string(counter++);
        h.contradiction_id = conflict_id;

        std::string topic_text = description;
        double lo = duration_s, hi = 0.0;
        bool any_range = false;
        for (const auto& id : item_ids) {
            const EvidenceItem* item = detail::find_item(items, id);
            if (!item) continue;
            topic_text += " " + item->claim;
            if (item->time_range) {
                lo = std::min(lo, item->time_range->first);
                hi = std::max(hi, item->time_range->second);
                any_range = true;
            }
        }
        if (!any_range) {
            lo = 0.0;
            hi = duration_s;
        }
        TimeRange range{std::max(0.0, lo - pad_s), std::min(duration_s, hi + pad_s)};

        std::string tool = detail::preferred_tool_for(topic_text);
        h.statement = "Verify with " + tool + ": " + description;
        if (!in_step2(tool)) {
            h.unverifiable = true;
            h.statement = "No applicable segment tool for: " + description;
            out.push_back(std::move(h));
            return;
        }
        ToolRequest request;
        request.tool = tool;
        request.audio = audio_uri;
        request.time_range = range;
        h.tool_calls.push_back(std::move(request));
        out.push_back(std::move(h));
    };

    for (const auto& c : contradictions)
        if (!c.resolved) emit(c.id, c.description, c.item_ids);
    for (const auto& d : disagreements)
        if (!d.resolved) emit(d.id, "disagreement about " + d.topic, d.item_ids);
    return out;
}

// ---- json -----------------------------------------------------------------------

inline void to_json(json& j, const Contradiction& c) {
    std::vector<std::string> pitfalls;
    for (auto p : c.pitfall_flags) pitfalls.push_back(to_string(p));
    std::sort(pitfalls.begin(), pitfalls.end());
    j = json{{"id", c.id},
             {"kind", to_string(c.kind)},
             {"item_ids", c.item_ids},
             {"description", c.description},
             {"resolved", c.resolved},
             {"pitfalls", pitfalls}};
    if (!c.resolved_against.empty()) j["resolved_against"] = c.resolved_against;
}

inline void from_json(const json& j, Contradiction& c) {
    c.id = j.value("id", "");
    c.kind = contradiction_kind_from_string(j.value("kind", "inter_tool"));
    c.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    c.description = j.value("description", "");
    c.resolved = j.value("resolved", false);
    c.pitfall_flags.clear();
    for (const auto& p : j.value("pitfalls", std::vector<std::string>{}))
        c.pitfall_flags.insert(pitfall_from_string(p));
    c.resolved_against = j.value("resolved_against", "");
}

inline void to_json(json& j, const RiskAssessment& a) {
    j = json{{"item_id", a.item_id}, {"risk", to_string(a.risk)}, {"rationale", a.rationale}};
}

inline void from_json(const json& j, RiskAssessment& a) {
    a.item_id = j.at("item_id").get<std::string>();
    a.risk = risk_from_string(j.at("risk").get<std::string>());
    a.rationale = j.value("rationale", "");
}

inline void to_json(json& j, const VerificationHypothesis& h) {
    j = json{{"id", h.id},
             {"statement", h.statement},
             {"tool_calls", h.tool_calls},
             {"contradiction_id", h.contradiction_id},
             {"unverifiable", h.unverifiable}};
}

inline void from_json(const json& j, VerificationHypothesis& h) {
    h.id = j.value("id", "");
    h.statement = j.value("statement", "");
    h.tool_calls = j.value("tool_calls", std::vector<ToolRequest>{});
    h.contradiction_id = j.value("contradiction_id", "");
    h.unverifiable = j.value("unverifiable", false);
}

}  // namespace fusewire
