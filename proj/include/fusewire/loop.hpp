// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-step verification loop. Step 1 gathers whole-audio evidence in up to 3
// agent-driven rounds, then runs the three contradiction stages; step 2
// executes hypothesis tool calls in up to 2 rounds of targeted validation.
// No (tool, params) pair is ever invoked twice within a sample.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/backends.hpp"
#include "fusewire/contradiction.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/textutil.hpp"
#include "fusewire/tools.hpp"
#include "fusewire/unified.hpp"

namespace fusewire {

enum class LoopStep { Step1, Step2, Done };

inline const char* to_string(LoopStep s) {
    switch (s) {
        case LoopStep::Step1: return "step1";
        case LoopStep::Step2: return "step2";
        case LoopStep::Done: return "done";
    }
    return "done";
}

enum class StopReason { ConfidenceSufficient, NoNewTools, RoundLimit, AllHypothesesChecked };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::ConfidenceSufficient: return "confidence_sufficient";
        case StopReason::NoNewTools: return "no_new_tools";
        case StopReason::RoundLimit: return "round_limit";
        case StopReason::AllHypothesesChecked: return "all_hypotheses_checked";
    }
    return "round_limit";
}

inline StopReason stop_reason_from_string(const std::string& s) {
    if (s == "confidence_sufficient") return StopReason::ConfidenceSufficient;
    if (s == "no_new_tools") return StopReason::NoNewTools;
    if (s == "round_limit") return StopReason::RoundLimit;
    if (s == "all_hypotheses_checked") return StopReason::AllHypothesesChecked;
    throw ConfigError("unknown stop reason: " + s);
}

struct LoopConfig {
    int step1_rounds = 3;
    int step2_rounds = 2;
    int max_per_round = 4;
    double sufficiency_threshold = 0.45;  // max answer-relevant evidence weight below this verifies
    double relevance_floor = 0.5;         // items below are not answer-relevant
    double hypothesis_pad_s = 1.0;
    double retry_pad_s = 3.0;  // wider window for the second validation round
};

struct RoundRecord {
    LoopStep step = LoopStep::Step1;
    int round = 0;
    std::vector<ToolRequest> proposed;
    std::vector<ToolResult> results;
    std::vector<std::string> skipped_duplicates;  // tool names of deduped proposals
    std::vector<std::string> warnings;
    std::optional<StopReason> stop_reason;
};

struct LoopState {
    std::string sample_id;
    std::string audio;
    double duration_s = 0.0;
    std::string question;
    std::vector<std::string> choices;
    ContentType content = ContentType::Mixed;
    std::vector<EvidenceItem> evidence;
    std::vector<Disagreement> disagreements;
    std::vector<ToolResult> tool_results;
    std::vector<Contradiction> contradictions;
    std::vector<RiskAssessment> risk_assessments;
    std::vector<RoundRecord> rounds;
    int round = 0;
    LoopStep step = LoopStep::Step1;
    std::set<std::string> invoked;  // (tool, params) digests
};

// ---- verification trigger -----------------------------------------------------

/// True when any disagreement is unresolved or the strongest answer-relevant
/// evidence is still below the sufficiency threshold.
inline bool needs_verification(const UnifiedAnalysis& analysis, const ScoringConfig& scoring,
                               const LoopConfig& config = {}) {
    for (const auto& d : analysis.disagreements)
        if (!d.resolved) return true;
    double best = 0.0;
    for (const auto& item : analysis.items) {
        if (item.relevance < config.relevance_floor && !item.direct_answer) continue;
        best = std::max(best, evidence_weight(item, scoring));
    }
    return best < config.sufficiency_threshold;
}

namespace detail {

inline bool loop_sufficient(const LoopState& state, const ScoringConfig& scoring,
                            const LoopConfig& config) {
    for (const auto& d : state.disagreements)
        if (!d.resolved) return false;
    double best = 0.0;
    for (const auto& item : state.evidence) {
        if (item.relevance < config.relevance_floor && !item.direct_answer) continue;
        best = std::max(best, evidence_weight(item, scoring));
    }
    return best >= config.sufficiency_threshold;
}

/// Tool result -> evidence item. The capped confidence (domain factor already
/// folded in) acts as the base; bonuses and the tier cap are applied on top.
inline EvidenceItem make_tool_item(const ToolResult& result, const ToolSpec& spec,
                                   const std::string& question,
                                   const std::vector<std::string>& choices, size_t index,
                                   const ScoringConfig& scoring) {
    EvidenceItem item;
    item.id = "t" + std::to_string(index);
    item.origin = EvidenceOrigin::tool(spec.name);
    item.claim = result.summary();
    item.tier = spec.tier;
    item.status = EvidenceStatus::SourceSpecific;
    item.direct_answer = result.output.value("direct_answer", false);
    item.domain_factor = result.raw_confidence > 0.0
                             ? result.capped_confidence / result.raw_confidence
                             : 1.0;
    item.relevance = result.relevance > 0.0
                         ? result.relevance
                         : text::lexical_relevance(item.claim, question, choices);
    if (result.request.time_range)
        item.time_range =
            std::make_pair(result.request.time_range->start_s, result.request.time_range->end_s);
    item.pre_clamp_confidence = result.capped_confidence;
    item.confidence = result.capped_confidence > 0.0
                          ? score_evidence(result.capped_confidence, spec.tier, false,
                                           item.direct_answer, 1.0, scoring)
                          : 0.0;
    return item;
}

/// Cross-corroborate reproducible tool items: distinct tools agreeing on a
/// claim upgrade each other. LALM/tool agreement is handled once, by the
/// stage-1 keyword reclassification, not here.
inline void rescore_tool_corroboration(LoopState& state, const ScoringConfig& scoring) {
    auto& items = state.evidence;
    for (size_t i = 0; i < items.size(); ++i) {
        for (size_t j = i + 1; j < items.size(); ++j) {
            auto& a = items[i];
            auto& b = items[j];
            if (a.origin.is_lalm() || b.origin.is_lalm()) continue;
            if (a.origin.name == b.origin.name) continue;
            if (text::conflicting(a.claim, b.claim)) continue;
            if (text::claim_similarity(a.claim, b.claim) < 0.5) continue;
            for (auto* x : {&a, &b}) {
                auto* other = x == &a ? &b : &a;
                if (std::find(x->corroborated_by.begin(), x->corroborated_by.end(), other->id) !=
                    x->corroborated_by.end())
                    continue;
                x->corroborated_by.push_back(other->id);
                x->status = EvidenceStatus::Corroborated;
                if (x->pre_clamp_confidence && *x->pre_clamp_confidence > 0.0)
                    x->confidence = score_evidence(*x->pre_clamp_confidence, x->tier, true,
                                                   x->direct_answer, 1.0, scoring);
            }
        }
    }
}

inline ToolResult failed_result(const ToolRequest& request, const std::string& reason) {
    ToolResult r;
    r.request = request;
    r.ok = false;
    r.error = reason;
    return r;
}

}  // namespace detail

// ---- agent tool selection -------------------------------------------------------

/// Asks the backend to pick tools for the next round. Proposals are restricted
/// to the step catalog (unknown names dropped with a warning) and truncated to
/// max_per_round; a malformed response yields an empty proposal.
inline std::vector<ToolRequest> propose_tools(const LoopState& state, const RecordingChat& backend,
                                              const std::vector<ToolSpec>& step_catalog,
                                              const LoopConfig& config,
                                              std::vector<std::string>* warnings = nullptr) {
    if (!backend.client) return {};
    std::string prompt = "Round " + std::to_string(state.round) +
                         " of evidence gathering.\nQuestion: " + state.question + "\nOptions:\n";
    for (size_t i = 0; i < state.choices.size(); ++i)
        prompt += std::string(1, static_cast<char>('A' + i)) + ". " + state.choices[i] + "\n";
    prompt += "Current evidence:\n";
    for (const auto& item : state.evidence) {
        char meta[128];
        std::snprintf(meta, sizeof meta, "conf %.2f, rel %.2f", item.confidence, item.relevance);
        prompt += "- [" + item.id + "|" + to_string(item.tier) + "|" + to_string(item.status) +
                  "|" + meta + "] " + item.claim + "\n";
    }
    prompt += "Available tools:\n";
    for (const auto& spec : step_catalog)
        prompt += "- " + spec.name + " (" + to_string(spec.scope) + ", " + to_string(spec.tier) +
                  (spec.music_only ? ", music" : "") + ")\n";
    prompt += "Propose up to " + std::to_string(config.max_per_round) +
              " tool calls that would raise confidence or settle conflicts, as a JSON list of "
              "{\"tool\", \"start_s\", \"end_s\", \"params\"} (start_s/end_s optional). Propose "
              "an empty list if no tool would help.\n";

    ChatRequest request;
    request.endpoint_id = "reasoner";
    request.messages = {{"system", "You select acoustic analysis tools.", {}}, {"user", prompt, {}}};
    auto response = backend.try_complete(request);
    if (!response) return {};

    auto open = response->find('[');
    auto close = response->rfind(']');
    if (open == std::string::npos || close == std::string::npos || close <= open) return {};
    json arr = json::parse(response->substr(open, close - open + 1), nullptr, false);
    if (!arr.is_array()) return {};

    std::vector<ToolRequest> proposals;
    for (const auto& entry : arr) {
        if (!entry.is_object() || !entry.contains("tool")) continue;
        std::string name = entry.value("tool", "");
        auto spec = std::find_if(step_catalog.begin(), step_catalog.end(),
                                 [&](const ToolSpec& s) { return s.name == name; });
        if (spec == step_catalog.end()) {
            if (warnings) warnings->push_back("dropped out-of-catalog tool proposal: " + name);
            continue;
        }
        ToolRequest req;
        req.tool = name;
        req.audio = state.audio;
        req.params = entry.value("params", json::object());
        if (entry.contains("start_s") && entry.contains("end_s")) {
            double a = entry.value("start_s", 0.0);
            double b = entry.value("end_s", 0.0);
            if (a >= 0 && a < b) req.time_range = TimeRange{a, std::min(b, state.duration_s)};
        }
        if (spec->scope == ToolScope::SegmentLevel && !req.time_range) {
            if (warnings)
                warnings->push_back("dropped segment-level proposal without time range: " + name);
            continue;
        }
        proposals.push_back(std::move(req));
        if (static_cast<int>(proposals.size()) >= config.max_per_round) break;
    }
    return proposals;
}

// ---- step 1 ---------------------------------------------------------------------

/// Evidence gathering: propose -> invoke (skipping duplicates) -> rescore, for
/// up to 3 rounds, then the three contradiction stages on the combined
/// evidence. Backend and tool failures are recorded and the loop continues.
inline void run_step1(LoopState& state, const RecordingChat& backend, ToolClient* tools,
                      const ToolCatalog& catalog, const ScoringConfig& scoring,
                      const LoopConfig& config = {},
                      const ContradictionConfig& contradiction_config = {}) {
    if (state.step != LoopStep::Step1) throw InvalidInput("run_step1: state is not in Step1");
    auto step_catalog = tools_for_step(catalog, VerificationStep::Step1, state.content);

    while (state.round < config.step1_rounds) {
        ++state.round;
        RoundRecord rec;
        rec.step = LoopStep::Step1;
        rec.round = state.round;
        rec.proposed = propose_tools(state, backend, step_catalog, config, &rec.warnings);

        int invoked_now = 0;
        for (const auto& req : rec.proposed) {
            std::string digest = tool_digest(req);
            if (state.invoked.count(digest)) {
                rec.skipped_duplicates.push_back(req.tool);
                continue;
            }
            state.invoked.insert(digest);
            ++invoked_now;
            ToolResult result;
            try {
                result = tools ? tools->invoke(req)
                               : detail::failed_result(req, "no tool backend configured");
            } catch (const BackendError& e) {
                result = detail::failed_result(req, e.what());
            }
            if (result.ok) {
                const ToolSpec* spec = catalog.find(req.tool);
                result = cap_tool_confidence(result, *spec, state.content, scoring);
                state.evidence.push_back(detail::make_tool_item(result, *spec, state.question,
                                                                state.choices,
                                                                state.tool_results.size(), scoring));
            }
            state.tool_results.push_back(result);
            rec.results.push_back(state.tool_results.back());
        }
        detail::rescore_tool_corroboration(state, scoring);

        if (invoked_now == 0) {
            rec.stop_reason = StopReason::NoNewTools;
        } else if (detail::loop_sufficient(state, scoring, config)) {
            rec.stop_reason = StopReason::ConfidenceSufficient;
        } else if (state.round >= config.step1_rounds) {
            rec.stop_reason = StopReason::RoundLimit;
        }
        bool stop = rec.stop_reason.has_value();
        state.rounds.push_back(std::move(rec));
        if (stop) break;
    }

    state.evidence = stage1_keyword_reclassify(state.evidence, state.tool_results, catalog, scoring,
                                               contradiction_config);
    state.risk_assessments =
        stage2_risk_assessment(state.evidence, state.tool_results, contradiction_config);
    apply_risk(state.evidence, state.risk_assessments);
    for (auto& c : stage3_detect(state.evidence, backend, scoring))
        state.contradictions.push_back(std::move(c));

    state.step = LoopStep::Step2;
    state.round = 0;
}

// ---- step 2 ---------------------------------------------------------------------

namespace detail {

inline bool claims_agree(const std::string& result_summary, const std::string& claim) {
    if (text::conflicting(result_summary, claim)) return false;
    auto qa = text::quantities(result_summary);
    auto qb = text::quantities(claim);
    for (const auto& [head, va] : qa) {
        auto it = qb.find(head);
        if (it == qb.end()) continue;
        for (double x : va)
            if (it->second.count(x)) return true;
    }
    return text::claim_similarity(result_summary, claim) >= 0.4;
}

struct ConflictRef {
    std::vector<std::string>* item_ids = nullptr;
    bool* resolved = nullptr;
    std::string* resolved_against = nullptr;
    std::string* note = nullptr;
};

inline std::optional<ConflictRef> find_conflict(LoopState& state, const std::string& id) {
    for (auto& c : state.contradictions)
        if (c.id == id) return ConflictRef{&c.item_ids, &c.resolved, &c.resolved_against,
                                           &c.description};
    for (auto& d : state.disagreements)
        if (d.id == id)
            return ConflictRef{&d.item_ids, &d.resolved, &d.resolved_against, &d.credibility_note};
    return std::nullopt;
}

inline EvidenceItem* find_item_mut(std::vector<EvidenceItem>& items, const std::string& id) {
    for (auto& it : items)
        if (it.id == id) return &it;
    return nullptr;
}

/// A targeted result resolves a conflict when it sides with exactly one
/// claimant and its capped confidence exceeds both claimants' confidences.
inline void try_resolve(LoopState& state, const ConflictRef& conflict, const ToolResult& result,
                        const ToolSpec& spec, const ScoringConfig& scoring) {
    if (*conflict.resolved || conflict.item_ids->size() < 2) return;
    EvidenceItem* a = find_item_mut(state.evidence, (*conflict.item_ids)[0]);
    EvidenceItem* b = find_item_mut(state.evidence, (*conflict.item_ids)[1]);
    if (!a || !b) return;
    if (result.capped_confidence <= a->confidence || result.capped_confidence <= b->confidence)
        return;
    std::string summary = result.summary();
    bool with_a = claims_agree(summary, a->claim);
    bool with_b = claims_agree(summary, b->claim);
    if (with_a == with_b) return;  // sided with neither or both
    EvidenceItem* winner = with_a ? a : b;
    EvidenceItem* loser = with_a ? b : a;
    *conflict.resolved = true;
    *conflict.resolved_against = loser->id;
    *conflict.note += " [resolved by " + spec.name + " in favor of " + winner->id + "]";
    winner->status = EvidenceStatus::Corroborated;
    winner->corroborated_by.push_back("t" + std::to_string(state.tool_results.size() - 1));
    winner->risk = RiskLevel::Low;
    if (winner->origin.is_lalm())
        winner->confidence = std::min(scoring.lalm_hard_cap,
                                      winner->confidence * scoring.corroboration_multiplier);
}

inline TimeRange widen(const TimeRange& r, double pad, double duration_s) {
    return {std::max(0.0, r.start_s - pad), std::min(duration_s, r.end_s + pad)};
}

}  // namespace detail

/// Targeted validation: executes hypothesis tool calls in at most 2 rounds,
/// re-examining only still-unresolved conflicts in round 2 with a wider
/// window. Conflicts that survive both rounds stay open for argumentation.
inline void run_step2(LoopState& state, const std::vector<VerificationHypothesis>& hypotheses,
                      ToolClient* tools, const ToolCatalog& catalog, const ScoringConfig& scoring,
                      const LoopConfig& config = {}) {
    if (state.step != LoopStep::Step2) throw InvalidInput("run_step2: state is not in Step2");

    auto pending = [&]() {
        std::vector<const VerificationHypothesis*> out;
        for (const auto& h : hypotheses) {
            if (h.unverifiable || h.tool_calls.empty()) continue;
            auto conflict = detail::find_conflict(state, h.contradiction_id);
            if (conflict && !*conflict->resolved) out.push_back(&h);
        }
        return out;
    };

    if (pending().empty()) {
        RoundRecord rec;
        rec.step = LoopStep::Step2;
        rec.round = 0;
        rec.stop_reason = StopReason::AllHypothesesChecked;
        state.rounds.push_back(std::move(rec));
        state.step = LoopStep::Done;
        return;
    }

    while (state.round < config.step2_rounds) {
        ++state.round;
        RoundRecord rec;
        rec.step = LoopStep::Step2;
        rec.round = state.round;

        for (const auto* h : pending()) {
            for (ToolRequest req : h->tool_calls) {
                if (state.round > 1 && req.time_range)
                    req.time_range = detail::widen(*req.time_range,
                                                   config.retry_pad_s - config.hypothesis_pad_s,
                                                   state.duration_s);
                rec.proposed.push_back(req);
                std::string digest = tool_digest(req);
                if (state.invoked.count(digest)) {
                    rec.skipped_duplicates.push_back(req.tool);
                    continue;
                }
                state.invoked.insert(digest);
                ToolResult result;
                try {
                    result = tools ? tools->invoke(req)
                                   : detail::failed_result(req, "no tool backend configured");
                } catch (const BackendError& e) {
                    result = detail::failed_result(req, e.what());
                }
                const ToolSpec* spec = catalog.find(req.tool);
                if (result.ok && spec) {
                    result = cap_tool_confidence(result, *spec, state.content, scoring);
                    state.evidence.push_back(
                        detail::make_tool_item(result, *spec, state.question, state.choices,
                                               state.tool_results.size(), scoring));
                }
                state.tool_results.push_back(result);
                rec.results.push_back(state.tool_results.back());
                if (result.ok && spec) {
                    auto conflict = detail::find_conflict(state, h->contradiction_id);
                    if (conflict) detail::try_resolve(state, *conflict, result, *spec, scoring);
                }
            }
        }

        if (pending().empty())
            rec.stop_reason = StopReason::AllHypothesesChecked;
        else if (state.round >= config.step2_rounds)
            rec.stop_reason = StopReason::RoundLimit;
        bool stop = rec.stop_reason.has_value();
        state.rounds.push_back(std::move(rec));
        if (stop) break;
    }
    state.step = LoopStep::Done;
}

// ---- json -----------------------------------------------------------------------

inline void to_json(json& j, const RoundRecord& r) {
    j = json{{"step", to_string(r.step)},
             {"round", r.round},
             {"proposed", r.proposed},
             {"results", r.results},
             {"skipped_duplicates", r.skipped_duplicates},
             {"warnings", r.warnings}};
    if (r.stop_reason) j["stop_reason"] = to_string(*r.stop_reason);
}

inline void from_json(const json& j, RoundRecord& r) {
    std::string step = j.value("step", "step1");
    r.step = step == "step1" ? LoopStep::Step1 : step == "step2" ? LoopStep::Step2 : LoopStep::Done;
    r.round = j.value("round", 0);
    r.proposed = j.value("proposed", std::vector<ToolRequest>{});
    r.results = j.value("results", std::vector<ToolResult>{});
    r.skipped_duplicates = j.value("skipped_duplicates", std::vector<std::string>{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("stop_reason"))
        r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
}

}  // namespace fusewire
