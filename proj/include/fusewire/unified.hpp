// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cross-source corroboration: classifies every observation as corroborated,
// source-specific or disagreement and assigns status-banded confidences. One
// backend call per sample; a deterministic lexical fallback guarantees the
// pipeline never stalls on a malformed response.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/backends.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/intake.hpp"
#include "fusewire/textutil.hpp"

namespace fusewire {

enum class AgreementLevel { Unanimous, Majority, Conflicting };

inline const char* to_string(AgreementLevel a) {
    switch (a) {
        case AgreementLevel::Unanimous: return "unanimous";
        case AgreementLevel::Majority: return "majority";
        case AgreementLevel::Conflicting: return "conflicting";
    }
    return "conflicting";
}

inline AgreementLevel agreement_from_string(const std::string& s) {
    if (s == "unanimous") return AgreementLevel::Unanimous;
    if (s == "majority") return AgreementLevel::Majority;
    if (s == "conflicting") return AgreementLevel::Conflicting;
    throw ConfigError("unknown agreement level: " + s);
}

struct Disagreement {
    std::string id;
    std::vector<std::string> item_ids;  // >= 2 conflicting items
    std::string topic;
    std::string credibility_note;
    bool resolved = false;
    std::string resolved_against;  // losing item id when targeted validation sided
};

struct UnifiedAnalysis {
    std::vector<EvidenceItem> items;
    std::vector<Disagreement> disagreements;
    AgreementLevel agreement = AgreementLevel::Conflicting;
    std::vector<std::string> range_clamped;  // item ids whose backend confidence was out of band
};

struct ConfidenceBand {
    double lo = 0.0;
    double hi = 1.0;
    double mid() const { return (lo + hi) / 2.0; }
    double clamp(double v) const { return std::min(hi, std::max(lo, v)); }
    bool contains(double v) const { return v >= lo - 1e-9 && v <= hi + 1e-9; }
};

struct UnifiedConfig {
    double match_threshold = 0.5;   // claim similarity at or above pairs two observations
    double direct_overlap = 0.5;    // claim/choice similarity marking a direct answer
    ConfidenceBand corroborated{0.80, 0.95};
    ConfidenceBand source_specific{0.50, 0.70};
    ConfidenceBand disagreement{0.20, 0.50};

    const ConfidenceBand& band(EvidenceStatus s) const {
        switch (s) {
            case EvidenceStatus::Corroborated: return corroborated;
            case EvidenceStatus::SourceSpecific: return source_specific;
            case EvidenceStatus::Disagreement: return disagreement;
        }
        return source_specific;
    }
};

namespace detail {

/// Lalm item confidence: status confidence (pre-clamp, recorded), times the
/// segment-corroboration and direct-answer bonuses, then the 0.70 hard cap.
inline EvidenceItem make_lalm_item(const Observation& obs, EvidenceStatus status,
                                   double status_confidence, bool segment_corroborated,
                                   const std::string& question,
                                   const std::vector<std::string>& choices,
                                   const ScoringConfig& scoring, const UnifiedConfig& config) {
    EvidenceItem item;
    item.id = obs.id;
    item.origin = EvidenceOrigin::lalm(obs.source);
    item.claim = obs.claim;
    item.tier = ReliabilityTier::Lalm;
    item.status = status;
    item.relevance = text::lexical_relevance(obs.claim, question, choices);
    for (const auto& c : choices) {
        if (text::claim_similarity(obs.claim, c) >= config.direct_overlap) {
            item.direct_answer = true;
            break;
        }
    }
    if (!obs.scope.full) item.time_range = std::make_pair(obs.scope.start_s, obs.scope.end_s);

    double conf = status_confidence;
    if (segment_corroborated) conf *= scoring.corroboration_multiplier;
    if (item.direct_answer) conf *= scoring.direct_answer_bonus;
    item.pre_clamp_confidence = status_confidence;
    item.confidence = std::min(conf, scoring.lalm_hard_cap);
    return item;
}

struct Pair {
    size_t a = 0;
    size_t b = 0;
    double similarity = 0.0;
};

/// Greedy one-to-one matching, deterministic and symmetric in the two reports.
inline std::vector<Pair> match_observations(const std::vector<Observation>& a,
                                            const std::vector<Observation>& b,
                                            double threshold) {
    std::vector<Pair> candidates;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) {
            double s = text::claim_similarity(a[i].claim, b[j].claim);
            if (s >= threshold) candidates.push_back({i, j, s});
        }
    std::sort(candidates.begin(), candidates.end(), [&](const Pair& x, const Pair& y) {
        if (x.similarity != y.similarity) return x.similarity > y.similarity;
        auto xk = std::minmax(a[x.a].id, b[x.b].id);
        auto yk = std::minmax(a[y.a].id, b[y.b].id);
        return xk < yk;
    });
    std::vector<Pair> chosen;
    std::set<size_t> used_a, used_b;
    for (const auto& c : candidates) {
        if (used_a.count(c.a) || used_b.count(c.b)) continue;
        used_a.insert(c.a);
        used_b.insert(c.b);
        chosen.push_back(c);
    }
    return chosen;
}

inline std::string disagreement_topic(const std::string& claim_a, const std::string& claim_b) {
    auto qa = text::quantities(claim_a);
    for (const auto& [head, va] : qa) {
        auto qb = text::quantities(claim_b);
        if (qb.count(head)) return head;
    }
    auto ca = text::content_words(claim_a);
    auto cb = text::content_words(claim_b);
    for (const auto& w : ca)
        if (cb.count(w)) return w;
    return "claims";
}

}  // namespace detail

/// Backend response schema: JSON list of {claim, status, confidence, sources,
/// note}. Entries are matched back to observations lexically; anything the
/// backend missed falls through to the deterministic path.
inline UnifiedAnalysis corroborate_sources(const SourceReport& report_a,
                                           const SourceReport& report_b,
                                           const RecordingChat& backend,
                                           const std::string& question,
                                           const std::vector<std::string>& choices,
                                           const ScoringConfig& scoring,
                                           const UnifiedConfig& config = {}) {
    UnifiedAnalysis analysis;
    const auto& obs_a = report_a.observations;
    const auto& obs_b = report_b.observations;

    auto segment_corroborated = [&](const Observation& o) {
        return report_a.segment_corroborated_ids.count(o.id) > 0 ||
               report_b.segment_corroborated_ids.count(o.id) > 0;
    };

    // Status and status-band confidence per observation id; filled first from
    // the backend verdicts, then completed by the lexical fallback.
    std::map<std::string, std::pair<EvidenceStatus, double>> verdicts;
    std::map<std::string, std::string> verdict_notes;

    if (backend.client) {
        std::string prompt =
            "Corroborate the observations of two independent source models.\n"
            "Classify each claim as corroborated (both sources agree), source_specific "
            "(one source only) or disagreement (conflicting claims; add a credibility "
            "note).\nRespond with a JSON list of {\"claim\", \"status\", \"confidence\", "
            "\"sources\", \"note\"}.\n";
        if (!question.empty()) prompt += "Question: " + question + "\n";
        prompt += "Source " + report_a.source + ":\n";
        for (const auto& o : obs_a) prompt += "- " + o.claim + "\n";
        prompt += "Source " + report_b.source + ":\n";
        for (const auto& o : obs_b) prompt += "- " + o.claim + "\n";

        ChatRequest request;
        request.endpoint_id = "reasoner";
        request.messages = {{"system", "You are an evidence corroboration assistant.", {}},
                            {"user", prompt, {}}};
        if (auto response = backend.try_complete(request)) {
            auto open = response->find('[');
            auto close = response->rfind(']');
            if (open != std::string::npos && close != std::string::npos && close > open) {
                json arr = json::parse(response->substr(open, close - open + 1), nullptr, false);
                if (arr.is_array()) {
                    for (const auto& entry : arr) {
                        if (!entry.is_object() || !entry.contains("claim")) continue;
                        std::string claim = entry.value("claim", "");
                        std::string status_s = entry.value("status", "source_specific");
                        EvidenceStatus status = EvidenceStatus::SourceSpecific;
                        try {
                            status = status_from_string(status_s);
                        } catch (const ConfigError&) {
                            continue;
                        }
                        double conf = entry.value("confidence", config.band(status).mid());
                        // find the closest observation in either report
                        const Observation* best = nullptr;
                        double best_sim = 0.0;
                        for (const auto* pool : {&obs_a, &obs_b}) {
                            for (const auto& o : *pool) {
                                double s = text::claim_similarity(o.claim, claim);
                                if (s > best_sim) {
                                    best_sim = s;
                                    best = &o;
                                }
                            }
                        }
                        if (!best || best_sim < config.match_threshold) continue;
                        verdicts[best->id] = {status, conf};
                        if (entry.contains("note")) verdict_notes[best->id] = entry.value("note", "");
                    }
                }
            }
        }
    }

    auto pairs = detail::match_observations(obs_a, obs_b, config.match_threshold);
    std::set<std::string> paired_ids;

    auto status_confidence = [&](const Observation& o, EvidenceStatus fallback_status) {
        EvidenceStatus status = fallback_status;
        double conf = config.band(status).mid();
        if (auto it = verdicts.find(o.id); it != verdicts.end()) {
            // The lexical pairing decides *structure* (who pairs with whom);
            // the backend refines confidence and can flag a pair as
            // disagreement, but cannot turn a lone claim into a corroboration.
            if (it->second.first == EvidenceStatus::Disagreement ||
                it->second.first == fallback_status)
                status = it->second.first;
            conf = it->second.second;
        }
        const auto& band = config.band(status);
        if (!band.contains(conf)) {
            analysis.range_clamped.push_back(o.id);
            conf = band.clamp(conf);
        }
        return std::make_pair(status, conf);
    };

    int disagreement_counter = 0;
    for (const auto& p : pairs) {
        const Observation& oa = obs_a[p.a];
        const Observation& ob = obs_b[p.b];
        paired_ids.insert(oa.id);
        paired_ids.insert(ob.id);

        bool conflict = text::conflicting(oa.claim, ob.claim);
        auto [status_a, conf_a] = status_confidence(oa, conflict ? EvidenceStatus::Disagreement
                                                                 : EvidenceStatus::Corroborated);
        auto [status_b, conf_b] = status_confidence(ob, conflict ? EvidenceStatus::Disagreement
                                                                 : EvidenceStatus::Corroborated);
        conflict = conflict || status_a == EvidenceStatus::Disagreement ||
                   status_b == EvidenceStatus::Disagreement;

        if (!conflict) {
            // one item represents the pair; canonical primary keeps symmetry
            const Observation& primary = oa.id <= ob.id ? oa : ob;
            const Observation& partner = oa.id <= ob.id ? ob : oa;
            auto item = detail::make_lalm_item(primary, EvidenceStatus::Corroborated, conf_a,
                                               segment_corroborated(primary) ||
                                                   segment_corroborated(partner),
                                               question, choices, scoring, config);
            item.corroborated_by.push_back(partner.id);
            analysis.items.push_back(std::move(item));
        } else {
            std::string topic = detail::disagreement_topic(oa.claim, ob.claim);
            std::string note = verdict_notes.count(oa.id) ? verdict_notes[oa.id]
                               : verdict_notes.count(ob.id)
                                   ? verdict_notes[ob.id]
                                   : "conflicting claims about " + topic +
                                         "; both sources are LALM tier, neither is "
                                         "independently reproducible";
            auto item_a = detail::make_lalm_item(oa, EvidenceStatus::Disagreement,
                                                 config.disagreement.clamp(conf_a),
                                                 segment_corroborated(oa), question, choices,
                                                 scoring, config);
            auto item_b = detail::make_lalm_item(ob, EvidenceStatus::Disagreement,
                                                 config.disagreement.clamp(conf_b),
                                                 segment_corroborated(ob), question, choices,
                                                 scoring, config);
            Disagreement d;
            d.id = "d" + std::to_string(disagreement_counter++);
            d.item_ids = {std::min(oa.id, ob.id), std::max(oa.id, ob.id)};
            d.topic = topic;
            d.credibility_note = note;
            analysis.items.push_back(std::move(item_a));
            analysis.items.push_back(std::move(item_b));
            analysis.disagreements.push_back(std::move(d));
        }
    }

    for (const auto* pool : {&obs_a, &obs_b}) {
        for (const auto& o : *pool) {
            if (paired_ids.count(o.id)) continue;
            auto [status, conf] = status_confidence(o, EvidenceStatus::SourceSpecific);
            if (status == EvidenceStatus::Disagreement) status = EvidenceStatus::SourceSpecific;
            analysis.items.push_back(detail::make_lalm_item(o, status,
                                                            config.band(status).clamp(conf),
                                                            segment_corroborated(o), question,
                                                            choices, scoring, config));
        }
    }

    // canonical order regardless of argument order
    std::sort(analysis.items.begin(), analysis.items.end(),
              [](const EvidenceItem& x, const EvidenceItem& y) { return x.id < y.id; });
    analysis.agreement = AgreementLevel::Conflicting;  // set by agreement_level below
    std::sort(analysis.range_clamped.begin(), analysis.range_clamped.end());
    analysis.range_clamped.erase(
        std::unique(analysis.range_clamped.begin(), analysis.range_clamped.end()),
        analysis.range_clamped.end());
    return analysis;
}

/// Over the up-to-8 per-query tentative predictions: all identical ->
/// Unanimous; a strict majority for one choice -> Majority; otherwise (or with
/// nothing recorded) -> Conflicting.
inline AgreementLevel agreement_level(const SourceReport& a, const SourceReport& b) {
    std::vector<std::string> predictions;
    for (const auto* r : {&a, &b})
        for (const auto& p : r->tentative_predictions)
            if (p) predictions.push_back(*p);
    if (predictions.empty()) return AgreementLevel::Conflicting;
    std::map<std::string, size_t> counts;
    for (const auto& p : predictions) counts[p]++;
    size_t best = 0;
    for (const auto& [label, n] : counts) best = std::max(best, n);
    if (best == predictions.size()) return AgreementLevel::Unanimous;
    if (best * 2 > predictions.size()) return AgreementLevel::Majority;
    return AgreementLevel::Conflicting;
}

// ---- json -------------------------------------------------------------------

inline void to_json(json& j, const Disagreement& d) {
    j = json{{"id", d.id},
             {"item_ids", d.item_ids},
             {"topic", d.topic},
             {"credibility_note", d.credibility_note},
             {"resolved", d.resolved}};
    if (!d.resolved_against.empty()) j["resolved_against"] = d.resolved_against;
}

inline void from_json(const json& j, Disagreement& d) {
    d.id = j.value("id", "");
    d.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    d.topic = j.value("topic", "");
    d.credibility_note = j.value("credibility_note", "");
    d.resolved = j.value("resolved", false);
    d.resolved_against = j.value("resolved_against", "");
}

inline void to_json(json& j, const UnifiedAnalysis& u) {
    j = json{{"items", u.items},
             {"disagreements", u.disagreements},
             {"agreement", to_string(u.agreement)},
             {"range_clamped", u.range_clamped}};
}

inline void from_json(const json& j, UnifiedAnalysis& u) {
    u.items = j.value("items", std::vector<EvidenceItem>{});
    u.disagreements = j.value("disagreements", std::vector<Disagreement>{});
    u.agreement = agreement_from_string(j.value("agreement", "conflicting"));
    u.range_clamped = j.value("range_clamped", std::vector<std::string>{});
}

}  // namespace fusewire
