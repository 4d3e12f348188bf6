// SPDX-License-Identifier: Apache-2.0
#pragma once

// Domain types for observations and evidence, plus the reliability-tier
// scoring arithmetic every other module consumes. Scoring is pure; all types
// are immutable values once constructed.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/errors.hpp"
#include "fusewire/textutil.hpp"

namespace fusewire {

using json = nlohmann::json;

// Ordered by reproducibility: Analytic > Probabilistic > Heuristic > Lalm.
enum class ReliabilityTier { Lalm = 0, Heuristic = 1, Probabilistic = 2, Analytic = 3 };

inline bool outranks(ReliabilityTier a, ReliabilityTier b) {
    return static_cast<int>(a) > static_cast<int>(b);
}

/// Analytic and Probabilistic outputs are reproducible measurements; Heuristic
/// and LALM outputs are not.
inline bool is_reproducible(ReliabilityTier t) {
    return t == ReliabilityTier::Analytic || t == ReliabilityTier::Probabilistic;
}

inline const char* to_string(ReliabilityTier t) {
    switch (t) {
        case ReliabilityTier::Analytic: return "analytic";
        case ReliabilityTier::Probabilistic: return "probabilistic";
        case ReliabilityTier::Heuristic: return "heuristic";
        case ReliabilityTier::Lalm: return "lalm";
    }
    return "lalm";
}

inline ReliabilityTier tier_from_string(const std::string& s) {
    if (s == "analytic") return ReliabilityTier::Analytic;
    if (s == "probabilistic") return ReliabilityTier::Probabilistic;
    if (s == "heuristic") return ReliabilityTier::Heuristic;
    if (s == "lalm") return ReliabilityTier::Lalm;
    throw ConfigError("unknown reliability tier: " + s);
}

enum class ContentType { Speech, Music, Mixed, Environmental };

inline const char* to_string(ContentType c) {
    switch (c) {
        case ContentType::Speech: return "speech";
        case ContentType::Music: return "music";
        case ContentType::Mixed: return "mixed";
        case ContentType::Environmental: return "environmental";
    }
    return "mixed";
}

inline ContentType content_from_string(const std::string& s) {
    if (s == "speech") return ContentType::Speech;
    if (s == "music") return ContentType::Music;
    if (s == "mixed") return ContentType::Mixed;
    if (s == "environmental") return ContentType::Environmental;
    throw ConfigError("unknown content type: " + s);
}

/// Per-tier confidence cap, evidence weight and base confidence.
struct TierPolicy {
    ReliabilityTier tier = ReliabilityTier::Lalm;
    double cap = 0.70;
    double weight = 0.40;
    double base = 0.45;
};

/// All scoring knobs. Defaults reflect the tier table; values are
/// configuration, not learned.
struct ScoringConfig {
    double corroboration_multiplier = 1.5;
    double direct_answer_bonus = 1.3;
    double lalm_hard_cap = 0.70;
    double keyword_adjust = 0.15;
    double out_of_domain_factor = 0.6;
    std::map<ReliabilityTier, TierPolicy> tiers;

    static ScoringConfig defaults() {
        ScoringConfig c;
        c.tiers[ReliabilityTier::Analytic] = {ReliabilityTier::Analytic, 0.90, 1.0, 0.60};
        c.tiers[ReliabilityTier::Probabilistic] = {ReliabilityTier::Probabilistic, 0.75, 0.75, 0.50};
        c.tiers[ReliabilityTier::Heuristic] = {ReliabilityTier::Heuristic, 0.60, 0.50, 0.40};
        c.tiers[ReliabilityTier::Lalm] = {ReliabilityTier::Lalm, 0.70, 0.40, 0.45};
        return c;
    }

    void validate() const {
        if (corroboration_multiplier < 1.0 || direct_answer_bonus < 1.0)
            throw ConfigError("scoring multipliers must be >= 1");
        for (const auto& [tier, p] : tiers) {
            if (p.cap <= 0.0 || p.cap > 1.0) throw ConfigError("tier cap must be in (0,1]");
            if (p.base <= 0.0 || p.base > p.cap) throw ConfigError("tier base must be in (0, cap]");
            if (p.weight < 0.0 || p.weight > 1.0) throw ConfigError("tier weight must be in [0,1]");
        }
        auto it = tiers.find(ReliabilityTier::Lalm);
        if (it == tiers.end() || std::abs(it->second.cap - lalm_hard_cap) > 1e-12)
            throw ConfigError("lalm_hard_cap must equal the Lalm tier cap");
    }
};

/// Full audio or one of the three equal-duration segments.
struct AudioScope {
    bool full = true;
    int index = 0;
    double start_s = 0.0;
    double end_s = 0.0;

    static AudioScope full_audio() { return {}; }
    static AudioScope segment(int index, double start_s, double end_s) {
        if (start_s < 0 || start_s >= end_s)
            throw InvalidInput("segment scope requires 0 <= start < end");
        return {false, index, start_s, end_s};
    }
};

/// One claim reported by a source model. tentative_prediction is analytics-only
/// and is stripped before any evidence reaches argumentation.
struct Observation {
    std::string id;
    std::string source;
    AudioScope scope;
    std::string claim;
    std::set<std::string> tags;
    std::optional<std::string> tentative_prediction;
};

enum class EvidenceStatus { Corroborated, SourceSpecific, Disagreement };

inline const char* to_string(EvidenceStatus s) {
    switch (s) {
        case EvidenceStatus::Corroborated: return "corroborated";
        case EvidenceStatus::SourceSpecific: return "source_specific";
        case EvidenceStatus::Disagreement: return "disagreement";
    }
    return "source_specific";
}

inline EvidenceStatus status_from_string(const std::string& s) {
    if (s == "corroborated") return EvidenceStatus::Corroborated;
    if (s == "source_specific") return EvidenceStatus::SourceSpecific;
    if (s == "disagreement") return EvidenceStatus::Disagreement;
    throw ConfigError("unknown evidence status: " + s);
}

enum class RiskLevel { Low, Medium, High, SegmentationArtifact, Speculative };

inline const char* to_string(RiskLevel r) {
    switch (r) {
        case RiskLevel::Low: return "low";
        case RiskLevel::Medium: return "medium";
        case RiskLevel::High: return "high";
        case RiskLevel::SegmentationArtifact: return "segmentation_artifact";
        case RiskLevel::Speculative: return "speculative";
    }
    return "low";
}

inline RiskLevel risk_from_string(const std::string& s) {
    if (s == "low") return RiskLevel::Low;
    if (s == "medium") return RiskLevel::Medium;
    if (s == "high") return RiskLevel::High;
    if (s == "segmentation_artifact") return RiskLevel::SegmentationArtifact;
    if (s == "speculative") return RiskLevel::Speculative;
    throw ConfigError("unknown risk level: " + s);
}

struct EvidenceOrigin {
    enum class Kind { LalmObservation, ToolMeasurement };
    Kind kind = Kind::LalmObservation;
    std::string name;  // source model id or tool name

    static EvidenceOrigin lalm(std::string source) {
        return {Kind::LalmObservation, std::move(source)};
    }
    static EvidenceOrigin tool(std::string tool_name) {
        return {Kind::ToolMeasurement, std::move(tool_name)};
    }
    bool is_lalm() const { return kind == Kind::LalmObservation; }
};

/// The unit everything downstream weighs. Confidence and relevance vary
/// independently; confidence never exceeds the tier cap, and Lalm-origin items
/// never exceed the 0.70 hard cap.
struct EvidenceItem {
    std::string id;
    EvidenceOrigin origin;
    std::string claim;
    ReliabilityTier tier = ReliabilityTier::Lalm;
    EvidenceStatus status = EvidenceStatus::SourceSpecific;
    double confidence = 0.0;
    double relevance = 0.0;
    RiskLevel risk = RiskLevel::Low;
    std::vector<std::string> corroborated_by;
    bool direct_answer = false;
    double domain_factor = 1.0;

    // implementation extras, serialized for analysis
    std::optional<std::pair<double, double>> time_range;  // seconds, when scoped
    std::optional<double> pre_clamp_confidence;           // status confidence before the Lalm cap
    double keyword_adjustment = 0.0;                      // net stage-1 adjustment applied
};

// ---- operations -----------------------------------------------------------

inline const TierPolicy& tier_policy(ReliabilityTier tier, const ScoringConfig& config) {
    auto it = config.tiers.find(tier);
    if (it == config.tiers.end())
        throw ConfigError(std::string("no policy configured for tier ") + to_string(tier));
    return it->second;
}

/// Tier-capped confidence: base x domain factor x corroboration and
/// direct-answer bonuses, clamped to the tier cap. Lalm output additionally
/// clamps to the hard cap regardless of bonuses.
inline double score_evidence(double base, ReliabilityTier tier, bool corroborated,
                             bool direct_answer, double domain_factor,
                             const ScoringConfig& config) {
    const TierPolicy& policy = tier_policy(tier, config);
    if (base <= 0.0 || base > policy.cap + 1e-12)
        throw InvalidInput("score_evidence: base must be in (0, tier cap]");
    if (domain_factor <= 0.0 || domain_factor > 1.0)
        throw InvalidInput("score_evidence: domain_factor must be in (0, 1]");
    double score = base * domain_factor;
    if (corroborated) score *= config.corroboration_multiplier;
    if (direct_answer) score *= config.direct_answer_bonus;
    score = std::min(score, policy.cap);
    if (tier == ReliabilityTier::Lalm) score = std::min(score, config.lalm_hard_cap);
    return score;
}

/// tier weight x confidence x relevance. The tier weight is what makes an
/// analytic measurement outweigh an equally confident LALM claim.
inline double evidence_weight(const EvidenceItem& item, const ScoringConfig& config) {
    return tier_policy(item.tier, config).weight * item.confidence * item.relevance;
}

/// 1.0 in-domain; Mixed content counts as in-domain for speech and music
/// tools; everything else takes the out-of-domain factor.
inline double domain_factor(const std::set<ContentType>& tool_domains, ContentType content,
                            const ScoringConfig& config = ScoringConfig::defaults()) {
    if (tool_domains.empty()) throw InvalidInput("domain_factor: tool_domains must be non-empty");
    if (tool_domains.count(content)) return 1.0;
    if (content == ContentType::Mixed &&
        (tool_domains.count(ContentType::Speech) || tool_domains.count(ContentType::Music)))
        return 1.0;
    return config.out_of_domain_factor;
}

// ---- json -----------------------------------------------------------------

inline void to_json(json& j, const AudioScope& s) {
    if (s.full) {
        j = json{{"kind", "full"}};
    } else {
        j = json{{"kind", "segment"},
                 {"index", s.index},
                 {"start_s", text::round4(s.start_s)},
                 {"end_s", text::round4(s.end_s)}};
    }
}

inline void from_json(const json& j, AudioScope& s) {
    if (j.value("kind", "full") == "full") {
        s = AudioScope::full_audio();
    } else {
        s = AudioScope::segment(j.value("index", 0), j.at("start_s").get<double>(),
                                j.at("end_s").get<double>());
    }
}

inline void to_json(json& j, const Observation& o) {
    j = json{{"id", o.id},
             {"source", o.source},
             {"scope", o.scope},
             {"claim", o.claim},
             {"tags", o.tags}};
    if (o.tentative_prediction) j["tentative_prediction"] = *o.tentative_prediction;
}

inline void from_json(const json& j, Observation& o) {
    o.id = j.at("id").get<std::string>();
    o.source = j.at("source").get<std::string>();
    o.scope = j.at("scope").get<AudioScope>();
    o.claim = j.at("claim").get<std::string>();
    o.tags = j.value("tags", std::set<std::string>{});
    if (j.contains("tentative_prediction"))
        o.tentative_prediction = j.at("tentative_prediction").get<std::string>();
}

inline void to_json(json& j, const EvidenceOrigin& o) {
    j = json{{"kind", o.is_lalm() ? "lalm_observation" : "tool_measurement"}, {"name", o.name}};
}

inline void from_json(const json& j, EvidenceOrigin& o) {
    o.kind = j.value("kind", "lalm_observation") == "tool_measurement"
                 ? EvidenceOrigin::Kind::ToolMeasurement
                 : EvidenceOrigin::Kind::LalmObservation;
    o.name = j.value("name", "");
}

inline void to_json(json& j, const EvidenceItem& e) {
    j = json{{"id", e.id},
             {"origin", e.origin},
             {"claim", e.claim},
             {"tier", to_string(e.tier)},
             {"status", to_string(e.status)},
             {"confidence", text::round4(e.confidence)},
             {"relevance", text::round4(e.relevance)},
             {"risk", to_string(e.risk)},
             {"corroborated_by", e.corroborated_by},
             {"direct_answer", e.direct_answer},
             {"domain_factor", text::round4(e.domain_factor)}};
    if (e.time_range)
        j["time_range"] = {text::round4(e.time_range->first), text::round4(e.time_range->second)};
    if (e.pre_clamp_confidence) j["pre_clamp_confidence"] = text::round4(*e.pre_clamp_confidence);
    if (e.keyword_adjustment != 0.0) j["keyword_adjustment"] = text::round4(e.keyword_adjustment);
}

inline void from_json(const json& j, EvidenceItem& e) {
    e.id = j.at("id").get<std::string>();
    e.origin = j.at("origin").get<EvidenceOrigin>();
    e.claim = j.at("claim").get<std::string>();
    e.tier = tier_from_string(j.at("tier").get<std::string>());
    e.status = status_from_string(j.at("status").get<std::string>());
    e.confidence = j.at("confidence").get<double>();
    e.relevance = j.at("relevance").get<double>();
    e.risk = risk_from_string(j.at("risk").get<std::string>());
    e.corroborated_by = j.value("corroborated_by", std::vector<std::string>{});
    e.direct_answer = j.value("direct_answer", false);
    e.domain_factor = j.value("domain_factor", 1.0);
    if (j.contains("time_range")) {
        auto arr = j.at("time_range");
        e.time_range = std::make_pair(arr.at(0).get<double>(), arr.at(1).get<double>());
    }
    if (j.contains("pre_clamp_confidence"))
        e.pre_clamp_confidence = j.at("pre_clamp_confidence").get<double>();
    e.keyword_adjustment = j.value("keyword_adjustment", 0.0);
}

inline void to_json(json& j, const TierPolicy& p) {
    j = json{{"cap", p.cap}, {"weight", p.weight}, {"base", p.base}};
}

inline void to_json(json& j, const ScoringConfig& c) {
    json tiers = json::object();
    for (const auto& [tier, policy] : c.tiers) tiers[to_string(tier)] = policy;
    j = json{{"corroboration_multiplier", c.corroboration_multiplier},
             {"direct_answer_bonus", c.direct_answer_bonus},
             {"lalm_hard_cap", c.lalm_hard_cap},
             {"keyword_adjust", c.keyword_adjust},
             {"out_of_domain_factor", c.out_of_domain_factor},
             {"tiers", tiers}};
}

/// Absent keys keep their defaults, so a partial config file is valid.
inline void from_json(const json& j, ScoringConfig& c) {
    c = ScoringConfig::defaults();
    c.corroboration_multiplier = j.value("corroboration_multiplier", c.corroboration_multiplier);
    c.direct_answer_bonus = j.value("direct_answer_bonus", c.direct_answer_bonus);
    c.lalm_hard_cap = j.value("lalm_hard_cap", c.lalm_hard_cap);
    c.keyword_adjust = j.value("keyword_adjust", c.keyword_adjust);
    c.out_of_domain_factor = j.value("out_of_domain_factor", c.out_of_domain_factor);
    if (j.contains("tiers")) {
        for (const auto& [key, val] : j.at("tiers").items()) {
            ReliabilityTier tier = tier_from_string(key);
            TierPolicy& p = c.tiers[tier];
            p.tier = tier;
            p.cap = val.value("cap", p.cap);
            p.weight = val.value("weight", p.weight);
            p.base = val.value("base", p.base);
        }
    }
    c.validate();
}

}  // namespace fusewire
