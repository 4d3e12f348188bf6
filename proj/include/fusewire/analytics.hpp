// SPDX-License-Identifier: Apache-2.0
#pragma once

// Descriptive analytics over pipeline records (agreement stratification,
// confidence calibration, corroboration bands, override rate), the
// argumentation-level replay ablation harness, and the paired-classifier
// statistics: exact McNemar with Holm-Bonferroni correction. Aggregations are
// pure folds over the record stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/argumentation.hpp"
#include "fusewire/record.hpp"

namespace fusewire {

// ---- small helpers ------------------------------------------------------------

inline bool record_correct(const PipelineRecord& r) {
    return r.correct_choice && r.decision.chosen == *r.correct_choice;
}

struct BandStat {
    std::string label;
    size_t n = 0;
    size_t correct = 0;
    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

inline void to_json(json& j, const BandStat& b) {
    j = json{{"label", b.label},
             {"n", b.n},
             {"correct", b.correct},
             {"accuracy", text::round4(b.accuracy())}};
}

// ---- agreement stratification ----------------------------------------------------

/// Accuracy by source-model agreement level, plus the overall row.
inline std::vector<BandStat> stratify_agreement(const std::vector<PipelineRecord>& records) {
    if (records.empty()) return {};
    std::map<AgreementLevel, BandStat> by_level;
    BandStat overall{"overall", 0, 0};
    for (const auto& r : records) {
        auto& b = by_level[r.unified.agreement];
        b.label = to_string(r.unified.agreement);
        b.n++;
        overall.n++;
        if (record_correct(r)) {
            b.correct++;
            overall.correct++;
        }
    }
    std::vector<BandStat> out;
    for (auto level :
         {AgreementLevel::Unanimous, AgreementLevel::Majority, AgreementLevel::Conflicting}) {
        if (auto it = by_level.find(level); it != by_level.end()) out.push_back(it->second);
    }
    out.push_back(overall);
    return out;
}

// ---- confidence calibration -------------------------------------------------------

/// Bands: >=0.80, 0.60-0.79, 0.40-0.59, <0.40 over decision confidence.
inline std::vector<BandStat> calibration_buckets(const std::vector<PipelineRecord>& records) {
    std::vector<BandStat> bands = {{">=0.80", 0, 0}, {"0.60-0.79", 0, 0}, {"0.40-0.59", 0, 0},
                                   {"<0.40", 0, 0}};
    for (const auto& r : records) {
        double c = r.decision.confidence;
        size_t idx = c >= 0.80 ? 0 : c >= 0.60 ? 1 : c >= 0.40 ? 2 : 3;
        bands[idx].n++;
        if (record_correct(r)) bands[idx].correct++;
    }
    return bands;
}

// ---- corroboration bands ------------------------------------------------------------

inline size_t corroborated_item_count(const PipelineRecord& r) {
    size_t n = 0;
    for (const auto& item : r.final_evidence)
        if (item.status == EvidenceStatus::Corroborated) ++n;
    return n;
}

/// Accuracy by number of corroborated evidence items: 0, 1-5, >=6.
inline std::vector<BandStat> corroboration_stats(const std::vector<PipelineRecord>& records) {
    std::vector<BandStat> bands = {{"0", 0, 0}, {"1-5", 0, 0}, {">=6", 0, 0}};
    for (const auto& r : records) {
        size_t c = corroborated_item_count(r);
        size_t idx = c == 0 ? 0 : c <= 5 ? 1 : 2;
        bands[idx].n++;
        if (record_correct(r)) bands[idx].correct++;
    }
    return bands;
}

// ---- override rate -----------------------------------------------------------------

struct OverrideStats {
    size_t n_overridden = 0;
    size_t n_with_predictions = 0;  // denominator; records lacking predictions excluded
    size_t n_excluded = 0;
    double fraction() const {
        return n_with_predictions == 0 ? 0.0
                                       : static_cast<double>(n_overridden) / n_with_predictions;
    }
};

inline void to_json(json& j, const OverrideStats& o) {
    j = json{{"n_overridden", o.n_overridden},
             {"n_with_predictions", o.n_with_predictions},
             {"n_excluded", o.n_excluded},
             {"fraction", text::round4(o.fraction())}};
}

/// Counts records whose final choice differs from every recorded source
/// prediction (the cases where tool evidence overrode both source models).
inline OverrideStats override_rate(const std::vector<PipelineRecord>& records) {
    OverrideStats stats;
    for (const auto& r : records) {
        std::vector<std::string> predictions;
        for (const auto& report : r.source_reports)
            for (const auto& p : report.tentative_predictions)
                if (p) predictions.push_back(*p);
        if (predictions.empty()) {
            stats.n_excluded++;
            continue;
        }
        stats.n_with_predictions++;
        bool overrode = std::none_of(predictions.begin(), predictions.end(),
                                     [&](const std::string& p) { return p == r.decision.chosen; });
        if (overrode) stats.n_overridden++;
    }
    return stats;
}

// ---- McNemar ------------------------------------------------------------------------

namespace detail {

inline double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

/// Exact two-sided binomial McNemar: p = 2 * min(P(X <= min(b,c)), 1/2) with
/// X ~ Binomial(b + c, 1/2); p = 1 when there are no discordant pairs.
inline double mcnemar_exact(int b, int c) {
    if (b < 0 || c < 0) throw InvalidInput("mcnemar_exact: counts must be non-negative");
    int n = b + c;
    if (n == 0) return 1.0;
    int m = std::min(b, c);
    const double log_half_n = -n * std::log(2.0);
    long double cdf = 0.0L;
    for (int k = 0; k <= m; ++k) cdf += std::exp(detail::log_choose(n, k) + log_half_n);
    double p = 2.0 * std::min(static_cast<double>(cdf), 0.5);
    return std::min(1.0, std::max(0.0, p));
}

/// Continuity-corrected chi-square variant, provided for cross-checking; the
/// exact test is the default everywhere.
inline double mcnemar_chi2(int b, int c) {
    if (b < 0 || c < 0) throw InvalidInput("mcnemar_chi2: counts must be non-negative");
    if (b + c == 0) return 1.0;
    double num = std::abs(b - c) - 1.0;
    if (num < 0) num = 0;
    double stat = num * num / static_cast<double>(b + c);
    return std::erfc(std::sqrt(stat / 2.0));  // survival of chi-square with 1 dof
}

// ---- Holm-Bonferroni ----------------------------------------------------------------

struct HolmResult {
    double p = 1.0;
    double adjusted_threshold = 0.0;
    bool rejected = false;
    size_t original_index = 0;
};

inline void to_json(json& j, const HolmResult& h) {
    j = json{{"p", h.p},
             {"adjusted_threshold", h.adjusted_threshold},
             {"rejected", h.rejected},
             {"original_index", h.original_index}};
}

/// Step-down correction: the i-th smallest p-value is compared against
/// alpha/(m-i+1); rejection stops at the first failure. Results are returned
/// sorted ascending by p.
inline std::vector<HolmResult> holm_bonferroni(const std::vector<double>& p_values, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0) throw InvalidInput("holm_bonferroni: alpha must be in (0,1)");
    std::vector<HolmResult> out;
    for (size_t i = 0; i < p_values.size(); ++i) out.push_back({p_values[i], 0.0, false, i});
    std::sort(out.begin(), out.end(), [](const HolmResult& a, const HolmResult& b) {
        if (a.p != b.p) return a.p < b.p;
        return a.original_index < b.original_index;
    });
    size_t m = out.size();
    bool still_rejecting = true;
    for (size_t i = 0; i < m; ++i) {
        out[i].adjusted_threshold = alpha / static_cast<double>(m - i);
        if (still_rejecting && out[i].p <= out[i].adjusted_threshold)
            out[i].rejected = true;
        else
            still_rejecting = false;
    }
    return out;
}

// ---- rubrics -----------------------------------------------------------------------

/// Judging protocol record: k checkable criteria verdicts, gated on answer
/// correctness. Criterion generation and judging are external; this only
/// scores given verdicts.
struct RubricsJudgment {
    std::string sample_id;
    std::vector<bool> verdicts;  // k = 5 by default
    bool answer_correct = false;
    double score = 0.0;
};

inline double rubrics_score(const RubricsJudgment& judgment) {
    if (judgment.verdicts.empty()) throw InvalidInput("rubrics_score: need at least one verdict");
    if (!judgment.answer_correct) return 0.0;
    size_t satisfied = 0;
    for (bool v : judgment.verdicts) satisfied += v ? 1 : 0;
    return static_cast<double>(satisfied) / static_cast<double>(judgment.verdicts.size());
}

inline void to_json(json& j, const RubricsJudgment& r) {
    j = json{{"sample_id", r.sample_id},
             {"verdicts", r.verdicts},
             {"answer_correct", r.answer_correct},
             {"score", text::round4(r.score)}};
}

inline void from_json(const json& j, RubricsJudgment& r) {
    r.sample_id = j.value("sample_id", "");
    r.verdicts = j.value("verdicts", std::vector<bool>{});
    r.answer_correct = j.value("answer_correct", false);
    r.score = j.value("score", 0.0);
}

// ---- replay ablation ----------------------------------------------------------------

enum class EvidenceFilter { Both, SourceAOnly, SourceBOnly };

inline const char* to_string(EvidenceFilter f) {
    switch (f) {
        case EvidenceFilter::Both: return "both";
        case EvidenceFilter::SourceAOnly: return "source_a_only";
        case EvidenceFilter::SourceBOnly: return "source_b_only";
    }
    return "both";
}

inline EvidenceFilter evidence_filter_from_string(const std::string& s) {
    if (s == "both") return EvidenceFilter::Both;
    if (s == "source_a_only" || s == "source-a" || s == "source_a") return EvidenceFilter::SourceAOnly;
    if (s == "source_b_only" || s == "source-b" || s == "source_b") return EvidenceFilter::SourceBOnly;
    throw ConfigError("unknown evidence filter: " + s);
}

struct AblationResult {
    std::string label;
    size_t n = 0;
    size_t skipped = 0;  // records without replayable evidence
    double baseline_accuracy = 0.0;
    double accuracy = 0.0;
    double delta_pp = 0.0;
    int discordant_b = 0;  // baseline correct, variant wrong
    int discordant_c = 0;  // baseline wrong, variant correct
    double p_value = 1.0;
    bool significant = false;
    int discordant() const { return discordant_b + discordant_c; }
};

inline void to_json(json& j, const AblationResult& a) {
    j = json{{"label", a.label},
             {"n", a.n},
             {"skipped", a.skipped},
             {"baseline_accuracy", text::round4(a.baseline_accuracy)},
             {"accuracy", text::round4(a.accuracy)},
             {"delta_pp", text::round4(a.delta_pp)},
             {"discordant_b", a.discordant_b},
             {"discordant_c", a.discordant_c},
             {"n_discordant", a.discordant()},
             {"p_value", a.p_value},
             {"significant", a.significant}};
}

namespace detail {

/// Drops the removed source's observations from the bundle; tool results,
/// contradiction traces and everything else upstream stay fixed.
inline EvidenceBundle filter_bundle(EvidenceBundle bundle, EvidenceFilter filter,
                                    const std::string& source_a, const std::string& source_b) {
    if (filter == EvidenceFilter::Both) return bundle;
    const std::string& removed = filter == EvidenceFilter::SourceAOnly ? source_b : source_a;
    std::vector<EvidenceItem> kept;
    for (auto& item : bundle.items) {
        if (item.origin.is_lalm() && item.origin.name == removed) continue;
        kept.push_back(std::move(item));
    }
    bundle.items = std::move(kept);
    std::vector<SourceReport> reports;
    for (auto& r : bundle.source_reports)
        if (r.source != removed) reports.push_back(std::move(r));
    bundle.source_reports = std::move(reports);
    return bundle;
}

inline std::pair<std::string, std::string> record_sources(const PipelineRecord& r) {
    std::string a = r.source_reports.size() > 0 ? r.source_reports[0].source : "";
    std::string b = r.source_reports.size() > 1 ? r.source_reports[1].source : "";
    return {a, b};
}

}  // namespace detail

/// Re-runs redact + select_answer for one record with the given evidence
/// filter. All upstream artifacts are fixed; only the evidence presented to
/// the selection stage changes.
inline std::optional<AnswerDecision> replay_decision(const PipelineRecord& record,
                                                     EvidenceFilter filter,
                                                     const RecordingChat& backend,
                                                     const ScoringConfig& scoring) {
    if (record.final_evidence.empty() && record.source_reports.empty()) return std::nullopt;
    auto [source_a, source_b] = detail::record_sources(record);
    EvidenceBundle bundle =
        detail::filter_bundle(bundle_from_record(record), filter, source_a, source_b);
    if (bundle.choices.size() < 2) return std::nullopt;
    return select_answer(redact(std::move(bundle)), backend, scoring);
}

/// Variant-vs-baseline replay over a record set: discordant pairs, accuracy
/// delta in percentage points (variant - baseline) and the exact McNemar p.
inline AblationResult replay_ablation(const std::vector<PipelineRecord>& records,
                                      EvidenceFilter filter, const RecordingChat& backend,
                                      const ScoringConfig& scoring) {
    AblationResult result;
    result.label = to_string(filter);
    size_t baseline_correct = 0;
    size_t variant_correct = 0;
    for (const auto& record : records) {
        if (!record.correct_choice) {
            result.skipped++;
            continue;
        }
        auto baseline = replay_decision(record, EvidenceFilter::Both, backend, scoring);
        auto variant = filter == EvidenceFilter::Both
                           ? baseline
                           : replay_decision(record, filter, backend, scoring);
        if (!baseline || !variant) {
            result.skipped++;
            continue;
        }
        result.n++;
        bool base_ok = baseline->chosen == *record.correct_choice;
        bool var_ok = variant->chosen == *record.correct_choice;
        baseline_correct += base_ok ? 1 : 0;
        variant_correct += var_ok ? 1 : 0;
        if (base_ok && !var_ok) result.discordant_b++;
        if (!base_ok && var_ok) result.discordant_c++;
    }
    if (result.n > 0) {
        result.baseline_accuracy = static_cast<double>(baseline_correct) / result.n;
        result.accuracy = static_cast<double>(variant_correct) / result.n;
        result.delta_pp = 100.0 *
                          static_cast<double>(result.discordant_c - result.discordant_b) /
                          static_cast<double>(result.n);
    }
    result.p_value = mcnemar_exact(result.discordant_b, result.discordant_c);
    return result;
}

/// Runs the single-source ablation family and applies Holm-Bonferroni across
/// it, filling each result's significance flag.
inline std::vector<AblationResult> run_ablation_family(const std::vector<PipelineRecord>& records,
                                                       const std::vector<EvidenceFilter>& filters,
                                                       const RecordingChat& backend,
                                                       const ScoringConfig& scoring,
                                                       double alpha = 0.05) {
    std::vector<AblationResult> results;
    std::vector<double> ps;
    for (auto f : filters) {
        results.push_back(replay_ablation(records, f, backend, scoring));
        ps.push_back(results.back().p_value);
    }
    if (!ps.empty()) {
        auto holm = holm_bonferroni(ps, alpha);
        for (const auto& h : holm) results[h.original_index].significant = h.rejected;
    }
    return results;
}

}  // namespace fusewire
