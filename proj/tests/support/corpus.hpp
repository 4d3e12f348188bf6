// SPDX-License-Identifier: Apache-2.0
#pragma once

// Test support: synthetic record corpora. One encodes the published summary
// counts exactly (agreement strata, calibration bands, corroboration bands,
// override rate); one is randomized for oracle cross-checks; one plants the
// discordant-pair structure the ablation harness must recover.

#include <random>
#include <string>
#include <vector>

#include "fusewire/analytics.hpp"
#include "fusewire/record.hpp"

namespace fusewire::testsupport {

inline EvidenceItem simple_item(const std::string& id, const std::string& source,
                                const std::string& claim, EvidenceStatus status, double confidence,
                                double relevance) {
    EvidenceItem item;
    item.id = id;
    item.origin = EvidenceOrigin::lalm(source);
    item.claim = claim;
    item.tier = ReliabilityTier::Lalm;
    item.status = status;
    item.confidence = confidence;
    item.relevance = relevance;
    return item;
}

/// Fills predictions so the stored agreement level, the override flag and the
/// chosen answer are mutually consistent.
inline void fill_predictions(PipelineRecord& r, AgreementLevel level, bool overridden) {
    r.source_reports.resize(2);
    r.source_reports[0].source = "stepaudio";
    r.source_reports[1].source = "qwenomni";
    const std::string chosen = r.decision.chosen;
    auto other = [&](int k) {  // labels distinct from chosen
        for (char c = 'A';; ++c) {
            std::string label(1, c);
            if (label != chosen && k-- == 0) return label;
        }
    };
    std::vector<std::string> preds;
    switch (level) {
        case AgreementLevel::Unanimous:
            preds.assign(8, overridden ? other(0) : chosen);
            break;
        case AgreementLevel::Majority:
            preds.assign(5, overridden ? other(0) : chosen);
            for (int i = 0; i < 3; ++i) preds.push_back(overridden ? other(1) : other(0));
            break;
        case AgreementLevel::Conflicting:
            for (int i = 0; i < 4; ++i) preds.push_back(overridden ? other(0) : chosen);
            for (int i = 0; i < 4; ++i) preds.push_back(overridden ? other(1) : other(0));
            break;
    }
    for (int q = 0; q < 4; ++q) {
        r.source_reports[0].tentative_predictions.push_back(preds[q]);
        r.source_reports[1].tentative_predictions.push_back(preds[4 + q]);
    }
}

inline void set_corroborated_items(PipelineRecord& r, size_t count) {
    for (size_t i = 0; i < count; ++i)
        r.final_evidence.push_back(simple_item("e" + std::to_string(i), "stepaudio",
                                               "corroborated claim " + std::to_string(i),
                                               EvidenceStatus::Corroborated, 0.7, 0.8));
}

/// 1,000 records reproducing the published summary table exactly:
///   agreement: unanimous 128/121, majority 565/470, conflicting 307/178
///   calibration: >=0.80 237/216, 0.60-0.79 722/537, 0.40-0.59 33/13, <0.40 8/3
///   corroboration: >=6 282/243, 1-5 705/519, 0 13/7
///   overrides: 85 (all within the conflicting stratum)
inline std::vector<PipelineRecord> build_paper_corpus() {
    struct Stratum {
        AgreementLevel level;
        size_t n, correct;
    };
    const std::vector<Stratum> strata = {{AgreementLevel::Unanimous, 128, 121},
                                         {AgreementLevel::Majority, 565, 470},
                                         {AgreementLevel::Conflicting, 307, 178}};
    // per-band quotas split by correctness; [band][correct?1:0]
    size_t conf_quota[4][2] = {{21, 216}, {185, 537}, {20, 13}, {5, 3}};
    const double conf_value[4] = {0.85, 0.70, 0.50, 0.30};
    size_t corr_quota[3][2] = {{6, 7}, {186, 519}, {39, 243}};
    const size_t corr_items[3] = {0, 3, 7};
    size_t overrides_left = 85;

    std::vector<PipelineRecord> records;
    size_t id = 0;
    for (const auto& s : strata) {
        for (size_t i = 0; i < s.n; ++i, ++id) {
            bool correct = i < s.correct;
            PipelineRecord r;
            r.sample_id = "p" + std::to_string(id);
            r.question = "synthetic";
            r.choices = {"choice one", "choice two", "choice three", "choice four"};
            r.correct_choice = "A";
            r.unified.agreement = s.level;
            r.decision.chosen = correct ? "A" : "B";
            bool overridden = false;
            if (s.level == AgreementLevel::Conflicting && overrides_left > 0) {
                overridden = true;
                --overrides_left;
            }
            for (int band = 0; band < 4; ++band) {
                if (conf_quota[band][correct ? 1 : 0] > 0) {
                    --conf_quota[band][correct ? 1 : 0];
                    r.decision.confidence = conf_value[band];
                    break;
                }
            }
            for (int band = 2; band >= 0; --band) {
                if (corr_quota[band][correct ? 1 : 0] > 0) {
                    --corr_quota[band][correct ? 1 : 0];
                    set_corroborated_items(r, corr_items[band]);
                    break;
                }
            }
            fill_predictions(r, s.level, overridden);
            records.push_back(std::move(r));
        }
    }
    return records;
}

/// Randomized corpus for recount-oracle cross-checks.
inline std::vector<PipelineRecord> build_random_corpus(std::mt19937& rng, size_t n) {
    std::uniform_int_distribution<int> level_d(0, 2);
    std::uniform_real_distribution<double> conf_d(0.0, 1.0);
    std::uniform_int_distribution<int> corr_d(0, 9);
    std::uniform_int_distribution<int> chosen_d(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<PipelineRecord> records;
    for (size_t i = 0; i < n; ++i) {
        PipelineRecord r;
        r.sample_id = "r" + std::to_string(i);
        r.choices = {"w", "x", "y", "z"};
        r.correct_choice = "A";
        r.unified.agreement = static_cast<AgreementLevel>(level_d(rng));
        r.decision.chosen = std::string(1, static_cast<char>('A' + chosen_d(rng)));
        r.decision.confidence = conf_d(rng);
        set_corroborated_items(r, static_cast<size_t>(corr_d(rng)));
        if (coin(rng)) fill_predictions(r, r.unified.agreement, coin(rng) == 1);
        records.push_back(std::move(r));
    }
    return records;
}

/// Planted-discordance corpus: under weight-argmax replay, SourceAOnly flips
/// 76 baseline-correct records wrong and 33 baseline-wrong right (N_d = 109,
/// delta -4.3pp); SourceBOnly plants 71/39 (N_d = 110, delta -3.2pp).
/// Baseline replay accuracy is 766/1000.
inline std::vector<PipelineRecord> build_planted_ablation_corpus() {
    std::vector<PipelineRecord> records;
    size_t id = 0;
    auto add = [&](size_t count, const std::string& claim_a, double weight_a,
                   const std::string& claim_b, double weight_b) {
        // weight = tier weight (0.40 for lalm) x confidence x relevance
        auto conf_rel = [](double target) { return std::pair<double, double>{target / 0.40, 1.0}; };
        for (size_t i = 0; i < count; ++i, ++id) {
            PipelineRecord r;
            r.sample_id = "a" + std::to_string(id);
            r.question = "which tone dominates";
            r.choices = {"crimson tone", "azure tone"};
            r.correct_choice = "A";
            auto [ca, rel_a] = conf_rel(weight_a);
            auto [cb, rel_b] = conf_rel(weight_b);
            r.final_evidence.push_back(simple_item("e0", "stepaudio", claim_a,
                                                   EvidenceStatus::SourceSpecific, ca, rel_a));
            r.final_evidence.push_back(simple_item("e1", "qwenomni", claim_b,
                                                   EvidenceStatus::SourceSpecific, cb, rel_b));
            r.source_reports.resize(2);
            r.source_reports[0].source = "stepaudio";
            r.source_reports[1].source = "qwenomni";
            double wa = text::claim_similarity(claim_a, "crimson tone") > 0 ? weight_a : 0.0;
            double wb = text::claim_similarity(claim_b, "crimson tone") > 0 ? weight_b : 0.0;
            double va = text::claim_similarity(claim_a, "azure tone") > 0 ? weight_a : 0.0;
            double vb = text::claim_similarity(claim_b, "azure tone") > 0 ? weight_b : 0.0;
            r.decision.chosen = (wa + wb) >= (va + vb) ? "A" : "B";  // baseline outcome
            records.push_back(std::move(r));
        }
    };

    const std::string crimson = "clearly crimson texture";
    const std::string azure = "clearly azure texture";
    add(619, crimson, 0.20, crimson, 0.20);  // stable correct
    add(162, azure, 0.20, azure, 0.20);      // stable wrong
    add(76, azure, 0.10, crimson, 0.28);     // A-only flips wrong   (b for source-a)
    add(33, crimson, 0.10, azure, 0.28);     // A-only flips right   (c for source-a)
    add(71, crimson, 0.28, azure, 0.10);     // B-only flips wrong   (b for source-b)
    add(39, azure, 0.28, crimson, 0.10);     // B-only flips right   (c for source-b)
    return records;
}

// ---- independent recount oracle -------------------------------------------------

// Deliberately naive re-implementations used to cross-check the analytics
// aggregations; they share no code with the library versions.

struct OracleCounts {
    std::map<std::string, std::pair<size_t, size_t>> bands;  // label -> (n, correct)
};

inline OracleCounts oracle_agreement(const std::vector<PipelineRecord>& records) {
    OracleCounts out;
    for (const auto& r : records) {
        bool ok = r.correct_choice && r.decision.chosen == *r.correct_choice;
        auto& b = out.bands[to_string(r.unified.agreement)];
        b.first++;
        if (ok) b.second++;
        auto& o = out.bands["overall"];
        o.first++;
        if (ok) o.second++;
    }
    return out;
}

inline OracleCounts oracle_calibration(const std::vector<PipelineRecord>& records) {
    OracleCounts out;
    for (const auto& r : records) {
        bool ok = r.correct_choice && r.decision.chosen == *r.correct_choice;
        double c = r.decision.confidence;
        std::string label = c >= 0.80 ? ">=0.80" : c >= 0.60 ? "0.60-0.79"
                                                 : c >= 0.40 ? "0.40-0.59" : "<0.40";
        auto& b = out.bands[label];
        b.first++;
        if (ok) b.second++;
    }
    return out;
}

inline OracleCounts oracle_corroboration(const std::vector<PipelineRecord>& records) {
    OracleCounts out;
    for (const auto& r : records) {
        bool ok = r.correct_choice && r.decision.chosen == *r.correct_choice;
        size_t c = 0;
        for (const auto& item : r.final_evidence)
            if (item.status == EvidenceStatus::Corroborated) ++c;
        std::string label = c == 0 ? "0" : c <= 5 ? "1-5" : ">=6";
        auto& b = out.bands[label];
        b.first++;
        if (ok) b.second++;
    }
    return out;
}

inline std::pair<size_t, size_t> oracle_override(const std::vector<PipelineRecord>& records) {
    size_t overridden = 0, denom = 0;
    for (const auto& r : records) {
        std::vector<std::string> preds;
        for (const auto& rep : r.source_reports)
            for (const auto& p : rep.tentative_predictions)
                if (p) preds.push_back(*p);
        if (preds.empty()) continue;
        ++denom;
        bool any_match = false;
        for (const auto& p : preds)
            if (p == r.decision.chosen) any_match = true;
        if (!any_match) ++overridden;
    }
    return {overridden, denom};
}

}  // namespace fusewire::testsupport
