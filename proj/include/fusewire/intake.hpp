// SPDX-License-Identifier: Apache-2.0
#pragma once

// Source-model intake: plans the eight queries (2 sources x {full, 3 thirds}),
// parses observation responses, merges per-source observations with segment
// corroboration, and votes on the content type.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/errors.hpp"
#include "fusewire/evidence.hpp"

namespace fusewire {

struct IntakeQuery {
    std::string source;
    AudioScope scope;
    std::string prompt;
};

/// Merged view of one source's four responses. tentative_predictions is
/// analytics-only; redaction strips it before argumentation.
struct SourceReport {
    std::string source;
    std::vector<Observation> observations;
    std::set<std::string> segment_corroborated_ids;
    ContentType content_vote = ContentType::Mixed;
    std::vector<std::optional<std::string>> tentative_predictions;  // one per query
    bool partial = false;
};

/// Carries the degraded report so the pipeline can continue on partial intake.
struct PartialIntakeError : Error {
    PartialIntakeError(std::string msg, SourceReport gathered)
        : Error(std::move(msg)), report(std::move(gathered)) {}
    SourceReport report;
};

/// One parsed source response (a single query's output).
struct ParsedResponse {
    AudioScope scope;
    std::vector<Observation> observations;  // ids assigned by synthesize_source
    std::optional<std::string> tentative_prediction;
    std::optional<ContentType> content;
};

struct IntakeConfig {
    double dedup_threshold = 0.6;  // claim token-set Jaccard at or above merges
    int segments = 3;
};

// ---- operations -------------------------------------------------------------

/// Four queries per source: full audio plus three equal-duration segments that
/// tile [0, D) exactly. Prompts instruct observation reporting, never answer
/// selection; the tentative line is elicited separately for the logs.
inline std::vector<IntakeQuery> plan_queries(double duration_s,
                                             const std::vector<std::string>& sources,
                                             const std::string& question = "",
                                             const std::vector<std::string>& choices = {},
                                             const IntakeConfig& config = {}) {
    if (duration_s <= 0.0) throw InvalidInput("plan_queries: duration must be positive");
    std::vector<IntakeQuery> queries;
    for (const auto& source : sources) {
        for (int q = 0; q < config.segments + 1; ++q) {
            AudioScope scope = AudioScope::full_audio();
            std::string window = "the full audio";
            if (q > 0) {
                int i = q - 1;
                double start = duration_s * i / config.segments;
                double end = q == config.segments ? duration_s
                                                  : duration_s * (i + 1) / config.segments;
                scope = AudioScope::segment(i, start, end);
                char buf[96];
                std::snprintf(buf, sizeof buf, "seconds %.2f to %.2f", start, end);
                window = buf;
            }
            std::string prompt =
                "Listen to " + window +
                " and report factual observations about what you hear.\n"
                "Do not select or argue for an answer; report observations only.\n"
                "Format: one line per observation, `OBS: <claim> | time: <start>-<end> | tag: "
                "<category>` (time and tag optional).\n"
                "Add one line `CONTENT: <speech|music|mixed|environmental>` classifying the "
                "audio.\n";
            if (!question.empty()) {
                prompt += "Question (for context only): " + question + "\n";
                if (!choices.empty()) {
                    prompt += "Options:\n";
                    for (size_t i = 0; i < choices.size(); ++i)
                        prompt += std::string(1, static_cast<char>('A' + i)) + ". " + choices[i] + "\n";
                    prompt +=
                        "Finally, on its own line, `TENTATIVE: <option letter>` with your "
                        "private first impression. It is logged for diagnostics and never shown "
                        "to the reasoning stage.\n";
                }
            }
            queries.push_back({source, scope, prompt});
        }
    }
    return queries;
}

/// Tolerant response parser: `OBS:` blocks with optional `| time:` and
/// `| tag:` fields, `CONTENT:` and `TENTATIVE:` directives; any other
/// non-empty line falls back to one observation per line.
inline ParsedResponse parse_intake_response(const std::string& response_text,
                                            const AudioScope& scope) {
    ParsedResponse parsed;
    parsed.scope = scope;
    std::istringstream in(response_text);
    std::string line;
    auto trim = [](std::string s) {
        auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
        while (!s.empty() && issp(s.front())) s.erase(s.begin());
        while (!s.empty() && issp(s.back())) s.pop_back();
        return s;
    };
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::string lower = text::to_lower(line);
        if (lower.rfind("tentative:", 0) == 0) {
            std::string v = trim(line.substr(10));
            if (!v.empty()) parsed.tentative_prediction = std::string(1, std::toupper(v[0]));
            continue;
        }
        if (lower.rfind("content:", 0) == 0) {
            std::string v = text::to_lower(trim(line.substr(8)));
            try {
                parsed.content = content_from_string(v);
            } catch (const ConfigError&) {
            }
            continue;
        }
        std::string body = line;
        if (lower.rfind("obs:", 0) == 0) body = trim(line.substr(4));
        if (body.rfind("- ", 0) == 0) body = trim(body.substr(2));
        if (body.empty()) continue;

        Observation obs;
        obs.scope = scope;
        // split on ` | ` fields
        std::vector<std::string> parts;
        size_t pos = 0;
        while (true) {
            size_t bar = body.find('|', pos);
            if (bar == std::string::npos) {
                parts.push_back(trim(body.substr(pos)));
                break;
            }
            parts.push_back(trim(body.substr(pos, bar - pos)));
            pos = bar + 1;
        }
        obs.claim = parts[0];
        for (size_t i = 1; i < parts.size(); ++i) {
            std::string plower = text::to_lower(parts[i]);
            if (plower.rfind("time:", 0) == 0) {
                double a = 0, b = 0;
                if (std::sscanf(parts[i].c_str() + 5, " %lf - %lf", &a, &b) == 2 && a < b &&
                    a >= 0)
                    obs.scope = AudioScope::segment(scope.full ? 0 : scope.index, a, b);
            } else if (plower.rfind("tag:", 0) == 0) {
                std::string tag = text::to_lower(trim(parts[i].substr(4)));
                if (!tag.empty()) obs.tags.insert(tag);
            }
        }
        if (!obs.claim.empty()) parsed.observations.push_back(std::move(obs));
    }
    return parsed;
}

namespace detail {

inline std::optional<ContentType> vote_from_tags(const std::set<std::string>& tags) {
    for (const auto& t : tags) {
        if (t.find("music") != std::string::npos) return ContentType::Music;
        if (t.find("speech") != std::string::npos || t.find("speaker") != std::string::npos ||
            t.find("voice") != std::string::npos)
            return ContentType::Speech;
        if (t.find("environment") != std::string::npos || t.find("scene") != std::string::npos ||
            t.find("ambient") != std::string::npos)
            return ContentType::Environmental;
        if (t.find("mixed") != std::string::npos) return ContentType::Mixed;
    }
    return std::nullopt;
}

inline ContentType majority_content(const std::vector<ContentType>& votes) {
    if (votes.empty()) return ContentType::Mixed;
    std::map<ContentType, int> counts;
    for (auto v : votes) counts[v]++;
    ContentType best = ContentType::Mixed;
    int best_n = 0;
    bool tie = false;
    for (const auto& [content, n] : counts) {
        if (n > best_n) {
            best = content;
            best_n = n;
            tie = false;
        } else if (n == best_n) {
            tie = true;
        }
    }
    return tie ? ContentType::Mixed : best;
}

}  // namespace detail

/// Merges one source's responses: near-duplicate claims collapse (token-set
/// Jaccard), and a claim seen in both the full-audio response and a segment
/// response is marked segment-corroborated. Throws PartialIntakeError (with
/// the merged report attached) when fewer than four responses arrived.
inline SourceReport synthesize_source(const std::vector<ParsedResponse>& responses,
                                      const std::string& source,
                                      const IntakeConfig& config = {}) {
    SourceReport report;
    report.source = source;

    std::vector<bool> seen_in_full;
    std::vector<bool> seen_in_segment;
    int obs_counter = 0;
    for (const auto& resp : responses) {
        report.tentative_predictions.push_back(resp.tentative_prediction);
        for (const auto& raw : resp.observations) {
            bool from_full = resp.scope.full;
            // merge into an existing observation when claims are near-duplicates
            int match = -1;
            for (size_t i = 0; i < report.observations.size(); ++i) {
                if (text::claim_similarity(report.observations[i].claim, raw.claim) >=
                    config.dedup_threshold) {
                    match = static_cast<int>(i);
                    break;
                }
            }
            if (match < 0) {
                Observation obs = raw;
                obs.source = source;
                obs.id = source + "/o" + std::to_string(obs_counter++);
                report.observations.push_back(std::move(obs));
                seen_in_full.push_back(from_full);
                seen_in_segment.push_back(!from_full);
            } else {
                auto& obs = report.observations[match];
                for (const auto& t : raw.tags) obs.tags.insert(t);
                if (obs.scope.full && !raw.scope.full) obs.scope = raw.scope;
                seen_in_full[match] = seen_in_full[match] || from_full;
                seen_in_segment[match] = seen_in_segment[match] || !from_full;
            }
        }
    }
    for (size_t i = 0; i < report.observations.size(); ++i)
        if (seen_in_full[i] && seen_in_segment[i])
            report.segment_corroborated_ids.insert(report.observations[i].id);

    std::vector<ContentType> votes;
    for (const auto& resp : responses)
        if (resp.content) votes.push_back(*resp.content);
    if (votes.empty()) {
        for (const auto& obs : report.observations)
            if (auto v = detail::vote_from_tags(obs.tags)) votes.push_back(*v);
    }
    report.content_vote = detail::majority_content(votes);

    if (responses.size() < 4) {
        report.partial = true;
        throw PartialIntakeError("partial intake for " + source + ": " +
                                     std::to_string(responses.size()) + "/4 responses",
                                 report);
    }
    return report;
}

/// Majority vote over per-source content votes (plus optional tool hints);
/// ties and missing votes resolve to Mixed.
inline ContentType classify_content(const std::vector<SourceReport>& reports,
                                    const std::vector<ContentType>& tool_hints = {}) {
    if (reports.empty()) throw InvalidInput("classify_content: need at least one report");
    std::vector<ContentType> votes;
    for (const auto& r : reports) votes.push_back(r.content_vote);
    for (auto h : tool_hints) votes.push_back(h);
    return detail::majority_content(votes);
}

// ---- json -------------------------------------------------------------------

inline void to_json(json& j, const SourceReport& r) {
    j = json{{"source", r.source},
             {"observations", r.observations},
             {"segment_corroborated_ids", r.segment_corroborated_ids},
             {"content_vote", to_string(r.content_vote)},
             {"partial", r.partial}};
    if (!r.tentative_predictions.empty()) {
        json preds = json::array();
        for (const auto& p : r.tentative_predictions)
            preds.push_back(p ? json(*p) : json(nullptr));
        j["tentative_predictions"] = preds;  // absent entirely once redacted
    }
}

inline void from_json(const json& j, SourceReport& r) {
    r.source = j.at("source").get<std::string>();
    r.observations = j.value("observations", std::vector<Observation>{});
    r.segment_corroborated_ids = j.value("segment_corroborated_ids", std::set<std::string>{});
    r.content_vote = content_from_string(j.value("content_vote", "mixed"));
    r.tentative_predictions.clear();
    for (const auto& p : j.value("tentative_predictions", json::array()))
        r.tentative_predictions.push_back(p.is_null() ? std::nullopt
                                                      : std::optional<std::string>(p.get<std::string>()));
    r.partial = j.value("partial", false);
}

}  // namespace fusewire
