// SPDX-License-Identifier: Apache-2.0
#pragma once

// Final stage: two sequential backend calls. Answer selection sees redacted
// evidence (source labels, never source predictions); reasoning generation
// then justifies the pre-selected answer in a fixed seven-section template,
// checked for completeness against every observation, tool and conflict.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusewire/backends.hpp"
#include "fusewire/contradiction.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/intake.hpp"
#include "fusewire/textutil.hpp"
#include "fusewire/tools.hpp"
#include "fusewire/unified.hpp"

namespace fusewire {

/// Everything argumentation is allowed to see, plus the redaction marker.
struct EvidenceBundle {
    std::string sample_id;
    std::string question;
    std::vector<std::string> choices;
    ContentType content = ContentType::Mixed;
    std::vector<EvidenceItem> items;
    std::vector<ToolResult> tool_results;
    std::vector<Contradiction> contradictions;
    std::vector<Disagreement> disagreements;
    std::vector<SourceReport> source_reports;
    bool redacted = false;
};

struct ChoiceSupport {
    double weight = 0.0;
    std::string summary;
};

struct AnswerDecision {
    std::string chosen;  // choice label, e.g. "B"
    double confidence = 0.0;
    std::map<std::string, ChoiceSupport> per_choice;  // covers every choice label
};

struct ReasoningSection {
    std::string title;
    std::string body;
};

struct ReasoningDocument {
    std::vector<ReasoningSection> sections;  // exactly 7, fixed order
    std::vector<std::string> stubbed;        // titles filled by template after failed retries
};

struct CompletenessReport {
    std::vector<std::string> unreferenced_observations;
    std::vector<std::string> unreferenced_tools;
    std::vector<std::string> unaddressed_conflicts;
    bool pass = false;
};

inline const std::vector<std::string>& reasoning_section_titles() {
    static const std::vector<std::string> titles = {
        "What Is Heard",          "Evidence Synthesis",    "Conflict Resolution",
        "Reliability Assessment", "Tool Cross-References", "Per-Choice Evaluation",
        "Conclusion",
    };
    return titles;
}

inline std::string choice_label(size_t index) {
    return std::string(1, static_cast<char>('A' + index));
}

// ---- redaction ------------------------------------------------------------------

/// Strips every tentative prediction (per-query and per-observation) while
/// keeping source labels and everything else structurally intact. Idempotent.
inline EvidenceBundle redact(EvidenceBundle bundle) {
    for (auto& report : bundle.source_reports) {
        for (auto& p : report.tentative_predictions) p.reset();
        report.tentative_predictions.clear();
        for (auto& obs : report.observations) obs.tentative_prediction.reset();
    }
    bundle.redacted = true;
    return bundle;
}

// ---- answer selection -------------------------------------------------------------

namespace detail {

/// Per-choice aggregate: each item contributes its evidence weight to the
/// choice its claim matches best (lexically); unmatched items support no one.
inline std::map<std::string, ChoiceSupport> per_choice_support(const EvidenceBundle& bundle,
                                                               const ScoringConfig& scoring) {
    std::map<std::string, ChoiceSupport> support;
    for (size_t i = 0; i < bundle.choices.size(); ++i) support[choice_label(i)] = {};
    for (const auto& item : bundle.items) {
        double best = 0.0;
        size_t best_idx = 0;
        for (size_t i = 0; i < bundle.choices.size(); ++i) {
            double s = text::claim_similarity(item.claim, bundle.choices[i]);
            if (s > best) {
                best = s;
                best_idx = i;
            }
        }
        if (best <= 0.0) continue;
        auto& entry = support[choice_label(best_idx)];
        entry.weight += evidence_weight(item, scoring);
        if (!entry.summary.empty()) entry.summary += "; ";
        if (entry.summary.size() < 160) entry.summary += item.claim;
    }
    return support;
}

inline std::string render_evidence(const EvidenceBundle& bundle) {
    std::ostringstream out;
    out << "Audio observations and measurements (source labels retained, source answer "
           "predictions withheld):\n";
    for (const auto& item : bundle.items) {
        char meta[160];
        std::snprintf(meta, sizeof meta, "confidence %.2f, relevance %.2f", item.confidence,
                      item.relevance);
        out << "- [" << item.id << "|" << (item.origin.is_lalm() ? "source " : "tool ")
            << item.origin.name << "|" << to_string(item.tier) << "|" << to_string(item.status)
            << "|risk " << to_string(item.risk) << "|" << meta << "] " << item.claim << "\n";
    }
    if (!bundle.disagreements.empty()) {
        out << "Cross-source disagreements:\n";
        for (const auto& d : bundle.disagreements)
            out << "- [" << d.id << (d.resolved ? "|resolved] " : "|open] ") << d.topic << ": "
                << d.credibility_note << "\n";
    }
    if (!bundle.contradictions.empty()) {
        out << "Detected contradictions:\n";
        for (const auto& c : bundle.contradictions)
            out << "- [" << c.id << "|" << to_string(c.kind) << (c.resolved ? "|resolved] " : "|open] ")
                << c.description << "\n";
    }
    return out.str();
}

inline std::optional<std::string> parse_choice(const std::string& response,
                                               const std::vector<std::string>& labels) {
    std::string upper;
    for (char c : response) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    auto pos = upper.find("CHOICE:");
    size_t start = pos == std::string::npos ? 0 : pos + 7;
    for (size_t i = start; i < upper.size(); ++i) {
        char c = upper[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == '*' || c == '.' || c == ')') continue;
        std::string candidate(1, c);
        if (std::find(labels.begin(), labels.end(), candidate) != labels.end()) {
            // must be a standalone letter, not the start of a word
            if (i + 1 < upper.size() && std::isalnum(static_cast<unsigned char>(upper[i + 1])))
                return std::nullopt;
            return candidate;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

/// The exact selection prompt, exposed so tests can scan the payload for
/// leaked predictions.
inline ChatRequest build_selection_request(const EvidenceBundle& bundle) {
    std::string prompt = "Question: " + bundle.question + "\nOptions:\n";
    for (size_t i = 0; i < bundle.choices.size(); ++i)
        prompt += choice_label(i) + ". " + bundle.choices[i] + "\n";
    prompt += detail::render_evidence(bundle);
    prompt +=
        "Select the best-supported option. Weigh each item by its reliability tier, "
        "confidence and relevance; do not dismiss speculative items outright.\n"
        "Reply with `CHOICE: <letter>` on the first line, then one sentence of justification.\n";
    ChatRequest request;
    request.endpoint_id = "reasoner";
    request.messages = {{"system", "You answer multiple-choice audio questions from evidence.", {}},
                        {"user", prompt, {}}};
    return request;
}

/// Answer selection over redacted evidence. Refuses unredacted input. An
/// invalid backend label gets one corrective retry, then the weight argmax
/// decides; the chosen label is always one of the provided choices.
inline AnswerDecision select_answer(const EvidenceBundle& bundle, const RecordingChat& backend,
                                    const ScoringConfig& scoring) {
    if (!bundle.redacted)
        throw InvalidInput("select_answer: bundle must be redacted first");
    if (bundle.choices.size() < 2)
        throw InvalidInput("select_answer: need at least two choices");

    AnswerDecision decision;
    decision.per_choice = detail::per_choice_support(bundle, scoring);
    std::vector<std::string> labels;
    for (size_t i = 0; i < bundle.choices.size(); ++i) labels.push_back(choice_label(i));

    std::optional<std::string> chosen;
    ChatRequest request = build_selection_request(bundle);
    if (auto response = backend.try_complete(request)) {
        chosen = detail::parse_choice(*response, labels);
        if (!chosen) {
            ChatRequest retry = request;
            retry.messages.push_back({"assistant", *response, {}});
            retry.messages.push_back(
                {"user",
                 "That is not one of the options. Reply with `CHOICE: <letter>` where the letter "
                 "is one of: " +
                     [&] {
                         std::string s;
                         for (const auto& l : labels) s += l + " ";
                         return s;
                     }(),
                 {}});
            if (auto second = backend.try_complete(retry))
                chosen = detail::parse_choice(*second, labels);
        }
    }
    if (!chosen) {
        // deterministic fallback: highest aggregate support, first label on ties
        std::string best = labels[0];
        double best_w = -1.0;
        for (const auto& l : labels) {
            double w = decision.per_choice[l].weight;
            if (w > best_w + 1e-12) {
                best_w = w;
                best = l;
            }
        }
        chosen = best;
    }
    decision.chosen = *chosen;

    double total = 0.0;
    for (const auto& [label, s] : decision.per_choice) total += s.weight;
    decision.confidence = total > 0.0 ? decision.per_choice[decision.chosen].weight / total
                                      : 1.0 / static_cast<double>(labels.size());
    return decision;
}

// ---- reasoning generation ------------------------------------------------------------

namespace detail {

inline std::string normalize_title(const std::string& line) {
    std::string out;
    for (char c : line) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

inline std::map<std::string, std::string> parse_sections(const std::string& response) {
    std::map<std::string, size_t> title_index;
    const auto& titles = reasoning_section_titles();
    for (size_t i = 0; i < titles.size(); ++i) title_index[normalize_title(titles[i])] = i;

    std::map<std::string, std::string> bodies;
    std::istringstream in(response);
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        std::string normalized = normalize_title(line);
        if (title_index.count(normalized)) {
            current = titles[title_index[normalized]];
            continue;
        }
        if (current.empty()) continue;
        if (!line.empty()) {
            auto& body = bodies[current];
            if (!body.empty()) body += "\n";
            body += line;
        }
    }
    return bodies;
}

}  // namespace detail

inline ChatRequest build_reasoning_request(const EvidenceBundle& bundle,
                                           const AnswerDecision& decision,
                                           const std::string& extra_instructions = "") {
    std::string prompt = "Question: " + bundle.question + "\nOptions:\n";
    for (size_t i = 0; i < bundle.choices.size(); ++i)
        prompt += choice_label(i) + ". " + bundle.choices[i] + "\n";
    prompt += "Selected answer: " + decision.chosen + "\n";
    prompt += detail::render_evidence(bundle);
    prompt +=
        "Write the justification for the selected answer as prose under exactly these seven "
        "headers, in this order, each on its own line:\n";
    for (const auto& title : reasoning_section_titles()) prompt += "## " + title + "\n";
    prompt +=
        "Reference every observation, every tool result and every conflict above; resolve or "
        "acknowledge each conflict; evaluate each option.\n";
    if (!extra_instructions.empty()) prompt += extra_instructions + "\n";
    ChatRequest request;
    request.endpoint_id = "reasoner";
    request.messages = {{"system", "You write structured audio-reasoning justifications.", {}},
                        {"user", prompt, {}}};
    return request;
}

/// Seven sections, fixed order. A missing section triggers a regeneration
/// request (up to 2 retries), after which the gap is template-filled and
/// flagged. The decision is fixed before this call, never revisited here.
inline ReasoningDocument generate_reasoning(const EvidenceBundle& bundle,
                                            const AnswerDecision& decision,
                                            const RecordingChat& backend, int retries = 2,
                                            const std::string& extra_instructions = "") {
    const auto& titles = reasoning_section_titles();
    std::map<std::string, std::string> bodies;
    std::string note = extra_instructions;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        auto response = backend.try_complete(build_reasoning_request(bundle, decision, note));
        if (response) {
            auto parsed = detail::parse_sections(*response);
            for (auto& [title, body] : parsed)
                if (!body.empty()) bodies[title] = body;
        }
        std::vector<std::string> missing;
        for (const auto& t : titles)
            if (!bodies.count(t)) missing.push_back(t);
        if (missing.empty()) break;
        if (!backend.client) break;
        note = extra_instructions + "\nYour previous draft was missing these sections: ";
        for (const auto& m : missing) note += "\"" + m + "\" ";
        note += "- include all seven.";
    }

    ReasoningDocument doc;
    for (const auto& t : titles) {
        auto it = bodies.find(t);
        if (it != bodies.end()) {
            doc.sections.push_back({t, it->second});
        } else {
            doc.sections.push_back(
                {t, "(section could not be generated; decision " + decision.chosen +
                        " stands on the recorded evidence weights)"});
            doc.stubbed.push_back(t);
        }
    }
    return doc;
}

// ---- completeness -----------------------------------------------------------------

/// An item is addressed when at least half of its claim's content words (or
/// its tool name) appear somewhere in the document; conflicts likewise via
/// their descriptions.
inline CompletenessReport completeness_check(const ReasoningDocument& doc,
                                             const EvidenceBundle& bundle) {
    std::set<std::string> doc_words;
    std::string doc_text;
    for (const auto& s : doc.sections) doc_text += s.body + "\n";
    doc_words = text::content_words(doc_text);
    std::string doc_lower = text::to_lower(doc_text);

    auto coverage = [&](const std::string& claim) {
        auto words = text::content_words(claim);
        if (words.empty()) return 1.0;
        size_t hits = 0;
        for (const auto& w : words) hits += doc_words.count(w);
        return static_cast<double>(hits) / static_cast<double>(words.size());
    };

    CompletenessReport report;
    for (const auto& item : bundle.items) {
        if (item.origin.is_lalm() && coverage(item.claim) < 0.5)
            report.unreferenced_observations.push_back(item.id);
    }
    std::set<std::string> tools_seen;
    for (const auto& r : bundle.tool_results) {
        if (!r.ok || tools_seen.count(r.request.tool)) continue;
        tools_seen.insert(r.request.tool);
        if (doc_lower.find(text::to_lower(r.request.tool)) == std::string::npos &&
            coverage(r.request.tool) < 0.5)
            report.unreferenced_tools.push_back(r.request.tool);
    }
    for (const auto& c : bundle.contradictions)
        if (coverage(c.description) < 0.5) report.unaddressed_conflicts.push_back(c.id);
    for (const auto& d : bundle.disagreements)
        if (coverage(d.topic + " " + d.credibility_note) < 0.5)
            report.unaddressed_conflicts.push_back(d.id);

    report.pass = report.unreferenced_observations.empty() && report.unreferenced_tools.empty() &&
                  report.unaddressed_conflicts.empty();
    return report;
}

// ---- json --------------------------------------------------------------------------

inline void to_json(json& j, const ChoiceSupport& s) {
    j = json{{"weight", text::round4(s.weight)}, {"summary", s.summary}};
}

inline void from_json(const json& j, ChoiceSupport& s) {
    s.weight = j.value("weight", 0.0);
    s.summary = j.value("summary", "");
}

inline void to_json(json& j, const AnswerDecision& d) {
    j = json{{"chosen", d.chosen},
             {"confidence", text::round4(d.confidence)},
             {"per_choice", d.per_choice}};
}

inline void from_json(const json& j, AnswerDecision& d) {
    d.chosen = j.at("chosen").get<std::string>();
    d.confidence = j.at("confidence").get<double>();
    d.per_choice = j.value("per_choice", std::map<std::string, ChoiceSupport>{});
}

inline void to_json(json& j, const ReasoningSection& s) {
    j = json{{"title", s.title}, {"body", s.body}};
}

inline void from_json(const json& j, ReasoningSection& s) {
    s.title = j.at("title").get<std::string>();
    s.body = j.at("body").get<std::string>();
}

inline void to_json(json& j, const ReasoningDocument& d) {
    j = json{{"sections", d.sections}, {"stubbed", d.stubbed}};
}

inline void from_json(const json& j, ReasoningDocument& d) {
    d.sections = j.value("sections", std::vector<ReasoningSection>{});
    d.stubbed = j.value("stubbed", std::vector<std::string>{});
}

inline void to_json(json& j, const CompletenessReport& r) {
    j = json{{"unreferenced_observations", r.unreferenced_observations},
             {"unreferenced_tools", r.unreferenced_tools},
             {"unaddressed_conflicts", r.unaddressed_conflicts},
             {"pass", r.pass}};
}

inline void from_json(const json& j, CompletenessReport& r) {
    r.unreferenced_observations = j.value("unreferenced_observations", std::vector<std::string>{});
    r.unreferenced_tools = j.value("unreferenced_tools", std::vector<std::string>{});
    r.unaddressed_conflicts = j.value("unaddressed_conflicts", std::vector<std::string>{});
    r.pass = j.value("pass", false);
}

inline void to_json(json& j, const EvidenceBundle& b) {
    j = json{{"sample_id", b.sample_id},
             {"question", b.question},
             {"choices", b.choices},
             {"content", to_string(b.content)},
             {"items", b.items},
             {"tool_results", b.tool_results},
             {"contradictions", b.contradictions},
             {"disagreements", b.disagreements},
             {"source_reports", b.source_reports},
             {"redacted", b.redacted}};
}

inline void from_json(const json& j, EvidenceBundle& b) {
    b.sample_id = j.value("sample_id", "");
    b.question = j.at("question").get<std::string>();
    b.choices = j.at("choices").get<std::vector<std::string>>();
    b.content = content_from_string(j.value("content", "mixed"));
    b.items = j.value("items", std::vector<EvidenceItem>{});
    b.tool_results = j.value("tool_results", std::vector<ToolResult>{});
    b.contradictions = j.value("contradictions", std::vector<Contradiction>{});
    b.disagreements = j.value("disagreements", std::vector<Disagreement>{});
    b.source_reports = j.value("source_reports", std::vector<SourceReport>{});
    b.redacted = j.value("redacted", false);
}

}  // namespace fusewire
