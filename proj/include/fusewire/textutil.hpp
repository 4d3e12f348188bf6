// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared lexical machinery: tokenization, light stemming, Jaccard overlap,
// quantity extraction and negation checks. Every heuristic text comparison in
// the pipeline (claim dedup, keyword reclassification, completeness check)
// goes through this header so they all agree on what a "content word" is.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fusewire::text {

inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

/// Lowercase word tokens; punctuation is dropped except '.' inside numbers.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back())) &&
                   i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            cur.push_back('.');
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",    "be",   "been", "being", "but",
        "by",   "can",  "did",  "do",   "does", "for",   "from", "had",  "has",   "have",
        "he",   "her",  "his",  "i",    "if",   "in",    "into", "is",   "it",    "its",
        "may",  "more", "most", "no",   "not",  "of",    "on",   "or",   "our",   "she",
        "so",   "some", "that", "the",  "their", "there", "they", "this", "to",    "very",
        "was",  "we",   "were", "will", "with",  "would", "you",  "your",
    };
    return words;
}

inline bool is_stopword(const std::string& w) { return stopwords().count(w) > 0; }

/// Cheap suffix stemmer, enough to make "speakers"/"speaker" and
/// "detected"/"detect" collide. Not a full Porter stemmer on purpose.
inline std::string stem(std::string w) {
    auto ends_with = [&](std::string_view suf) {
        return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    };
    auto chop = [&](size_t n) { w.erase(w.size() - n); };
    if (ends_with("sses")) {
        chop(2);
    } else if (ends_with("ies") && w.size() > 4) {
        chop(3);
        w.push_back('y');
    } else if (ends_with("ing") && w.size() > 5) {
        chop(3);
    } else if (ends_with("ed") && w.size() > 4) {
        chop(2);
    } else if (ends_with("s") && !ends_with("ss") && !ends_with("us") && w.size() > 3) {
        chop(1);
    }
    return w;
}

inline bool is_number_token(const std::string& t, double* value = nullptr) {
    static const std::map<std::string, double> words = {
        {"zero", 0},   {"one", 1},   {"two", 2},    {"three", 3},   {"four", 4},
        {"five", 5},   {"six", 6},   {"seven", 7},  {"eight", 8},   {"nine", 9},
        {"ten", 10},   {"eleven", 11}, {"twelve", 12}, {"thirteen", 13}, {"fourteen", 14},
        {"fifteen", 15}, {"sixteen", 16}, {"seventeen", 17}, {"eighteen", 18},
        {"nineteen", 19}, {"twenty", 20},
    };
    if (auto it = words.find(t); it != words.end()) {
        if (value) *value = it->second;
        return true;
    }
    if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) return false;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return false;
    if (value) *value = v;
    return true;
}

/// Stemmed non-stopword, non-numeric tokens.
inline std::set<std::string> content_words(std::string_view s) {
    std::set<std::string> out;
    for (auto& t : tokenize(s)) {
        if (is_stopword(t) || is_number_token(t)) continue;
        out.insert(stem(t));
    }
    return out;
}

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double claim_similarity(std::string_view a, std::string_view b) {
    return jaccard(content_words(a), content_words(b));
}

/// number -> following (or preceding) content word, e.g. "three speakers"
/// yields {"speaker" -> {3}}. The head is what makes two numbers comparable.
inline std::map<std::string, std::set<double>> quantities(std::string_view s) {
    std::map<std::string, std::set<double>> out;
    auto tokens = tokenize(s);
    for (size_t i = 0; i < tokens.size(); ++i) {
        double v = 0;
        if (!is_number_token(tokens[i], &v)) continue;
        std::string head;
        for (size_t j = i + 1; j < std::min(tokens.size(), i + 3); ++j) {
            if (!is_stopword(tokens[j]) && !is_number_token(tokens[j])) {
                head = stem(tokens[j]);
                break;
            }
        }
        if (head.empty() && i > 0 && !is_stopword(tokens[i - 1]) && !is_number_token(tokens[i - 1]))
            head = stem(tokens[i - 1]);
        if (!head.empty()) out[head].insert(v);
    }
    return out;
}

/// True when the two texts give different values for the same counted thing.
inline bool numeric_mismatch(std::string_view a, std::string_view b) {
    auto qa = quantities(a);
    auto qb = quantities(b);
    for (const auto& [head, va] : qa) {
        auto it = qb.find(head);
        if (it == qb.end()) continue;
        for (double x : va)
            for (double y : it->second)
                if (std::fabs(x - y) > 1e-9) return true;
    }
    return false;
}

inline bool is_negation_token(const std::string& t) {
    return t == "no" || t == "not" || t == "without" || t == "absence" || t == "absent" ||
           t == "none" || t == "never" || t == "lacks" || t == "lacking";
}

inline bool mentions_negated(std::string_view s, const std::string& stemmed_term) {
    auto tokens = tokenize(s);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (stem(tokens[i]) != stemmed_term) continue;
        size_t lo = i >= 3 ? i - 3 : 0;
        for (size_t j = lo; j < i; ++j)
            if (is_negation_token(tokens[j])) return true;
    }
    return false;
}

/// Negated shared head term: one text asserts a term the other explicitly negates.
inline bool negation_conflict(std::string_view a, std::string_view b) {
    auto ca = content_words(a);
    auto cb = content_words(b);
    for (const auto& t : ca) {
        if (!cb.count(t)) continue;
        bool na = mentions_negated(a, t);
        bool nb = mentions_negated(b, t);
        if (na != nb) return true;
    }
    return false;
}

/// True when the text reads as a non-detection ("no piano detected", "absence of ...").
inline bool is_absence_claim(std::string_view s) {
    auto tokens = tokenize(s);
    for (const auto& t : tokens)
        if (is_negation_token(t)) return true;
    return false;
}

/// Either text contradicts the other: numeric mismatch or negated shared term.
inline bool conflicting(std::string_view a, std::string_view b) {
    return numeric_mismatch(a, b) || negation_conflict(a, b);
}

/// Lexical relevance of a claim to the question and choices, in [0.3, 0.9].
inline double lexical_relevance(std::string_view claim, std::string_view question,
                                const std::vector<std::string>& choices) {
    auto cw = content_words(claim);
    if (cw.empty()) return 0.5;
    std::set<std::string> target = content_words(question);
    for (const auto& c : choices)
        for (const auto& w : content_words(c)) target.insert(w);
    size_t hits = 0;
    for (const auto& w : cw) hits += target.count(w);
    double coverage = static_cast<double>(hits) / static_cast<double>(cw.size());
    return 0.3 + 0.6 * coverage;
}

inline std::string normalize_whitespace(std::string_view s) {
    std::string out;
    bool in_space = true;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

/// Scores are serialized at 4 decimal places; internal arithmetic stays unrounded.
inline double round4(double x) {
    double r = std::round(x * 10000.0) / 10000.0;
    return r == 0.0 ? 0.0 : r;  // normalize -0
}

}  // namespace fusewire::text
