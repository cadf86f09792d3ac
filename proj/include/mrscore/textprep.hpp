#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mrscore {

using TokenSequence = std::vector<std::string>;

// Shared tokenizer for every metric and feature extractor: lowercase,
// whitespace split, leading/trailing punctuation stripped. Internal
// hyphens, apostrophes and digits survive ("x-ray", "t2-weighted").
inline TokenSequence tokenize(std::string_view text) {
    TokenSequence tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::size_t lo = start, hi = i;
        while (lo < hi && std::ispunct(static_cast<unsigned char>(text[lo]))) ++lo;
        while (hi > lo && std::ispunct(static_cast<unsigned char>(text[hi - 1]))) --hi;
        if (lo == hi) continue;
        std::string tok;
        tok.reserve(hi - lo);
        for (std::size_t k = lo; k < hi; ++k)
            tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[k]))));
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

// N-grams as a counted multiset. Grams are the joined tokens with a
// 0x1f separator, which cannot occur inside a token.
using NgramCounts = std::map<std::string, int>;

inline std::string join_gram(const TokenSequence& tokens, std::size_t pos, std::size_t n) {
    std::string g = tokens[pos];
    for (std::size_t k = 1; k < n; ++k) {
        g.push_back('\x1f');
        g += tokens[pos + k];
    }
    return g;
}

inline NgramCounts ngrams(const TokenSequence& tokens, std::size_t n) {
    if (n == 0) throw std::invalid_argument("ngram order must be >= 1");
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[join_gram(tokens, i, n)];
    return counts;
}

// ---------------------------------------------------------------------------
// Porter stemmer (the classic 1980 algorithm, steps 1a-5b). Operates on
// lowercase tokens; anything with a non-letter is returned unchanged.
// ---------------------------------------------------------------------------
namespace porter {

inline bool is_vowel_at(const std::string& w, std::size_t i) {
    char c = w[i];
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return true;
    // 'y' is a vowel when preceded by a consonant
    if (c == 'y' && i > 0) return !is_vowel_at(w, i - 1);
    return false;
}

// Measure m of the stem: number of VC sequences in [C](VC)^m[V].
inline int measure(const std::string& w, std::size_t len) {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < len; ++i) {
        bool v = is_vowel_at(w, i);
        if (!v && prev_vowel) ++m;
        prev_vowel = v;
    }
    return m;
}

inline bool contains_vowel(const std::string& w, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i)
        if (is_vowel_at(w, i)) return true;
    return false;
}

inline bool ends_double_consonant(const std::string& w) {
    std::size_t n = w.size();
    if (n < 2) return false;
    return w[n - 1] == w[n - 2] && !is_vowel_at(w, n - 1);
}

// *o: stem ends cvc where the final c is not w, x or y.
inline bool ends_cvc(const std::string& w) {
    std::size_t n = w.size();
    if (n < 3) return false;
    if (is_vowel_at(w, n - 3) || !is_vowel_at(w, n - 2) || is_vowel_at(w, n - 1)) return false;
    char c = w[n - 1];
    return c != 'w' && c != 'x' && c != 'y';
}

inline bool has_suffix(const std::string& w, std::string_view s) {
    return w.size() >= s.size() && std::string_view(w).substr(w.size() - s.size()) == s;
}

// Replace suffix when the measure of the remaining stem is > min_m.
inline bool replace_if(std::string& w, std::string_view suf, std::string_view rep, int min_m) {
    if (!has_suffix(w, suf)) return false;
    std::size_t stem_len = w.size() - suf.size();
    if (measure(w, stem_len) <= min_m) return true;  // matched, condition failed: stop
    w.resize(stem_len);
    w += rep;
    return true;
}

inline void step1a(std::string& w) {
    if (has_suffix(w, "sses")) {
        w.resize(w.size() - 2);
    } else if (has_suffix(w, "ies")) {
        w.resize(w.size() - 2);
    } else if (has_suffix(w, "ss")) {
        // keep
    } else if (has_suffix(w, "s")) {
        w.resize(w.size() - 1);
    }
}

inline void step1b(std::string& w) {
    bool second = false;
    if (has_suffix(w, "eed")) {
        if (measure(w, w.size() - 3) > 0) w.resize(w.size() - 1);
    } else if (has_suffix(w, "ed") && contains_vowel(w, w.size() - 2)) {
        w.resize(w.size() - 2);
        second = true;
    } else if (has_suffix(w, "ing") && contains_vowel(w, w.size() - 3)) {
        w.resize(w.size() - 3);
        second = true;
    }
    if (second) {
        if (has_suffix(w, "at") || has_suffix(w, "bl") || has_suffix(w, "iz")) {
            w.push_back('e');
        } else if (ends_double_consonant(w)) {
            char c = w.back();
            if (c != 'l' && c != 's' && c != 'z') w.resize(w.size() - 1);
        } else if (measure(w, w.size()) == 1 && ends_cvc(w)) {
            w.push_back('e');
        }
    }
}

inline void step1c(std::string& w) {
    if (has_suffix(w, "y") && contains_vowel(w, w.size() - 1)) w.back() = 'i';
}

inline void step2(std::string& w) {
    static const std::pair<std::string_view, std::string_view> rules[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
    };
    for (const auto& [suf, rep] : rules)
        if (replace_if(w, suf, rep, 0)) return;
}

inline void step3(std::string& w) {
    static const std::pair<std::string_view, std::string_view> rules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    for (const auto& [suf, rep] : rules)
        if (replace_if(w, suf, rep, 0)) return;
}

inline void step4(std::string& w) {
    static const std::string_view sufs[] = {
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
        "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    };
    for (std::string_view suf : sufs) {
        if (!has_suffix(w, suf)) continue;
        std::size_t stem_len = w.size() - suf.size();
        if (suf == "ion") {
            if (stem_len == 0 || (w[stem_len - 1] != 's' && w[stem_len - 1] != 't')) return;
        }
        if (measure(w, stem_len) > 1) w.resize(stem_len);
        return;
    }
}

inline void step5a(std::string& w) {
    if (!has_suffix(w, "e")) return;
    int m = measure(w, w.size() - 1);
    if (m > 1) {
        w.resize(w.size() - 1);
    } else if (m == 1) {
        std::string stem = w.substr(0, w.size() - 1);
        if (!ends_cvc(stem)) w.resize(w.size() - 1);
    }
}

inline void step5b(std::string& w) {
    if (w.size() >= 2 && w.back() == 'l' && w[w.size() - 2] == 'l' && measure(w, w.size()) > 1)
        w.resize(w.size() - 1);
}

}  // namespace porter

namespace porter {

inline std::string single_pass(std::string w) {
    step1a(w);
    step1b(w);
    step1c(w);
    step2(w);
    step3(w);
    step4(w);
    step5a(w);
    step5b(w);
    return w;
}

}  // namespace porter

// Porter passes applied to a fixed point. A single pass is not idempotent
// (a stripped suffix can expose another removable one, e.g. effused ->
// effus -> effu), and stem matching wants stem(stem(x)) == stem(x).
inline std::string stem(const std::string& token) {
    if (token.size() <= 2) return token;
    for (char c : token)
        if (c < 'a' || c > 'z') return token;
    std::string w = token;
    for (int pass = 0; pass < 8; ++pass) {
        std::string next = porter::single_pass(w);
        if (next == w) break;
        w = std::move(next);
    }
    return w;
}

}  // namespace mrscore
