#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrscore/textprep.hpp"

namespace mrscore {

// Baseline n-gram metrics computed over the shared tokenizer, so scores
// are comparable across metrics. Each returns the headline value plus the
// named sub-values that went into it.

struct MetricScore {
    double value = 0.0;
    std::map<std::string, double> components;
};

constexpr double kBleuEpsilon = 1e-9;

// BLEU-4: geometric mean of clipped modified n-gram precisions (n = 1..4)
// times the brevity penalty. A precision whose clipped match count is zero
// (or whose order exceeds the candidate length) is smoothed to epsilon so
// short texts keep a nonzero, rankable score.
inline MetricScore bleu4(const std::string& candidate, const std::vector<std::string>& references) {
    if (references.empty()) throw std::invalid_argument("bleu4 needs at least one reference");
    MetricScore out;

    TokenSequence cand = tokenize(candidate);
    std::vector<TokenSequence> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(tokenize(r));

    if (cand.empty()) {
        out.value = 0.0;
        out.components["degenerate"] = 1.0;
        return out;
    }

    // effective reference length: closest to the candidate, shorter wins ties
    std::size_t c = cand.size();
    std::size_t r = refs[0].size();
    for (const auto& ref : refs) {
        auto diff = [&](std::size_t len) {
            return len > c ? len - c : c - len;
        };
        if (diff(ref.size()) < diff(r) || (diff(ref.size()) == diff(r) && ref.size() < r))
            r = ref.size();
    }

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        NgramCounts cand_grams = ngrams(cand, n);
        double total = 0.0;
        for (const auto& [g, cnt] : cand_grams) total += cnt;

        NgramCounts ref_max;
        for (const auto& ref : refs)
            for (const auto& [g, cnt] : ngrams(ref, n)) ref_max[g] = std::max(ref_max[g], cnt);

        double matched = 0.0;
        for (const auto& [g, cnt] : cand_grams) {
            auto it = ref_max.find(g);
            if (it != ref_max.end()) matched += std::min(cnt, it->second);
        }

        double p;
        if (total == 0.0) {
            p = kBleuEpsilon;
        } else if (matched == 0.0) {
            p = kBleuEpsilon / total;
        } else {
            p = matched / total;
        }
        out.components["p" + std::to_string(n)] = p;
        log_sum += std::log(p);
    }

    double bp = 1.0;
    if (c < r) bp = std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    out.components["brevity_penalty"] = bp;
    out.components["candidate_len"] = static_cast<double>(c);
    out.components["reference_len"] = static_cast<double>(r);
    out.value = bp * std::exp(log_sum / 4.0);
    return out;
}

// Length of the longest common subsequence, classic DP.
inline std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

// ROUGE-L F1 with precision/recall components.
inline MetricScore rouge_l(const std::string& candidate, const std::string& reference) {
    MetricScore out;
    TokenSequence cand = tokenize(candidate);
    TokenSequence ref = tokenize(reference);
    double lcs = static_cast<double>(lcs_length(cand, ref));
    double p = cand.empty() ? 0.0 : lcs / static_cast<double>(cand.size());
    double r = ref.empty() ? 0.0 : lcs / static_cast<double>(ref.size());
    double f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    out.components["lcs"] = lcs;
    out.components["precision"] = p;
    out.components["recall"] = r;
    out.value = f1;
    return out;
}

// METEOR-lite: unigram alignment in two stages (exact, then stemmed),
// harmonic mean weighted toward recall, chunk fragmentation penalty.
// No synonym stage, so scores sit slightly below full METEOR.
inline MetricScore meteor_lite(const std::string& candidate, const std::string& reference) {
    MetricScore out;
    TokenSequence cand = tokenize(candidate);
    TokenSequence ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return out;

    const std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> match(cand.size(), none);  // cand idx -> ref idx
    std::vector<bool> ref_used(ref.size(), false);

    // stage 1: exact matches, greedy left to right
    for (std::size_t i = 0; i < cand.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && cand[i] == ref[j]) {
                match[i] = j;
                ref_used[j] = true;
                break;
            }
        }
    }
    // stage 2: stem matches among the leftovers
    std::vector<std::string> ref_stems(ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) ref_stems[j] = stem(ref[j]);
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (match[i] != none) continue;
        std::string cs = stem(cand[i]);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && cs == ref_stems[j]) {
                match[i] = j;
                ref_used[j] = true;
                break;
            }
        }
    }

    double m = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i)
        if (match[i] != none) m += 1.0;
    if (m == 0.0) return out;

    // chunks: maximal runs of adjacent candidate positions mapped to
    // adjacent reference positions
    double chunks = 0.0;
    std::size_t prev_i = none, prev_j = none;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (match[i] == none) continue;
        if (prev_i == none || i != prev_i + 1 || match[i] != prev_j + 1) chunks += 1.0;
        prev_i = i;
        prev_j = match[i];
    }

    double p = m / static_cast<double>(cand.size());
    double r = m / static_cast<double>(ref.size());
    double f_mean = 10.0 * p * r / (r + 9.0 * p);
    double penalty = 0.5 * std::pow(chunks / m, 3.0);
    out.components["matches"] = m;
    out.components["chunks"] = chunks;
    out.components["precision"] = p;
    out.components["recall"] = r;
    out.components["f_mean"] = f_mean;
    out.components["penalty"] = penalty;
    out.value = f_mean * (1.0 - penalty);
    return out;
}

// Document-frequency table for CIDEr. idf(g) = ln(N / df(g)); grams never
// seen in the corpus get ln(N + 1).
class IdfTable {
  public:
    explicit IdfTable(const std::vector<std::string>& reference_corpus) {
        if (reference_corpus.empty()) throw std::invalid_argument("idf corpus must be non-empty");
        n_docs_ = reference_corpus.size();
        for (const auto& doc : reference_corpus) {
            TokenSequence toks = tokenize(doc);
            std::map<std::string, int> seen;
            for (std::size_t n = 1; n <= 4; ++n)
                for (const auto& [g, cnt] : ngrams(toks, n)) seen[g] = 1;
            for (const auto& [g, one] : seen) ++df_[g];
        }
    }

    double idf(const std::string& gram) const {
        auto it = df_.find(gram);
        if (it == df_.end()) return std::log(static_cast<double>(n_docs_) + 1.0);
        return std::log(static_cast<double>(n_docs_) / static_cast<double>(it->second));
    }

    std::size_t corpus_size() const { return n_docs_; }

  private:
    std::size_t n_docs_ = 0;
    std::map<std::string, int> df_;
};

inline IdfTable build_idf(const std::vector<std::string>& reference_corpus) {
    return IdfTable(reference_corpus);
}

// CIDEr: per order n = 1..4, cosine similarity of tf-idf n-gram vectors
// against each reference, averaged over references then orders, scaled
// by 10. Zero vectors contribute zero similarity.
inline MetricScore cider(const std::string& candidate, const std::vector<std::string>& references,
                         const IdfTable& idf) {
    if (references.empty()) throw std::invalid_argument("cider needs at least one reference");
    MetricScore out;
    TokenSequence cand = tokenize(candidate);
    std::vector<TokenSequence> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(tokenize(r));

    auto weighted = [&](const TokenSequence& toks, std::size_t n) {
        std::map<std::string, double> v;
        for (const auto& [g, cnt] : ngrams(toks, n)) v[g] = static_cast<double>(cnt) * idf.idf(g);
        return v;
    };
    auto norm = [](const std::map<std::string, double>& v) {
        double s = 0.0;
        for (const auto& [g, w] : v) s += w * w;
        return std::sqrt(s);
    };

    double order_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        auto cv = weighted(cand, n);
        double cn = norm(cv);
        double ref_sum = 0.0;
        for (const auto& ref : refs) {
            auto rv = weighted(ref, n);
            double rn = norm(rv);
            if (cn == 0.0 || rn == 0.0) continue;
            double dot = 0.0;
            for (const auto& [g, w] : cv) {
                auto it = rv.find(g);
                if (it != rv.end()) dot += w * it->second;
            }
            ref_sum += dot / (cn * rn);
        }
        double cider_n = ref_sum / static_cast<double>(refs.size());
        out.components["cider" + std::to_string(n)] = cider_n;
        order_sum += cider_n;
    }
    out.value = 10.0 * order_sum / 4.0;
    return out;
}

}  // namespace mrscore
