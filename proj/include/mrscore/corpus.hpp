#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrscore/jsonl.hpp"
#include "mrscore/rubric.hpp"

namespace mrscore {

// Canonical data model: scored (ground-truth, candidate) report pairs and
// the accepted/rejected training pairs built from them. Values are immutable
// after construction and safe to share across readers.

enum class Tier { low, mid, high };
enum class Source { llm, mock, human, external };
enum class Scorer { llm, mock, human, rubric };

inline std::string to_string(Tier t) {
    switch (t) {
        case Tier::low: return "low";
        case Tier::mid: return "mid";
        default: return "high";
    }
}

inline Tier tier_from_string(const std::string& s) {
    if (s == "low") return Tier::low;
    if (s == "mid") return Tier::mid;
    if (s == "high") return Tier::high;
    throw std::invalid_argument("unknown tier: " + s);
}

inline std::string to_string(Source s) {
    switch (s) {
        case Source::llm: return "llm";
        case Source::mock: return "mock";
        case Source::human: return "human";
        default: return "external";
    }
}

inline Source source_from_string(const std::string& s) {
    if (s == "llm") return Source::llm;
    if (s == "mock") return Source::mock;
    if (s == "human") return Source::human;
    if (s == "external") return Source::external;
    throw std::invalid_argument("unknown source: " + s);
}

inline std::string to_string(Scorer s) {
    switch (s) {
        case Scorer::llm: return "llm";
        case Scorer::mock: return "mock";
        case Scorer::human: return "human";
        default: return "rubric";
    }
}

inline Scorer scorer_from_string(const std::string& s) {
    if (s == "llm") return Scorer::llm;
    if (s == "mock") return Scorer::mock;
    if (s == "human") return Scorer::human;
    if (s == "rubric") return Scorer::rubric;
    throw std::invalid_argument("unknown scorer: " + s);
}

struct Report {
    std::string id;
    std::string gt_id;
    std::string ground_truth;
    std::string candidate;
    std::optional<Tier> tier;
    Source source = Source::external;
};

struct ScoredReport {
    Report report;
    std::optional<ErrorVector> errors;
    int total_score = 0;
    Scorer scorer = Scorer::rubric;

    bool operator==(const ScoredReport& o) const {
        return report.id == o.report.id && report.gt_id == o.report.gt_id &&
               report.ground_truth == o.report.ground_truth &&
               report.candidate == o.report.candidate && report.tier == o.report.tier &&
               report.source == o.report.source && errors == o.errors &&
               total_score == o.total_score && scorer == o.scorer;
    }
};

// One accepted/rejected training pair sharing a ground truth. The margin is
// the score gap rescaled to (0, 1] so it is commensurate with reward
// differences, which live in (-1, 1).
struct ReportPair {
    std::string gt_id;
    std::string ground_truth;
    std::string accepted;
    std::string rejected;
    int accepted_score = 0;
    int rejected_score = 0;
    double margin = 0.0;
};

struct ValidationError : std::runtime_error {
    ValidationError(const std::string& id, const std::string& reason)
        : std::runtime_error("record '" + id + "': " + reason), record_id(id) {}
    std::string record_id;
};

// Checks every ScoredReport invariant: non-empty texts, score range, and
// when flags are present, exact agreement between total_score and the
// rubric recomputation.
inline void validate(const ScoredReport& r) {
    if (r.report.id.empty()) throw ValidationError("", "empty id");
    if (r.report.ground_truth.empty()) throw ValidationError(r.report.id, "empty ground_truth");
    if (r.report.candidate.empty()) throw ValidationError(r.report.id, "empty candidate");
    if (r.total_score < 0 || r.total_score > 100)
        throw ValidationError(r.report.id,
                              "total_score " + std::to_string(r.total_score) + " outside [0,100]");
    if (r.errors) {
        int expected = total_score(*r.errors);
        if (expected != r.total_score)
            throw ValidationError(r.report.id, "total_score " + std::to_string(r.total_score) +
                                                   " does not match rubric recomputation " +
                                                   std::to_string(expected));
    }
}

inline Json to_json(const ScoredReport& r) {
    Json j;
    j["id"] = r.report.id;
    j["gt_id"] = r.report.gt_id;
    if (r.report.tier) j["tier"] = to_string(*r.report.tier);
    j["ground_truth"] = r.report.ground_truth;
    j["candidate"] = r.report.candidate;
    j["source"] = to_string(r.report.source);
    if (r.errors) {
        Json e;
        for (std::size_t i = 0; i < kNumCriteria; ++i)
            e[std::string(kCriterionNames[i])] = (*r.errors)[i];
        j["errors"] = e;
    }
    j["total_score"] = r.total_score;
    j["scorer"] = to_string(r.scorer);
    return j;
}

inline ScoredReport scored_report_from_json(const Json& j) {
    ScoredReport r;
    try {
        r.report.id = j.at("id").get<std::string>();
        r.report.gt_id = j.at("gt_id").get<std::string>();
        r.report.ground_truth = j.at("ground_truth").get<std::string>();
        r.report.candidate = j.at("candidate").get<std::string>();
        if (j.contains("tier")) r.report.tier = tier_from_string(j.at("tier").get<std::string>());
        if (j.contains("source"))
            r.report.source = source_from_string(j.at("source").get<std::string>());
        if (j.contains("errors")) {
            const Json& e = j.at("errors");
            ErrorVector v;
            for (std::size_t i = 0; i < kNumCriteria; ++i) {
                int flag = e.at(std::string(kCriterionNames[i])).get<int>();
                if (flag != 0 && flag != 1)
                    throw ValidationError(r.report.id,
                                          std::string(kCriterionNames[i]) + " flag must be 0 or 1");
                v[i] = flag;
            }
            r.errors = v;
        }
        r.total_score = j.at("total_score").get<int>();
        r.scorer = scorer_from_string(j.at("scorer").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(j.value("id", std::string("?")), e.what());
    }
    return r;
}

// Loads and validates a dataset; order preserved, ids must be unique.
inline std::vector<ScoredReport> load_dataset(const std::string& path) {
    std::vector<ScoredReport> records;
    std::map<std::string, std::size_t> seen;
    for_each_jsonl(path, [&](const Json& j, std::size_t line_no) {
        ScoredReport r;
        try {
            r = scored_report_from_json(j);
            validate(r);
        } catch (const ValidationError& e) {
            throw JsonlError(path, line_no, e.what());
        }
        auto [it, inserted] = seen.emplace(r.report.id, line_no);
        if (!inserted)
            throw JsonlError(path, line_no,
                             "duplicate id '" + r.report.id + "' (first seen on line " +
                                 std::to_string(it->second) + ")");
        records.push_back(std::move(r));
    });
    return records;
}

inline void save_dataset(const std::vector<ScoredReport>& records, const std::string& path) {
    std::vector<Json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(to_json(r));
    write_jsonl(path, rows);
}

// All strictly ordered accepted/rejected combinations within each gt_id
// group (ties produce nothing). Output is sorted by gt_id, then falling
// margin, then falling accepted score, then input position.
inline std::vector<ReportPair> make_pairs(const std::vector<ScoredReport>& records) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i)
        groups[records[i].report.gt_id].push_back(i);

    std::vector<ReportPair> pairs;
    for (const auto& [gt_id, members] : groups) {
        std::vector<ReportPair> group_pairs;
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const ScoredReport& ra = records[members[a]];
                const ScoredReport& rb = records[members[b]];
                if (ra.total_score == rb.total_score) continue;
                const ScoredReport& acc = ra.total_score > rb.total_score ? ra : rb;
                const ScoredReport& rej = ra.total_score > rb.total_score ? rb : ra;
                ReportPair p;
                p.gt_id = gt_id;
                p.ground_truth = acc.report.ground_truth;
                p.accepted = acc.report.candidate;
                p.rejected = rej.report.candidate;
                p.accepted_score = acc.total_score;
                p.rejected_score = rej.total_score;
                p.margin = static_cast<double>(acc.total_score - rej.total_score) / 100.0;
                group_pairs.push_back(std::move(p));
            }
        }
        std::stable_sort(group_pairs.begin(), group_pairs.end(),
                         [](const ReportPair& x, const ReportPair& y) {
                             if (x.margin != y.margin) return x.margin > y.margin;
                             return x.accepted_score > y.accepted_score;
                         });
        pairs.insert(pairs.end(), group_pairs.begin(), group_pairs.end());
    }
    return pairs;
}

inline Json to_json(const ReportPair& p) {
    Json j;
    j["gt_id"] = p.gt_id;
    j["ground_truth"] = p.ground_truth;
    j["accepted"] = p.accepted;
    j["rejected"] = p.rejected;
    j["accepted_score"] = p.accepted_score;
    j["rejected_score"] = p.rejected_score;
    j["margin"] = p.margin;
    return j;
}

inline ReportPair pair_from_json(const Json& j) {
    ReportPair p;
    p.gt_id = j.at("gt_id").get<std::string>();
    p.ground_truth = j.at("ground_truth").get<std::string>();
    p.accepted = j.at("accepted").get<std::string>();
    p.rejected = j.at("rejected").get<std::string>();
    p.accepted_score = j.at("accepted_score").get<int>();
    p.rejected_score = j.at("rejected_score").get<int>();
    p.margin = j.at("margin").get<double>();
    return p;
}

inline void save_pairs(const std::vector<ReportPair>& pairs, const std::string& path) {
    std::vector<Json> rows;
    rows.reserve(pairs.size());
    for (const auto& p : pairs) rows.push_back(to_json(p));
    write_jsonl(path, rows);
}

inline std::vector<ReportPair> load_pairs(const std::string& path) {
    std::vector<ReportPair> pairs;
    for_each_jsonl(path, [&](const Json& j, std::size_t line_no) {
        ReportPair p;
        try {
            p = pair_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw JsonlError(path, line_no, e.what());
        }
        if (p.accepted_score <= p.rejected_score)
            throw JsonlError(path, line_no, "accepted_score must exceed rejected_score");
        double expected = static_cast<double>(p.accepted_score - p.rejected_score) / 100.0;
        if (std::fabs(p.margin - expected) > 1e-12)
            throw JsonlError(path, line_no,
                             "margin " + std::to_string(p.margin) +
                                 " is not the score difference over 100");
        pairs.push_back(std::move(p));
    });
    return pairs;
}

}  // namespace mrscore
