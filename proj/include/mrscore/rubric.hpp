#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrscore {

// Error-based scoring rubric for generated radiology reports: seven binary
// error flags, each with a point deduction, total = 100 - sum of deductions.
// Criterion order is fixed; the names below are also the canonical JSON keys
// of the "errors" object in dataset records.

constexpr std::size_t kNumCriteria = 7;

constexpr std::array<std::string_view, kNumCriteria> kCriterionNames = {
    "impression_consistency",
    "impression_organ",
    "description_of_lesion",
    "clinical_history",
    "completeness",
    "grammar",
    "medical_terminology",
};

enum class Criterion : std::size_t {
    impression_consistency = 0,
    impression_organ = 1,
    description_of_lesion = 2,
    clinical_history = 3,
    completeness = 4,
    grammar = 5,
    medical_terminology = 6,
};

inline std::string_view criterion_name(Criterion c) {
    return kCriterionNames[static_cast<std::size_t>(c)];
}

// Returns kNumCriteria if the name is not a canonical criterion key.
inline std::size_t criterion_index(std::string_view name) {
    for (std::size_t i = 0; i < kNumCriteria; ++i)
        if (kCriterionNames[i] == name) return i;
    return kNumCriteria;
}

// One binary flag per criterion; 1 marks that the error occurred.
struct ErrorVector {
    std::array<int, kNumCriteria> flags{};

    int& operator[](std::size_t i) { return flags[i]; }
    int operator[](std::size_t i) const { return flags[i]; }
    int& operator[](Criterion c) { return flags[static_cast<std::size_t>(c)]; }
    int operator[](Criterion c) const { return flags[static_cast<std::size_t>(c)]; }

    bool operator==(const ErrorVector&) const = default;

    void set(Criterion c) { flags[static_cast<std::size_t>(c)] = 1; }

    static ErrorVector from_flags(const std::array<int, kNumCriteria>& f) {
        for (int v : f)
            if (v != 0 && v != 1)
                throw std::invalid_argument("error flag must be 0 or 1");
        return ErrorVector{f};
    }
};

// Per-criterion deductions. Construction rejects weight sets whose sum
// exceeds 100 so the total score cannot go below zero.
class RubricWeights {
  public:
    explicit RubricWeights(const std::array<int, kNumCriteria>& w) : weights_(w) {
        int sum = 0;
        for (int v : w) {
            if (v < 0) throw std::invalid_argument("rubric weight must be non-negative");
            sum += v;
        }
        if (sum > 100)
            throw std::invalid_argument("rubric weights sum to " + std::to_string(sum) +
                                        ", must be <= 100");
    }

    int operator[](std::size_t i) const { return weights_[i]; }
    int operator[](Criterion c) const { return weights_[static_cast<std::size_t>(c)]; }
    const std::array<int, kNumCriteria>& values() const { return weights_; }

    int sum() const {
        int s = 0;
        for (int v : weights_) s += v;
        return s;
    }

    bool operator==(const RubricWeights&) const = default;

  private:
    std::array<int, kNumCriteria> weights_;
};

// Canonical weights: impression consistency 30, impression organ 20,
// description of lesion 20, clinical history 10, completeness 10,
// grammar 5, medical terminology 5. Sum is exactly 100.
inline RubricWeights default_weights() {
    return RubricWeights({30, 20, 20, 10, 10, 5, 5});
}

// total = 100 - sum of weights over raised flags; always in [0, 100]
// for weights accepted by RubricWeights.
inline int total_score(const ErrorVector& errors, const RubricWeights& weights) {
    int deduction = 0;
    for (std::size_t i = 0; i < kNumCriteria; ++i) {
        if (errors[i] != 0 && errors[i] != 1)
            throw std::invalid_argument("error flag must be 0 or 1");
        deduction += errors[i] * weights[i];
    }
    return 100 - deduction;
}

inline int total_score(const ErrorVector& errors) {
    return total_score(errors, default_weights());
}

// (criterion name, deduction) for every raised flag, in canonical order.
inline std::vector<std::pair<std::string, int>> score_breakdown(const ErrorVector& errors,
                                                                const RubricWeights& weights) {
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t i = 0; i < kNumCriteria; ++i)
        if (errors[i]) out.emplace_back(std::string(kCriterionNames[i]), weights[i]);
    return out;
}

}  // namespace mrscore
