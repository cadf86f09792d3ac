#pragma once

// Independent reference implementations used only by tests. Each one is
// written from the definition, on purpose via a different route than the
// library code it checks.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace oracles {

// Rubric total: direct term-by-term sum.
inline int rubric_total(const std::array<int, 7>& flags, const std::array<int, 7>& weights) {
    int total = 100;
    total -= flags[0] * weights[0];
    total -= flags[1] * weights[1];
    total -= flags[2] * weights[2];
    total -= flags[3] * weights[3];
    total -= flags[4] * weights[4];
    total -= flags[5] * weights[5];
    total -= flags[6] * weights[6];
    return total;
}

// LCS by exhaustive subsequence enumeration over the shorter sequence.
// Only usable for lengths <= ~20.
inline std::size_t lcs_exhaustive(const std::vector<std::string>& a,
                                  const std::vector<std::string>& b) {
    const std::vector<std::string>& s = a.size() <= b.size() ? a : b;
    const std::vector<std::string>& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << s.size()); ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (mask & (std::size_t{1} << i)) sub.push_back(s[i]);
        // is sub a subsequence of t?
        std::size_t j = 0;
        for (std::size_t i = 0; i < t.size() && j < sub.size(); ++i)
            if (t[i] == sub[j]) ++j;
        if (j == sub.size()) best = std::max(best, sub.size());
    }
    return best;
}

// Kendall tau-b by brute-force O(n^2) pair counting.
inline double kendall_tau_b_bruteforce(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) {
                ++tie_x;
                ++tie_y;
            } else if (dx == 0) {
                ++tie_x;
            } else if (dy == 0) {
                ++tie_y;
            } else if ((dx > 0 && dy > 0) || (dx < 0 && dy < 0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    double n0 = static_cast<double>(n) * (n - 1) / 2.0;
    return (concordant - discordant) / std::sqrt((n0 - tie_x) * (n0 - tie_y));
}

// Average ranks without sorting: rank = 1 + #smaller + (#equal - 1)/2.
inline std::vector<double> ranks_by_counting(std::span<const double> v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double smaller = 0, equal = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++smaller;
            if (v[j] == v[i]) ++equal;
        }
        r[i] = 1.0 + smaller + (equal - 1.0) / 2.0;
    }
    return r;
}

// Spearman rho via the explicit covariance formula on counted ranks.
inline double spearman_bruteforce(std::span<const double> x, std::span<const double> y) {
    std::vector<double> rx = ranks_by_counting(x);
    std::vector<double> ry = ranks_by_counting(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (double v : rx) mx += v;
    for (double v : ry) my += v;
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    return cov / std::sqrt(vx * vy);
}

}  // namespace oracles
