#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrscore {

// Rank-correlation statistics used to validate metric/human alignment:
// Kendall's tau-b (tie-corrected) and Spearman's rho, each with a
// two-sided p-value. Both are pure functions of the two input vectors.

enum class CorrMethod { kendall_tau_b, spearman };
enum class PMethod { normal_approx, t_approx, exact_permutation };

struct CorrelationResult {
    double coefficient = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    CorrMethod method = CorrMethod::kendall_tau_b;
    PMethod p_method = PMethod::normal_approx;
};

namespace detail {

inline void check_inputs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("correlation inputs differ in length: " +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    if (x.size() < 2) throw std::invalid_argument("correlation needs at least 2 observations");
}

inline bool all_tied(std::span<const double> v) {
    for (double a : v)
        if (a != v[0]) return false;
    return true;
}

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double fpmin = std::numeric_limits<double>::min() / eps;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) <= eps) break;
    }
    return h;
}

inline double ibeta_reg(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail of the standard normal.
inline double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / 1.4142135623730951);
}

// Two-sided tail of Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    return ibeta_reg(df / 2.0, 0.5, df / (df + t * t));
}

// Discordant-pair count via merge sort over y after sorting by (x, y):
// every exchange crossing the merge boundary is one discordant pair.
inline std::uint64_t merge_count_swaps(std::vector<double>& v, std::vector<double>& buf,
                                       std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t swaps = merge_count_swaps(v, buf, lo, mid) + merge_count_swaps(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
              buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

struct TieStats {
    double pair_sum = 0.0;      // sum t*(t-1)/2
    double var_sum = 0.0;       // sum t*(t-1)*(2t+5)
    double triple_sum = 0.0;    // sum t*(t-1)*(t-2)
};

template <class Key>
inline TieStats tie_stats(std::vector<Key> v) {
    std::sort(v.begin(), v.end());
    TieStats s;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        double t = static_cast<double>(j - i);
        s.pair_sum += t * (t - 1.0) / 2.0;
        s.var_sum += t * (t - 1.0) * (2.0 * t + 5.0);
        s.triple_sum += t * (t - 1.0) * (t - 2.0);
        i = j;
    }
    return s;
}

// Kendall S = C - D and tau-b, O(n log n).
inline void kendall_core(std::span<const double> x, std::span<const double> y, double& tau_out,
                         double& s_out, double& denom_out) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];

    // joint ties: runs with equal (x, y)
    double joint_pairs = 0.0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && x[idx[j]] == x[idx[i]] && y[idx[j]] == y[idx[i]]) ++j;
            double t = static_cast<double>(j - i);
            joint_pairs += t * (t - 1.0) / 2.0;
            i = j;
        }
    }

    TieStats tx = tie_stats(std::vector<double>(x.begin(), x.end()));
    TieStats ty = tie_stats(std::vector<double>(y.begin(), y.end()));

    std::vector<double> buf(n);
    double discordant = static_cast<double>(merge_count_swaps(ys, buf, 0, n));

    const double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    // pairs tied in x only do not enter the mergesort as exchanges because
    // of the (x, y) sort order; S = n0 - n1 - n2 + n3 - 2D counts the rest
    double s = n0 - tx.pair_sum - ty.pair_sum + joint_pairs - 2.0 * discordant;
    double denom = std::sqrt((n0 - tx.pair_sum) * (n0 - ty.pair_sum));
    tau_out = s / denom;
    s_out = s;
    denom_out = denom;
}

inline double spearman_coefficient(std::span<const double> x, std::span<const double> y);

// Exact two-sided permutation p-value: the fraction of distinct arrangements
// of y whose |statistic| is at least the observed |statistic|.
template <class Stat>
inline double exact_permutation_p(std::span<const double> x, std::span<const double> y,
                                  Stat&& statistic) {
    const double obs = std::fabs(statistic(x, y));
    std::vector<double> perm(y.begin(), y.end());
    std::sort(perm.begin(), perm.end());
    std::uint64_t total = 0, as_extreme = 0;
    do {
        double v = std::fabs(statistic(x, std::span<const double>(perm)));
        if (v >= obs - 1e-12) ++as_extreme;
        ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(as_extreme) / static_cast<double>(total);
}

}  // namespace detail

// Ascending ranks starting at 1; tied values share the mean of the rank
// positions they occupy.
inline std::vector<double> rank_average(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("rank_average needs at least 1 value");
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && v[idx[j]] == v[idx[i]]) ++j;
        double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = mean_rank;
        i = j;
    }
    return ranks;
}

namespace detail {

inline double spearman_coefficient(std::span<const double> x, std::span<const double> y) {
    std::vector<double> rx = rank_average(x);
    std::vector<double> ry = rank_average(y);
    const std::size_t n = rx.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Kendall's tau-b with tie corrections and a two-sided p-value from the
// tie-adjusted normal approximation. With PMethod::exact_permutation the
// p-value is computed over all arrangements of y (requires n <= 8 and no
// ties in x).
inline CorrelationResult kendall_tau_b(std::span<const double> x, std::span<const double> y,
                                       PMethod p_method = PMethod::normal_approx) {
    detail::check_inputs(x, y);
    if (detail::all_tied(x)) throw std::invalid_argument("kendall_tau_b: x has zero rank variance");
    if (detail::all_tied(y)) throw std::invalid_argument("kendall_tau_b: y has zero rank variance");

    double tau, s, denom;
    detail::kendall_core(x, y, tau, s, denom);

    const double n = static_cast<double>(x.size());
    CorrelationResult r;
    r.coefficient = tau;
    r.n = x.size();
    r.method = CorrMethod::kendall_tau_b;

    if (p_method == PMethod::exact_permutation) {
        if (x.size() > 8)
            throw std::invalid_argument("exact permutation p limited to n <= 8");
        detail::TieStats tx = detail::tie_stats(std::vector<double>(x.begin(), x.end()));
        if (tx.pair_sum > 0.0)
            throw std::invalid_argument("exact permutation p requires untied x");
        r.p_method = PMethod::exact_permutation;
        r.p_value = detail::exact_permutation_p(
            x, y, [](std::span<const double> a, std::span<const double> b) {
                double t, sv, d;
                detail::kendall_core(a, b, t, sv, d);
                return t;
            });
        return r;
    }

    // var(S) with the tie adjustment of Kendall (1970); continuity
    // correction of one (half the lattice step of S) keeps the
    // approximation honest at small n
    detail::TieStats tx = detail::tie_stats(std::vector<double>(x.begin(), x.end()));
    detail::TieStats ty = detail::tie_stats(std::vector<double>(y.begin(), y.end()));
    double v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    double var = (v0 - tx.var_sum - ty.var_sum) / 18.0;
    if (n > 2.0)
        var += tx.triple_sum * ty.triple_sum / (9.0 * n * (n - 1.0) * (n - 2.0));
    var += tx.pair_sum * 2.0 * ty.pair_sum * 2.0 / (2.0 * n * (n - 1.0));
    double z = var > 0.0 ? std::max(std::fabs(s) - 1.0, 0.0) / std::sqrt(var) : 0.0;
    r.p_method = PMethod::normal_approx;
    r.p_value = detail::normal_two_sided_p(z);
    return r;
}

// Spearman's rho: Pearson correlation of average ranks, with a two-sided
// p-value from the t approximation (exact 0 at rho = +-1).
inline CorrelationResult spearman_rho(std::span<const double> x, std::span<const double> y,
                                      PMethod p_method = PMethod::t_approx) {
    detail::check_inputs(x, y);
    if (detail::all_tied(x)) throw std::invalid_argument("spearman_rho: x has zero rank variance");
    if (detail::all_tied(y)) throw std::invalid_argument("spearman_rho: y has zero rank variance");

    double rho = detail::spearman_coefficient(x, y);
    CorrelationResult r;
    r.coefficient = rho;
    r.n = x.size();
    r.method = CorrMethod::spearman;

    if (p_method == PMethod::exact_permutation) {
        if (x.size() > 8)
            throw std::invalid_argument("exact permutation p limited to n <= 8");
        r.p_method = PMethod::exact_permutation;
        r.p_value = detail::exact_permutation_p(
            x, y, [](std::span<const double> a, std::span<const double> b) {
                return detail::spearman_coefficient(a, b);
            });
        return r;
    }

    const double n = static_cast<double>(x.size());
    r.p_method = PMethod::t_approx;
    if (std::fabs(rho) >= 1.0 - 1e-15) {
        r.p_value = 0.0;
    } else if (n <= 2.0) {
        r.p_value = 1.0;
    } else {
        double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
        r.p_value = detail::student_t_two_sided_p(t, n - 2.0);
    }
    return r;
}

}  // namespace mrscore
