#ifndef DOCAUSAL_STATS_HPP
#define DOCAUSAL_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "docausal/error.hpp"
#include "docausal/regress.hpp"

namespace docausal {

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stage seeds depend only on (master seed, label), never on execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    return splitmix64(master ^ fnv1a(label));
}

inline std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

// ---------------------------------------------------------------------------
// Descriptive
// ---------------------------------------------------------------------------

inline double mean(std::span<const double> v) {
    if (v.empty()) throw ValidationError("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

inline double sample_sd(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

/// Percentile with linear interpolation between order statistics; q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw ValidationError("percentile of empty sample");
    if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile must be in [0, 100]");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

struct Ranking {
    std::vector<double> ranks;      // 1-based midranks
    double tie_sum = 0.0;           // sum over tie groups of t^3 - t
};

inline Ranking midranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Ranking out;
    out.ranks.assign(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) out.ranks[order[k]] = r;
        const double t = static_cast<double>(j - i);
        out.tie_sum += t * t * t - t;
        i = j;
    }
    return out;
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

namespace detail {

/*
 * Null distribution of U for sizes (m, n) without ties: coefficients of the
 * Gaussian binomial prod_{i=1..m} (1 - q^(n+i)) / (1 - q^i), normalized.
 */
inline std::vector<double> mann_whitney_null(std::size_t m, std::size_t n) {
    if (m > n) std::swap(m, n);
    std::vector<double> c(m * n + 1, 0.0);
    c[0] = 1.0;
    for (std::size_t i = 1; i <= m; ++i) {
        const std::size_t up = n + i;
        for (std::size_t k = c.size(); k-- > up;) c[k] -= c[k - up];
        for (std::size_t k = i; k < c.size(); ++k) c[k] += c[k - i];
    }
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    for (auto& v : c) v /= total;
    return c;
}

}  // namespace detail

// Samples at or below this size (in either group) use the exact null when there are no ties.
inline constexpr std::size_t kMannWhitneyExactMax = 8;

/*
 * Mann–Whitney U for sample a (U' = n_a n_b - U for b). Two-sided p from the
 * exact null when min(n_a, n_b) <= 8 and there are no ties; otherwise a normal
 * approximation with tie-corrected variance and a 0.5 continuity correction.
 */
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw ValidationError("Mann-Whitney needs at least 2 values per sample");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto rk = midranks(pooled);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;
    double ra = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ra += rk.ranks[i];
    TestResult out;
    out.statistic = ra - na * (na + 1.0) / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - rk.tie_sum / (n * (n - 1.0)));
    if (!(var > 0.0)) throw ComputationError("Mann-Whitney undefined: all values are identical");
    if (rk.tie_sum == 0.0 && std::min(a.size(), b.size()) <= kMannWhitneyExactMax) {
        const auto dist = detail::mann_whitney_null(a.size(), b.size());
        const auto u = static_cast<std::size_t>(std::lround(out.statistic));
        const double lower = std::accumulate(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(u) + 1, 0.0);
        const double upper = std::accumulate(dist.begin() + static_cast<std::ptrdiff_t>(u), dist.end(), 0.0);
        out.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
        return out;
    }
    const double dev = std::max(0.0, std::abs(out.statistic - na * nb / 2.0) - 0.5);
    out.p_value = two_sided_normal_p(dev / std::sqrt(var));
    return out;
}

inline TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ValidationError("Kruskal-Wallis needs at least 2 groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.size() < 2) throw ValidationError("Kruskal-Wallis needs at least 2 values per group");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const auto rk = midranks(pooled);
    const double n = static_cast<double>(pooled.size());
    double h = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double r = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) r += rk.ranks[offset + i];
        h += r * r / static_cast<double>(g.size());
        offset += g.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    const double correction = 1.0 - rk.tie_sum / (n * n * n - n);
    if (!(correction > 0.0)) throw ComputationError("Kruskal-Wallis undefined: all values are identical");
    TestResult out;
    out.statistic = h / correction;
    out.p_value = tail_probability(Distribution::ChiSquare, out.statistic, static_cast<double>(groups.size() - 1));
    return out;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 3) throw ValidationError("Spearman needs equal lengths >= 3");
    const auto ra = midranks(a).ranks;
    const auto rb = midranks(b).ranks;
    return pearson(Eigen::Map<const Vector>(ra.data(), static_cast<Eigen::Index>(ra.size())),
                   Eigen::Map<const Vector>(rb.data(), static_cast<Eigen::Index>(rb.size())));
}

/// Pearson chi-square test of independence on a 2x2 table, without Yates' correction.
inline TestResult chi_square_2x2(double a, double b, double c, double d) {
    const double n = a + b + c + d;
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) throw ComputationError("chi-square undefined: empty margin");
    const double diff = a * d - b * c;
    TestResult out;
    out.statistic = n * diff * diff / (r1 * r2 * c1 * c2);
    out.p_value = tail_probability(Distribution::ChiSquare, out.statistic, 1.0);
    return out;
}

/// Smallest mean effect a one-sample z-test detects: (z_{1-alpha/2} + z_power) * sd / sqrt(n).
inline double minimum_detectable_effect(std::size_t n, double tau_sd, double power = 0.8, double alpha = 0.05) {
    if (n < 2) throw ValidationError("minimum detectable effect needs n >= 2");
    if (!(tau_sd > 0.0)) throw ValidationError("minimum detectable effect needs a positive sd");
    if (!(power > 0.0 && power < 1.0) || !(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("power and alpha must lie in (0,1)");
    }
    return (normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power)) * tau_sd / std::sqrt(static_cast<double>(n));
}

/// Area under the ROC curve via the rank-sum identity.
inline double auroc(std::span<const double> score, std::span<const double> label) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < score.size(); ++i) (label[i] == 1.0 ? pos : neg).push_back(score[i]);
    if (pos.empty() || neg.empty()) throw ComputationError("AUROC needs both classes");
    std::vector<double> pooled(pos);
    pooled.insert(pooled.end(), neg.begin(), neg.end());
    const auto rk = midranks(pooled);
    double r = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) r += rk.ranks[i];
    const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
    return (r - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Step-wise average precision (sum over positives of precision at their rank).
inline double average_precision(std::span<const double> score, std::span<const double> label) {
    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    double total_pos = 0.0;
    for (double l : label) total_pos += l;
    if (total_pos == 0.0) throw ComputationError("average precision needs positives");
    double tp = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double tp_block = 0.0;
        while (j < order.size() && score[order[j]] == score[order[i]]) tp_block += label[order[j++]];
        tp += tp_block;
        ap += tp_block / total_pos * (tp / static_cast<double>(j));
        i = j;
    }
    return ap;
}

}  // namespace docausal

#endif  // DOCAUSAL_STATS_HPP
