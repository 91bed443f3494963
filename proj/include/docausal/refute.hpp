#ifndef DOCAUSAL_REFUTE_HPP
#define DOCAUSAL_REFUTE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "docausal/effects.hpp"
#include "docausal/error.hpp"
#include "docausal/regress.hpp"
#include "docausal/stats.hpp"
#include "docausal/table.hpp"

namespace docausal {

struct PermutationResult {
    double observed_ace = 0.0;
    double null_mean = 0.0;
    double null_sd = 0.0;
    double p_value = 1.0;
    std::size_t n_permutations = 0;
    std::size_t n_failed = 0;
    std::uint64_t seed = 0;
    std::vector<double> null_aces;  // in permutation order
};

inline double permutation_p_value(double observed, const std::vector<double>& null) {
    std::size_t extreme = 0;
    for (double v : null) extreme += std::abs(v) >= std::abs(observed);
    return static_cast<double>(1 + extreme) / static_cast<double>(null.size() + 1);
}

/*
 * Permutation null for the g-computation ACE: permutation k shuffles the
 * treatment column with an engine seeded seed + k and refits the outcome model.
 */
inline PermutationResult permutation_refute(const Table& table, const CausalModelSpec& spec, double s1, double s0,
                                            std::size_t n_perm = 600, std::uint64_t seed = 42) {
    if (n_perm < 1) throw ValidationError("permutation count must be >= 1");
    const auto model = fit_outcome_model(table, spec);
    PermutationResult out;
    out.observed_ace = model.interventional_risk(s1) - model.interventional_risk(s0);
    out.n_permutations = n_perm;
    out.seed = seed;

    Matrix X = table.matrix(spec.outcome_covariates());
    const Vector y = table.vector(spec.outcome);
    const Vector t = X.col(0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(t.size()));
    out.null_aces.reserve(n_perm);
    for (std::size_t k = 0; k < n_perm; ++k) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(seed + k);
        std::shuffle(order.begin(), order.end(), rng);
        X.col(0) = t(order);
        try {
            const auto m = detail::fit_outcome_model(X, y);
            out.null_aces.push_back(m.interventional_risk(s1) - m.interventional_risk(s0));
        } catch (const ComputationError&) {
            ++out.n_failed;
        }
    }
    detail::check_bootstrap_failures(out.n_failed, n_perm, "permutation refutation");
    out.null_mean = mean(out.null_aces);
    out.null_sd = sample_sd(out.null_aces);
    out.p_value = permutation_p_value(out.observed_ace, out.null_aces);
    return out;
}

struct PlaceboResult {
    std::string instrument;
    std::string target;
    std::vector<std::string> adjust;
    std::string model;  // "ols" or "logistic"
    double coefficient = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    bool passed = false;
};

inline constexpr double kPlaceboAlpha = 0.05;

/*
 * Regresses target on instrument + adjust (OLS with t-based inference for a
 * continuous target, logistic with Wald inference for a binary one).
 * passed == p_value > 0.05.
 */
inline PlaceboResult placebo_instrument_test(const Table& table, const std::string& instrument,
                                             const std::string& target, const std::vector<std::string>& adjust) {
    if (instrument == target) throw ValidationError("placebo instrument and target must differ");
    for (const auto& a : adjust) {
        if (a == instrument || a == target) throw ValidationError("'" + a + "' cannot be in the placebo adjustment set");
    }
    std::vector<std::string> cols{instrument};
    cols.insert(cols.end(), adjust.begin(), adjust.end());
    detail::require_complete(table, cols);
    detail::require_complete(table, {target});
    const Matrix X = table.matrix(cols);
    const Vector y = table.vector(target);

    PlaceboResult out;
    out.instrument = instrument;
    out.target = target;
    out.adjust = adjust;
    if (table.column(target).kind == ColumnKind::Binary) {
        out.model = "logistic";
        const auto fit = logistic_fit_or_throw(X, y);
        out.coefficient = fit.coef(0);
        out.std_error = fit.se(0);
        const double z = normal_quantile(0.975);
        out.ci_low = out.coefficient - z * out.std_error;
        out.ci_high = out.coefficient + z * out.std_error;
        out.p_value = two_sided_normal_p(out.coefficient / out.std_error);
    } else {
        out.model = "ols";
        const auto fit = ols_fit(X, y);
        out.coefficient = fit.coef(0);
        out.std_error = fit.se(0);
        const double df = static_cast<double>(fit.n_observations) - static_cast<double>(fit.coefficients.size());
        const double q = student_t_quantile(0.975, df);
        out.ci_low = out.coefficient - q * out.std_error;
        out.ci_high = out.coefficient + q * out.std_error;
        out.p_value = out.std_error > 0.0 ? two_sided_t_p(out.coefficient / out.std_error, df) : 0.0;
    }
    if (!std::isfinite(out.p_value)) throw ComputationError("placebo regression produced a non-finite p-value");
    out.passed = out.p_value > kPlaceboAlpha;
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_REFUTE_HPP
