#ifndef DOCAUSAL_SENSITIVITY_HPP
#define DOCAUSAL_SENSITIVITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "docausal/effects.hpp"
#include "docausal/error.hpp"
#include "docausal/table.hpp"

namespace docausal {

inline double causal_risk_ratio(double risk_high, double risk_low) {
    if (!(risk_low > 0.0)) throw ComputationError("risk ratio undefined: zero reference risk");
    if (!(risk_high >= 0.0 && risk_high <= 1.0) || !(risk_low <= 1.0)) throw ValidationError("risks must lie in [0,1]");
    return risk_high / risk_low;
}

/// E-value of a risk ratio; protective ratios use 1/rr.
inline double e_value(double rr) {
    if (!(rr > 0.0) || !std::isfinite(rr)) throw ValidationError("E-value needs a positive finite risk ratio");
    if (rr < 1.0) rr = 1.0 / rr;
    return rr + std::sqrt(rr * (rr - 1.0));
}

/// E-value of the confidence bound nearer the null; 1 when the interval contains 1.
inline double e_value_ci(double rr, double ci_low, double ci_high) {
    if (ci_low <= 1.0 && ci_high >= 1.0) return 1.0;
    return e_value(rr >= 1.0 ? ci_low : ci_high);
}

struct EvalueRow {
    double intervention_mmhg = 0.0;
    double s_high = 0.0;
    double s_low = 0.0;
    double ace = 0.0;
    double risk_ratio = 1.0;
    double rr_ci_low = 1.0;
    double rr_ci_high = 1.0;
    double e_point = 1.0;
    double e_ci = 1.0;
};

/*
 * One row per reduction delta: g-computation at (cohort mean, mean - delta),
 * sharing a single bootstrap. Rows are ordered by delta, largest first.
 */
inline std::vector<EvalueRow> e_value_table(const Table& table, const CausalModelSpec& spec,
                                            std::vector<double> interventions, std::size_t n_boot = 1500,
                                            std::uint64_t seed = 42) {
    if (interventions.empty()) throw ValidationError("no interventions requested");
    for (double d : interventions) {
        if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("intervention magnitudes must be nonnegative");
    }
    std::sort(interventions.begin(), interventions.end(), std::greater<>());
    detail::require_complete(table, {spec.treatment});
    const double s1 = table.vector(spec.treatment).mean();
    std::vector<Contrast> contrasts;
    for (double d : interventions) contrasts.push_back({s1, s1 - d});
    const auto aces = gcomp_contrasts(table, spec, contrasts, n_boot, seed);
    std::vector<EvalueRow> out;
    for (std::size_t k = 0; k < aces.size(); ++k) {
        const auto& a = aces[k];
        EvalueRow r;
        r.intervention_mmhg = interventions[k];
        r.s_high = a.s_high;
        r.s_low = a.s_low;
        r.ace = a.ace;
        r.risk_ratio = interventions[k] == 0.0 ? 1.0 : causal_risk_ratio(a.risk_high, a.risk_low);
        r.rr_ci_low = a.rr_ci_low;
        r.rr_ci_high = a.rr_ci_high;
        r.e_point = e_value(r.risk_ratio);
        r.e_ci = e_value_ci(r.risk_ratio, r.rr_ci_low, r.rr_ci_high);
        out.push_back(r);
    }
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_SENSITIVITY_HPP
