#ifndef DOCAUSAL_EFFECTS_HPP
#define DOCAUSAL_EFFECTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "docausal/dag.hpp"
#include "docausal/error.hpp"
#include "docausal/regress.hpp"
#include "docausal/stats.hpp"
#include "docausal/table.hpp"

namespace docausal {

class IdentificationError : public ValidationError {
public:
    IdentificationError(const std::string& what, BackdoorVerdict verdict)
        : ValidationError(what), verdict_(std::move(verdict)) {}
    const BackdoorVerdict& verdict() const { return verdict_; }

private:
    BackdoorVerdict verdict_;
};

/*
 * The estimand: effect of `treatment` on binary `outcome`, identified by the
 * back-door set `adjustment`. `precision` covariates enter the outcome model
 * only.
 */
struct CausalModelSpec {
    std::string treatment;
    std::string outcome;
    std::vector<std::string> adjustment;
    std::vector<std::string> precision;

    void validate() const {
        if (treatment.empty() || outcome.empty()) throw ValidationError("treatment and outcome must be named");
        if (treatment == outcome) throw ValidationError("treatment and outcome must differ");
        std::set<std::string> seen;
        for (const auto& c : adjustment) {
            if (c == treatment || c == outcome) throw ValidationError("'" + c + "' cannot be in the adjustment set");
            if (!seen.insert(c).second) throw ValidationError("'" + c + "' listed twice");
        }
        for (const auto& c : precision) {
            if (c == treatment || c == outcome) throw ValidationError("'" + c + "' cannot be a precision covariate");
            if (!seen.insert(c).second) {
                throw ValidationError("'" + c + "' appears in both adjustment and precision sets");
            }
        }
    }

    void validate_against(const Dag& dag) const {
        validate();
        for (const auto& c : precision) dag.index_of(c);
        const NodeSet z(adjustment.begin(), adjustment.end());
        auto verdict = is_valid_backdoor(dag, treatment, outcome, z);
        if (!verdict.valid) {
            std::string msg = "adjustment set is not a valid back-door set for " + treatment + " -> " + outcome;
            for (const auto& v : verdict.violations) msg += "; " + describe(v);
            throw IdentificationError(msg, std::move(verdict));
        }
    }

    // Outcome-model design columns; the treatment is always first.
    std::vector<std::string> outcome_covariates() const {
        std::vector<std::string> c{treatment};
        c.insert(c.end(), adjustment.begin(), adjustment.end());
        c.insert(c.end(), precision.begin(), precision.end());
        return c;
    }

    std::vector<std::string> all_covariates() const {
        std::vector<std::string> c(adjustment);
        c.insert(c.end(), precision.begin(), precision.end());
        return c;
    }

    bool operator==(const CausalModelSpec&) const = default;
};

// ---------------------------------------------------------------------------
// G-computation
// ---------------------------------------------------------------------------

/// Fitted outcome model plus each row's linear predictor with the treatment term removed.
struct OutcomeModel {
    FitResult fit;
    Vector offset;

    double treatment_coefficient() const { return fit.coef(0); }

    // Mean predicted risk with every row's treatment set to s.
    double interventional_risk(double s) const {
        const double b = treatment_coefficient();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < offset.size(); ++i) acc += inv_logit(offset(i) + b * s);
        return acc / static_cast<double>(offset.size());
    }
};

namespace detail {

inline void require_complete(const Table& table, const std::vector<std::string>& cols) {
    for (const auto& c : cols) {
        if (table.missing_count(c) > 0) throw ValidationError("column '" + c + "' has missing values");
    }
}

inline OutcomeModel fit_outcome_model(const Matrix& X, const Vector& y) {
    OutcomeModel m;
    m.fit = logistic_fit(X, y);
    if (!m.fit.converged) throw ConvergenceError("outcome model did not converge: " + m.fit.diagnostic);
    m.offset = linear_predictor(m.fit, X) - m.fit.coef(0) * X.col(0);
    return m;
}

inline void check_bootstrap_failures(std::size_t failed, std::size_t n_boot, const std::string& what) {
    if (static_cast<double>(failed) > 0.01 * static_cast<double>(n_boot)) {
        throw ConvergenceError(what + ": " + std::to_string(failed) + " of " + std::to_string(n_boot) +
                               " bootstrap resamples failed (limit 1%)");
    }
}

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

inline Interval percentile_interval(const std::vector<double>& v, double level = 95.0) {
    const double tail = (100.0 - level) / 2.0;
    return {percentile(v, tail), percentile(v, 100.0 - tail)};
}

}  // namespace detail

inline OutcomeModel fit_outcome_model(const Table& table, const CausalModelSpec& spec) {
    spec.validate();
    const auto cov = spec.outcome_covariates();
    detail::require_complete(table, cov);
    detail::require_complete(table, {spec.outcome});
    if (table.column(spec.outcome).kind != ColumnKind::Binary) {
        throw ValidationError("outcome '" + spec.outcome + "' must be binary");
    }
    return detail::fit_outcome_model(table.matrix(cov), table.vector(spec.outcome));
}

inline double gcomp_interventional_risk(const Table& table, const CausalModelSpec& spec, double s) {
    return fit_outcome_model(table, spec).interventional_risk(s);
}

struct AceResult {
    double s_high = 0.0;
    double s_low = 0.0;
    double risk_high = 0.0;  // at do(s_high)
    double risk_low = 0.0;   // at do(s_low)
    double ace = 0.0;        // risk_high - risk_low
    double rrr = 0.0;        // ace / risk_high
    double ci_low = 0.0;
    double ci_high = 0.0;
    double rr_ci_low = 1.0;  // percentile interval of risk_high / risk_low
    double rr_ci_high = 1.0;
    std::size_t n_bootstrap = 0;
    std::size_t n_failed = 0;
    std::uint64_t seed = 0;
    std::vector<double> bootstrap_aces;  // sorted
};

struct Contrast {
    double s_high = 0.0;
    double s_low = 0.0;
};

/*
 * G-computation ACEs for several contrasts sharing one percentile bootstrap.
 * Every resample refits the outcome model once; replicate b draws rows with an
 * engine seeded seed + b, so each contrast equals a standalone gcomp_ace run.
 */
inline std::vector<AceResult> gcomp_contrasts(const Table& table, const CausalModelSpec& spec,
                                              const std::vector<Contrast>& contrasts, std::size_t n_boot = 1500,
                                              std::uint64_t seed = 42) {
    if (n_boot < 100) throw ValidationError("g-computation bootstrap needs at least 100 resamples");
    if (contrasts.empty()) throw ValidationError("no contrasts requested");
    const auto model = fit_outcome_model(table, spec);
    std::vector<AceResult> out(contrasts.size());
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
        auto& r = out[c];
        r.s_high = contrasts[c].s_high;
        r.s_low = contrasts[c].s_low;
        r.risk_high = model.interventional_risk(r.s_high);
        r.risk_low = model.interventional_risk(r.s_low);
        r.ace = r.risk_high - r.risk_low;
        r.rrr = r.ace / r.risk_high;
        r.n_bootstrap = n_boot;
        r.seed = seed;
    }

    const Matrix X = table.matrix(spec.outcome_covariates());
    const Vector y = table.vector(spec.outcome);
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::vector<double>> aces(contrasts.size()), rrs(contrasts.size());
    std::size_t failed = 0;
    for (std::size_t b = 0; b < n_boot; ++b) {
        Rng rng(seed + b);
        const auto idx = resample_indices(n, rng);
        try {
            const auto m = detail::fit_outcome_model(X(idx, Eigen::all), y(idx));
            for (std::size_t c = 0; c < contrasts.size(); ++c) {
                const double hi = m.interventional_risk(contrasts[c].s_high);
                const double lo = m.interventional_risk(contrasts[c].s_low);
                aces[c].push_back(hi - lo);
                rrs[c].push_back(hi / lo);
            }
        } catch (const ComputationError&) {
            ++failed;
        }
    }
    detail::check_bootstrap_failures(failed, n_boot, "g-computation ACE");
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
        auto& r = out[c];
        r.n_failed = failed;
        std::sort(aces[c].begin(), aces[c].end());
        const auto ci = detail::percentile_interval(aces[c]);
        const auto rr_ci = detail::percentile_interval(rrs[c]);
        r.ci_low = ci.low;
        r.ci_high = ci.high;
        r.rr_ci_low = rr_ci.low;
        r.rr_ci_high = rr_ci.high;
        r.bootstrap_aces = std::move(aces[c]);
    }
    return out;
}

inline AceResult gcomp_ace(const Table& table, const CausalModelSpec& spec, double s1, double s0,
                           std::size_t n_boot = 1500, std::uint64_t seed = 42) {
    return gcomp_contrasts(table, spec, {Contrast{s1, s0}}, n_boot, seed).front();
}

struct DosePoint {
    double s = 0.0;
    double risk = 0.0;
};

inline std::vector<DosePoint> dose_response_curve(const Table& table, const CausalModelSpec& spec,
                                                  const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("dose-response grid is empty");
    const auto model = fit_outcome_model(table, spec);
    std::vector<DosePoint> out;
    out.reserve(grid.size());
    for (double s : grid) out.push_back({s, model.interventional_risk(s)});
    return out;
}

enum class NaiveMethod {
    Model,  // unadjusted logistic of outcome on treatment
    Band    // empirical outcome rate within +-band of each treatment value
};

/// Unadjusted observational contrast between treatment values s1 and s0.
inline double naive_contrast(const Table& table, const std::string& treatment, const std::string& outcome, double s1,
                             double s0, NaiveMethod method = NaiveMethod::Model, double band = 2.5) {
    detail::require_complete(table, {treatment, outcome});
    const Vector t = table.vector(treatment);
    const Vector y = table.vector(outcome);
    if (method == NaiveMethod::Band) {
        auto rate = [&](double s) {
            double k = 0.0, e = 0.0;
            for (Eigen::Index i = 0; i < t.size(); ++i) {
                if (std::abs(t(i) - s) <= band) {
                    k += 1.0;
                    e += y(i);
                }
            }
            if (k == 0.0) throw ComputationError("no rows within the band around " + format_double(s));
            return e / k;
        };
        return rate(s1) - rate(s0);
    }
    const auto fit = logistic_fit_or_throw(Matrix(t), y);
    Matrix q(2, 1);
    q << s1, s0;
    const Vector p = predict_proba(fit, q);
    return p(0) - p(1);
}

/// Outcome-model contrast with every covariate other than treatment fixed at its column mean.
inline double mean_z_plugin(const Table& table, const CausalModelSpec& spec, double s1, double s0) {
    const auto model = fit_outcome_model(table, spec);
    const auto cov = spec.outcome_covariates();
    Matrix q(2, static_cast<Eigen::Index>(cov.size()));
    for (std::size_t j = 1; j < cov.size(); ++j) {
        const double m = table.vector(cov[j]).mean();
        q(0, static_cast<Eigen::Index>(j)) = m;
        q(1, static_cast<Eigen::Index>(j)) = m;
    }
    q(0, 0) = s1;
    q(1, 0) = s0;
    const Vector p = predict_proba(model.fit, q);
    return p(0) - p(1);
}

// ---------------------------------------------------------------------------
// Binary-contrast estimators
// ---------------------------------------------------------------------------

struct BinaryTreatment {
    double threshold = 0.0;  // sample median of the continuous treatment
    Vector treated;          // 1 where treatment > threshold
};

inline BinaryTreatment binarize_at_median(const Table& table, const std::string& treatment) {
    detail::require_complete(table, {treatment});
    const auto& v = table.values(treatment);
    BinaryTreatment out;
    out.threshold = median(v);
    out.treated.resize(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.treated(static_cast<Eigen::Index>(i)) = v[i] > out.threshold ? 1.0 : 0.0;
    return out;
}

inline Vector estimate_propensity(const Table& table, const std::vector<std::string>& z, const Vector& treated) {
    detail::require_complete(table, z);
    if (static_cast<std::size_t>(treated.size()) != table.rows()) throw ValidationError("treatment length mismatch");
    const Matrix X = table.matrix(z);
    const auto fit = logistic_fit(X, treated);
    if (!fit.converged) throw ConvergenceError("propensity model failed: " + fit.diagnostic);
    return predict_proba(fit, X);
}

inline Vector estimate_propensity(const Table& table, const std::vector<std::string>& z,
                                  const std::string& treatment_binary) {
    if (table.column(treatment_binary).kind != ColumnKind::Binary) {
        throw ValidationError("propensity treatment '" + treatment_binary + "' must be binary");
    }
    detail::require_complete(table, {treatment_binary});
    return estimate_propensity(table, z, table.vector(treatment_binary));
}

/// (mean_T - mean_C) / sqrt((var_T + var_C) / 2); binary covariates use p(1 - p).
inline double standardized_mean_difference(const std::vector<double>& treated, const std::vector<double>& control,
                                           bool binary) {
    if (treated.empty() || control.empty()) throw ComputationError("SMD needs both groups");
    const double mt = mean(treated), mc = mean(control);
    const double vt = binary ? mt * (1.0 - mt) : sample_variance(treated);
    const double vc = binary ? mc * (1.0 - mc) : sample_variance(control);
    const double pooled = std::sqrt((vt + vc) / 2.0);
    if (!(pooled > 0.0)) return mt == mc ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mt - mc);
    return (mt - mc) / pooled;
}

struct BalanceRow {
    std::string covariate;
    double smd_before = 0.0;
    double smd_after = 0.0;
};

struct MatchResult {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (treated row, control row)
    double att = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<BalanceRow> balance;
    double caliper = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_treated = 0;
    std::size_t n_unmatched_treated = 0;
    double treatment_threshold = 0.0;
    std::size_t n_bootstrap = 0;
    std::uint64_t seed = 0;
};

/*
 * Greedy 1:1 nearest-neighbour matching on the propensity score within exact
 * strata, without replacement. Treated rows are processed by descending score
 * (ties by row index); the nearest unused control within the caliper wins,
 * ties by lower row index. The CI resamples matched pairs.
 */
inline MatchResult psm_att(const Table& table, const CausalModelSpec& spec, double caliper, const std::string& stratum,
                           std::size_t n_boot = 800, std::uint64_t seed = 42) {
    spec.validate();
    if (!(caliper >= 0.0)) throw ValidationError("caliper must be nonnegative");
    if (n_boot < 1) throw ValidationError("PSM bootstrap needs at least one resample");
    detail::require_complete(table, {spec.outcome, stratum});
    if (table.column(stratum).kind != ColumnKind::Binary) throw ValidationError("stratum '" + stratum + "' must be binary");

    const auto bt = binarize_at_median(table, spec.treatment);
    const Vector ps = estimate_propensity(table, spec.adjustment, bt.treated);
    const auto& strat = table.values(stratum);
    const auto& y = table.values(spec.outcome);
    const std::size_t n = table.rows();

    MatchResult out;
    out.caliper = caliper;
    out.treatment_threshold = bt.threshold;
    out.n_bootstrap = n_boot;
    out.seed = seed;

    for (double level : {0.0, 1.0}) {
        std::vector<std::size_t> treated;
        std::set<std::pair<double, std::size_t>> controls;
        for (std::size_t i = 0; i < n; ++i) {
            if (strat[i] != level) continue;
            if (bt.treated(static_cast<Eigen::Index>(i)) == 1.0) {
                treated.push_back(i);
            } else {
                controls.emplace(ps(static_cast<Eigen::Index>(i)), i);
            }
        }
        if (treated.empty() || controls.empty()) {
            throw ComputationError("stratum " + stratum + "=" + format_double(level) + " lacks treated or control rows");
        }
        out.n_treated += treated.size();
        std::stable_sort(treated.begin(), treated.end(), [&](std::size_t a, std::size_t b) {
            return ps(static_cast<Eigen::Index>(a)) > ps(static_cast<Eigen::Index>(b));
        });
        for (auto t : treated) {
            if (controls.empty()) {
                ++out.n_unmatched_treated;
                continue;
            }
            const double pt = ps(static_cast<Eigen::Index>(t));
            std::optional<std::pair<double, std::size_t>> best;
            auto above = controls.lower_bound({pt, 0});
            if (above != controls.end()) best = *above;
            if (above != controls.begin()) {
                const double below_ps = std::prev(above)->first;
                const auto below = *controls.lower_bound({below_ps, 0});
                if (!best) {
                    best = below;
                } else {
                    const double da = best->first - pt, db = pt - below.first;
                    if (db < da || (db == da && below.second < best->second)) best = below;
                }
            }
            if (std::abs(best->first - pt) <= caliper) {
                out.pairs.emplace_back(t, best->second);
                controls.erase(*best);
            } else {
                ++out.n_unmatched_treated;
            }
        }
    }
    out.n_pairs = out.pairs.size();
    if (out.pairs.empty()) throw ComputationError("propensity matching produced no pairs within the caliper");

    std::vector<double> diffs;
    diffs.reserve(out.pairs.size());
    for (auto [t, c] : out.pairs) diffs.push_back(y[t] - y[c]);
    out.att = mean(diffs);

    std::vector<double> boots;
    boots.reserve(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
        Rng rng(seed + b);
        const auto idx = resample_indices(diffs.size(), rng);
        double acc = 0.0;
        for (auto i : idx) acc += diffs[i];
        boots.push_back(acc / static_cast<double>(idx.size()));
    }
    const auto ci = detail::percentile_interval(boots);
    out.ci_low = ci.low;
    out.ci_high = ci.high;

    for (const auto& cov : spec.adjustment) {
        const auto& v = table.values(cov);
        const bool binary = table.column(cov).kind == ColumnKind::Binary;
        std::vector<double> tb, cb, ta, ca;
        for (std::size_t i = 0; i < n; ++i) (bt.treated(static_cast<Eigen::Index>(i)) == 1.0 ? tb : cb).push_back(v[i]);
        for (auto [t, c] : out.pairs) {
            ta.push_back(v[t]);
            ca.push_back(v[c]);
        }
        out.balance.push_back({cov, standardized_mean_difference(tb, cb, binary),
                               standardized_mean_difference(ta, ca, binary)});
    }
    return out;
}

struct IpwResult {
    double ate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double max_weight = 0.0;
    double mean_weight = 0.0;
    double trim_threshold = 0.0;
    std::size_t n_capped = 0;
    double effective_sample_size = 0.0;
    double treatment_threshold = 0.0;
    std::size_t n_bootstrap = 0;
    std::size_t n_failed = 0;
    std::uint64_t seed = 0;
};

inline constexpr double kPositivityFloor = 1e-6;

namespace detail {

struct IpwPoint {
    double ate = 0.0;
    std::vector<double> weights;
    double cap = 0.0;
    std::size_t n_capped = 0;
};

inline IpwPoint ipw_point(const Matrix& Z, const Vector& treated, const Vector& y, double trim_percentile) {
    const auto fit = logistic_fit(Z, treated);
    if (!fit.converged) throw ConvergenceError("propensity model failed: " + fit.diagnostic);
    const Vector ps = predict_proba(fit, Z);
    std::vector<std::size_t> bad;
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
        if (ps(i) < kPositivityFloor || ps(i) > 1.0 - kPositivityFloor) bad.push_back(static_cast<std::size_t>(i));
    }
    if (!bad.empty()) {
        std::string rows;
        for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 10); ++k) rows += (k ? ", " : "") + std::to_string(bad[k]);
        if (bad.size() > 10) rows += ", ...";
        throw PositivityError("propensity scores within " + format_double(kPositivityFloor) + " of 0 or 1 at rows " + rows);
    }
    const double p_treated = treated.mean();
    IpwPoint out;
    out.weights.resize(static_cast<std::size_t>(ps.size()));
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
        out.weights[static_cast<std::size_t>(i)] =
            treated(i) == 1.0 ? p_treated / ps(i) : (1.0 - p_treated) / (1.0 - ps(i));
    }
    out.cap = percentile(out.weights, trim_percentile);
    for (auto& w : out.weights) {
        if (w > out.cap) {
            w = out.cap;
            ++out.n_capped;
        }
    }
    double sw1 = 0, swy1 = 0, sw0 = 0, swy0 = 0;
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
        const double w = out.weights[static_cast<std::size_t>(i)];
        if (treated(i) == 1.0) {
            sw1 += w;
            swy1 += w * y(i);
        } else {
            sw0 += w;
            swy0 += w * y(i);
        }
    }
    if (!(sw1 > 0.0) || !(sw0 > 0.0)) throw ComputationError("IPW needs treated and control rows");
    out.ate = swy1 / sw1 - swy0 / sw0;
    return out;
}

}  // namespace detail

/*
 * Stabilized inverse-probability weighting for the above-median contrast.
 * Weights above the trim percentile are capped at that percentile. The
 * bootstrap re-estimates the propensity model on each resample; rows keep
 * their original binary treatment.
 */
inline IpwResult ipw_ate(const Table& table, const CausalModelSpec& spec, double trim_percentile = 98.0,
                         std::size_t n_boot = 800, std::uint64_t seed = 42) {
    spec.validate();
    if (!(trim_percentile > 0.0 && trim_percentile <= 100.0)) throw ValidationError("trim percentile must be in (0,100]");
    if (n_boot < 1) throw ValidationError("IPW bootstrap needs at least one resample");
    detail::require_complete(table, spec.adjustment);
    detail::require_complete(table, {spec.outcome});
    const auto bt = binarize_at_median(table, spec.treatment);
    const Matrix Z = table.matrix(spec.adjustment);
    const Vector y = table.vector(spec.outcome);
    const auto point = detail::ipw_point(Z, bt.treated, y, trim_percentile);

    IpwResult out;
    out.ate = point.ate;
    out.trim_threshold = point.cap;
    out.n_capped = point.n_capped;
    out.max_weight = *std::max_element(point.weights.begin(), point.weights.end());
    double sw = 0.0, sw2 = 0.0;
    for (double w : point.weights) {
        sw += w;
        sw2 += w * w;
    }
    out.mean_weight = sw / static_cast<double>(point.weights.size());
    out.effective_sample_size = sw * sw / sw2;
    out.treatment_threshold = bt.threshold;
    out.n_bootstrap = n_boot;
    out.seed = seed;

    const auto n = static_cast<std::size_t>(Z.rows());
    std::vector<double> boots;
    boots.reserve(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
        Rng rng(seed + b);
        const auto idx = resample_indices(n, rng);
        try {
            boots.push_back(detail::ipw_point(Z(idx, Eigen::all), bt.treated(idx), y(idx), trim_percentile).ate);
        } catch (const ComputationError&) {
            ++out.n_failed;
        }
    }
    detail::check_bootstrap_failures(out.n_failed, n_boot, "IPW ATE");
    const auto ci = detail::percentile_interval(boots);
    out.ci_low = ci.low;
    out.ci_high = ci.high;
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_EFFECTS_HPP
