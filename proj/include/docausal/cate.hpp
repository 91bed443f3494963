#ifndef DOCAUSAL_CATE_HPP
#define DOCAUSAL_CATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "docausal/effects.hpp"
#include "docausal/error.hpp"
#include "docausal/gboost.hpp"
#include "docausal/regress.hpp"
#include "docausal/stats.hpp"
#include "docausal/table.hpp"

namespace docausal {

enum class CateCovariates { AdjustmentAndPrecision, AdjustmentOnly };

struct RLearnerConfig {
    std::size_t folds = 5;
    double residual_threshold = 2.0;
    double clip_low = 5.0;
    double clip_high = 95.0;
    BoostParams boost{};
    CateCovariates final_covariates = CateCovariates::AdjustmentAndPrecision;

    void validate() const {
        if (folds < 2) throw ValidationError("cross-fitting needs at least 2 folds");
        if (!(residual_threshold > 0.0)) throw ValidationError("residual threshold must be positive");
        if (!(clip_low >= 0.0 && clip_low < clip_high && clip_high <= 100.0)) {
            throw ValidationError("clip percentiles must satisfy 0 <= low < high <= 100");
        }
        boost.validate();
    }

    bool operator==(const RLearnerConfig&) const = default;
};

enum class Learner { R, T };

inline const char* to_string(Learner l) { return l == Learner::R ? "R" : "T"; }

struct CateEstimates {
    Learner learner = Learner::R;
    std::vector<double> tau;     // one per row
    std::vector<bool> included;  // rows surviving the residual filter
    // R-learner diagnostics; NaN where not applicable.
    std::vector<double> treatment_residual;
    std::vector<double> pseudo_outcome;  // after clipping
    double clip_low_value = 0.0;
    double clip_high_value = 0.0;

    std::size_t n_included() const { return static_cast<std::size_t>(std::count(included.begin(), included.end(), true)); }

    double mean_included_tau() const {
        double s = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < tau.size(); ++i) {
            if (included[i]) {
                s += tau[i];
                ++k;
            }
        }
        if (k == 0) throw ComputationError("no included rows");
        return s / static_cast<double>(k);
    }
};

/// Nuisance regression by gradient boosting; any callable with this signature may replace it.
struct GbmNuisance {
    BoostParams params;
    std::uint64_t seed = 0;

    Vector operator()(const Matrix& x_train, const Vector& y_train, const Matrix& x_pred) const {
        return predict(fit_gbm(x_train, y_train, params, {}, seed), x_pred);
    }
};

/// Ordinary least squares nuisance regression.
struct LinearNuisance {
    Vector operator()(const Matrix& x_train, const Vector& y_train, const Matrix& x_pred) const {
        return linear_predictor(ols_fit(x_train, y_train), x_pred);
    }
};

/// Seeded shuffle, then fold = position % folds.
inline std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold(n);
    for (std::size_t k = 0; k < n; ++k) fold[order[k]] = k % folds;
    return fold;
}

/*
 * R-learner for a continuous treatment.
 *
 * Out-of-fold nuisances m(X) = E[Y|X] and e(X) = E[T|X]; rows with
 * |T - e(X)| > threshold are retained; psi = (Y - m) / (T - e) is clipped to
 * its percentile bounds over retained rows; tau is a boosted regression of psi
 * weighted by (T - e)^2, predicted on every row.
 */
template <class Nuisance>
CateEstimates r_learner_with(const Table& table, const CausalModelSpec& spec, const RLearnerConfig& config,
                             std::uint64_t seed, const Nuisance& nuisance) {
    spec.validate();
    config.validate();
    const auto covariates = spec.all_covariates();
    if (covariates.empty()) throw ValidationError("R-learner needs at least one covariate");
    detail::require_complete(table, covariates);
    detail::require_complete(table, {spec.treatment, spec.outcome});

    const Matrix X = table.matrix(covariates);
    const Vector y = table.vector(spec.outcome);
    const Vector t = table.vector(spec.treatment);
    const auto n = static_cast<std::size_t>(X.rows());
    if (n < 2 * config.folds) throw ValidationError("too few rows for cross-fitting");

    const auto fold = assign_folds(n, config.folds, seed);
    Vector m_hat(static_cast<Eigen::Index>(n)), e_hat(static_cast<Eigen::Index>(n));
    for (std::size_t f = 0; f < config.folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        const Vector y_train = y(train);
        if ((y_train.array() == y_train(0)).all()) {
            throw ComputationError("cross-fitting fold " + std::to_string(f) + " has a single outcome class");
        }
        const Matrix x_train = X(train, Eigen::all);
        const Matrix x_test = X(test, Eigen::all);
        m_hat(test) = nuisance(x_train, y_train, x_test);
        e_hat(test) = nuisance(x_train, Vector(t(train)), x_test);
    }

    CateEstimates out;
    out.learner = Learner::R;
    out.included.assign(n, false);
    out.treatment_residual.resize(n);
    out.pseudo_outcome.assign(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<Eigen::Index> kept;
    std::vector<double> raw;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double r = t(ii) - e_hat(ii);
        out.treatment_residual[i] = r;
        if (std::abs(r) > config.residual_threshold) {
            out.included[i] = true;
            kept.push_back(ii);
            raw.push_back((y(ii) - m_hat(ii)) / r);
        }
    }
    if (kept.size() < 10 * config.folds) {
        throw ComputationError("only " + std::to_string(kept.size()) + " rows pass the residual filter (need " +
                               std::to_string(10 * config.folds) + ")");
    }
    out.clip_low_value = percentile(raw, config.clip_low);
    out.clip_high_value = percentile(raw, config.clip_high);
    Vector psi(static_cast<Eigen::Index>(kept.size()));
    std::vector<double> w(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const double v = std::clamp(raw[k], out.clip_low_value, out.clip_high_value);
        psi(static_cast<Eigen::Index>(k)) = v;
        out.pseudo_outcome[static_cast<std::size_t>(kept[k])] = v;
        const double r = out.treatment_residual[static_cast<std::size_t>(kept[k])];
        w[k] = r * r;
    }

    std::vector<std::string> final_cols = config.final_covariates == CateCovariates::AdjustmentOnly
                                              ? spec.adjustment
                                              : covariates;
    if (final_cols.empty()) throw ValidationError("final CATE regression has no covariates");
    const Matrix F = table.matrix(final_cols);
    const auto model = fit_gbm(F(kept, Eigen::all), psi, config.boost, w, seed);
    const Vector tau = predict(model, F);
    out.tau.assign(tau.data(), tau.data() + tau.size());
    return out;
}

inline CateEstimates r_learner(const Table& table, const CausalModelSpec& spec, const RLearnerConfig& config = {},
                               std::uint64_t seed = 42) {
    return r_learner_with(table, spec, config, seed, GbmNuisance{config.boost, seed});
}

inline constexpr double kTLearnerClip = 1e-4;

/// T-learner for the above-median contrast; tau is a risk difference per row.
inline CateEstimates t_learner(const Table& table, const CausalModelSpec& spec, const BoostParams& params = {},
                               std::uint64_t seed = 42) {
    spec.validate();
    const auto covariates = spec.all_covariates();
    if (covariates.empty()) throw ValidationError("T-learner needs at least one covariate");
    detail::require_complete(table, covariates);
    detail::require_complete(table, {spec.outcome});
    const auto bt = binarize_at_median(table, spec.treatment);
    const Matrix X = table.matrix(covariates);
    const Vector y = table.vector(spec.outcome);
    std::vector<Eigen::Index> treated, control;
    for (Eigen::Index i = 0; i < X.rows(); ++i) (bt.treated(i) == 1.0 ? treated : control).push_back(i);
    if (treated.empty() || control.empty()) throw ComputationError("T-learner needs treated and control rows");
    if (treated.size() < 50 || control.size() < 50) throw ValidationError("T-learner needs at least 50 rows per group");

    auto clip = [](double p) { return std::clamp(p, kTLearnerClip, 1.0 - kTLearnerClip); };
    const Vector p1 = predict(fit_gbm(X(treated, Eigen::all), y(treated), params, {}, seed), X);
    const Vector p0 = predict(fit_gbm(X(control, Eigen::all), y(control), params, {}, seed), X);
    CateEstimates out;
    out.learner = Learner::T;
    const auto n = static_cast<std::size_t>(X.rows());
    out.tau.resize(n);
    out.included.assign(n, true);
    out.treatment_residual.assign(n, std::numeric_limits<double>::quiet_NaN());
    out.pseudo_outcome.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.tau[i] = clip(p1(ii)) - clip(p0(ii));
    }
    return out;
}

struct SubgroupSummary {
    std::string label;
    std::size_t n = 0;
    double mean_tau = 0.0;
    double sd_tau = 0.0;
    double implied_arr = 0.0;  // scale * mean_tau
    double ci_low = 0.0;       // bootstrap percentile interval of mean_tau
    double ci_high = 0.0;
    std::optional<double> test_p;  // heterogeneity across strata; absent for one stratum
};

/*
 * Per-stratum mean tau over included rows. `labels` has one entry per row;
 * `levels` fixes the output order (sorted labels when empty). Stratum s uses
 * bootstrap engines seeded derive_seed(seed, label) + b.
 */
inline std::vector<SubgroupSummary> subgroup_summary(const CateEstimates& est, const std::vector<std::string>& labels,
                                                     std::vector<std::string> levels = {}, double scale = 20.0,
                                                     std::size_t n_boot = 500, std::uint64_t seed = 42) {
    if (labels.size() != est.tau.size()) throw ValidationError("subgroup labels must cover every row");
    if (n_boot < 1) throw ValidationError("subgroup bootstrap needs at least one resample");
    std::map<std::string, std::vector<double>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!est.included[i]) continue;
        if (labels[i].empty()) throw ValidationError("included row " + std::to_string(i) + " has no subgroup label");
        by_label[labels[i]].push_back(est.tau[i]);
    }
    if (levels.empty()) {
        for (const auto& [k, v] : by_label) levels.push_back(k);
    }
    std::vector<std::vector<double>> groups;
    std::vector<SubgroupSummary> out;
    for (const auto& level : levels) {
        auto it = by_label.find(level);
        if (it == by_label.end() || it->second.size() < 2) {
            throw ComputationError("subgroup '" + level + "' has fewer than 2 included rows");
        }
        const auto& v = it->second;
        SubgroupSummary s;
        s.label = level;
        s.n = v.size();
        s.mean_tau = mean(v);
        s.sd_tau = sample_sd(v);
        s.implied_arr = scale * s.mean_tau;
        std::vector<double> boots;
        boots.reserve(n_boot);
        const std::uint64_t base = derive_seed(seed, level);
        for (std::size_t b = 0; b < n_boot; ++b) {
            Rng rng(base + b);
            double acc = 0.0;
            for (auto i : resample_indices(v.size(), rng)) acc += v[i];
            boots.push_back(acc / static_cast<double>(v.size()));
        }
        const auto ci = detail::percentile_interval(boots);
        s.ci_low = ci.low;
        s.ci_high = ci.high;
        out.push_back(std::move(s));
        groups.push_back(v);
    }
    if (out.size() != by_label.size()) throw ValidationError("subgroup levels do not cover every label");
    if (groups.size() == 2) {
        const double p = mann_whitney_u(groups[0], groups[1]).p_value;
        for (auto& s : out) s.test_p = p;
    } else if (groups.size() > 2) {
        const double p = kruskal_wallis(groups).p_value;
        for (auto& s : out) s.test_p = p;
    }
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_CATE_HPP
