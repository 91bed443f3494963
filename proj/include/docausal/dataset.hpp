#ifndef DOCAUSAL_DATASET_HPP
#define DOCAUSAL_DATASET_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "docausal/error.hpp"
#include "docausal/regress.hpp"
#include "docausal/stats.hpp"
#include "docausal/table.hpp"

namespace docausal {

struct McarResult {
    std::string variable;
    double chi_square = 0.0;
    int df = 1;
    double p_value = 1.0;
    double missing_fraction = 0.0;
};

/// Chi-square test of independence between a column's missingness indicator and a binary outcome.
inline McarResult mcar_test(const Table& table, const std::string& variable, const std::string& outcome) {
    const auto& v = table.column(variable);
    const auto& y = table.column(outcome);
    if (y.kind != ColumnKind::Binary) throw ValidationError("MCAR outcome '" + outcome + "' must be binary");
    if (table.missing_count(outcome) > 0) throw ValidationError("MCAR outcome '" + outcome + "' has missing values");
    const std::size_t n_missing = table.missing_count(variable);
    if (n_missing == 0) throw ValidationError("column '" + variable + "' has no missing values");
    if (n_missing == table.rows()) throw ValidationError("column '" + variable + "' has no observed values");

    // rows: missing / observed; cols: outcome 1 / 0
    double a = 0, b = 0, c = 0, d = 0;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        const bool event = y.values[i] == 1.0;
        if (v.missing[i]) {
            (event ? a : b) += 1;
        } else {
            (event ? c : d) += 1;
        }
    }
    McarResult out;
    out.variable = variable;
    out.missing_fraction = static_cast<double>(n_missing) / static_cast<double>(table.rows());
    if (a + c == 0 || b + d == 0) {
        // outcome constant: missingness cannot depend on it
        out.chi_square = 0.0;
        out.p_value = 1.0;
        return out;
    }
    const auto t = chi_square_2x2(a, b, c, d);
    out.chi_square = t.statistic;
    out.p_value = t.p_value;
    return out;
}

/*
 * Round-robin chained-regression imputation.
 *
 * Missing cells start at the observed column mean. Each sweep visits the
 * incomplete columns in table order and regresses each on every other column
 * (OLS for continuous, logistic for binary), overwriting only its missing
 * cells. Binary predictions are rounded at 0.5. The sweep is deterministic;
 * `seed` is accepted for interface stability and does not change the result.
 */
inline Table impute_iterative(const Table& table, std::size_t iterations, std::uint64_t seed = 0) {
    (void)seed;
    if (iterations < 1) throw ValidationError("imputation needs at least one iteration");
    if (table.complete()) return table;

    std::vector<Column> cols = table.columns();
    bool any_complete = false;
    for (const auto& c : cols) {
        const std::size_t miss = table.missing_count(c.name);
        if (miss == table.rows()) throw ValidationError("column '" + c.name + "' is entirely missing");
        if (miss == 0) any_complete = true;
    }
    if (!any_complete) throw ValidationError("imputation needs at least one fully observed column");

    const std::size_t n = table.rows();
    const std::size_t k = cols.size();
    Matrix current(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!cols[j].missing[i]) {
                sum += cols[j].values[i];
                ++cnt;
            }
        }
        const double fill = sum / static_cast<double>(cnt);
        for (std::size_t i = 0; i < n; ++i) {
            current(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                cols[j].missing[i] ? fill : cols[j].values[i];
        }
    }

    for (std::size_t sweep = 0; sweep < iterations; ++sweep) {
        for (std::size_t j = 0; j < k; ++j) {
            const auto& col = cols[j];
            std::vector<Eigen::Index> obs, mis;
            for (std::size_t i = 0; i < n; ++i) (col.missing[i] ? mis : obs).push_back(static_cast<Eigen::Index>(i));
            if (mis.empty()) continue;

            std::vector<Eigen::Index> others;
            for (std::size_t o = 0; o < k; ++o) {
                if (o != j) others.push_back(static_cast<Eigen::Index>(o));
            }
            const Matrix X_obs = current(obs, others);
            const Vector y_obs = current(obs, Eigen::seqN(static_cast<Eigen::Index>(j), 1));
            const Matrix X_mis = current(mis, others);

            Vector pred;
            if (col.kind == ColumnKind::Binary) {
                const auto fit = logistic_fit(X_obs, y_obs);
                pred = predict_proba(fit, X_mis);
                for (Eigen::Index r = 0; r < pred.size(); ++r) pred(r) = pred(r) >= 0.5 ? 1.0 : 0.0;
            } else {
                const auto fit = ols_fit(X_obs, y_obs);
                pred = linear_predictor(fit, X_mis);
            }
            for (std::size_t r = 0; r < mis.size(); ++r) current(mis[r], static_cast<Eigen::Index>(j)) = pred(static_cast<Eigen::Index>(r));
        }
    }

    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (cols[j].missing[i]) {
                double v = current(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                // binary columns with no other sweep yet still hold a proportion
                if (cols[j].kind == ColumnKind::Binary) v = v >= 0.5 ? 1.0 : 0.0;
                cols[j].values[i] = v;
                cols[j].missing[i] = false;
            }
        }
    }
    return Table(std::move(cols));
}

struct GroupSummary {
    std::size_t n = 0;           // rows in the group
    std::size_t n_observed = 0;  // non-missing values of the variable
    double mean = 0.0;           // continuous
    double sd = 0.0;             // continuous
    std::size_t count = 0;       // binary: number of ones
    double percent = 0.0;        // binary: 100 * count / n_observed
};

struct BaselineRow {
    std::string variable;
    ColumnKind kind = ColumnKind::Continuous;
    GroupSummary overall;
    GroupSummary group0;
    GroupSummary group1;
    std::string test;  // "mann-whitney" or "chi-square"
    double p_value = 1.0;
};

/// Baseline characteristics by a binary grouping column.
inline std::vector<BaselineRow> summarize_baseline(const Table& table, const std::string& group,
                                                   const std::vector<std::string>& variables) {
    const auto& g = table.column(group);
    if (g.kind != ColumnKind::Binary) throw ValidationError("grouping column '" + group + "' must be binary");
    if (table.missing_count(group) > 0) throw ValidationError("grouping column '" + group + "' has missing values");

    std::vector<BaselineRow> rows;
    for (const auto& name : variables) {
        const auto& col = table.column(name);
        BaselineRow row;
        row.variable = name;
        row.kind = col.kind;
        std::vector<double> all, v0, v1;
        for (std::size_t i = 0; i < table.rows(); ++i) {
            const bool in1 = g.values[i] == 1.0;
            ++row.overall.n;
            ++(in1 ? row.group1 : row.group0).n;
            if (col.missing[i]) continue;
            all.push_back(col.values[i]);
            (in1 ? v1 : v0).push_back(col.values[i]);
        }
        auto fill = [&](GroupSummary& s, const std::vector<double>& v) {
            s.n_observed = v.size();
            if (v.empty()) return;
            if (col.kind == ColumnKind::Binary) {
                for (double x : v) s.count += x == 1.0;
                s.percent = 100.0 * static_cast<double>(s.count) / static_cast<double>(v.size());
            } else {
                s.mean = mean(v);
                s.sd = sample_sd(v);
            }
        };
        fill(row.overall, all);
        fill(row.group0, v0);
        fill(row.group1, v1);
        if (col.kind == ColumnKind::Binary) {
            row.test = "chi-square";
            const double a = static_cast<double>(row.group1.count);
            const double b = static_cast<double>(v1.size()) - a;
            const double c = static_cast<double>(row.group0.count);
            const double d = static_cast<double>(v0.size()) - c;
            row.p_value = chi_square_2x2(a, b, c, d).p_value;
        } else {
            row.test = "mann-whitney";
            row.p_value = mann_whitney_u(v1, v0).p_value;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace docausal

#endif  // DOCAUSAL_DATASET_HPP
