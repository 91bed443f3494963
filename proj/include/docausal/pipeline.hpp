#ifndef DOCAUSAL_PIPELINE_HPP
#define DOCAUSAL_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "docausal/cate.hpp"
#include "docausal/config.hpp"
#include "docausal/dag.hpp"
#include "docausal/dataset.hpp"
#include "docausal/effects.hpp"
#include "docausal/error.hpp"
#include "docausal/refute.hpp"
#include "docausal/regress.hpp"
#include "docausal/sensitivity.hpp"
#include "docausal/stats.hpp"
#include "docausal/synth.hpp"
#include "docausal/table.hpp"

namespace docausal {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class ErrorKind { Validation, Computation };

/// A module error annotated with the pipeline stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, ErrorKind kind, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)), kind_(kind) {}
    const std::string& stage() const { return stage_; }
    ErrorKind kind() const { return kind_; }

private:
    std::string stage_;
    ErrorKind kind_;
};

template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const ValidationError& e) {
        throw StageError(stage, ErrorKind::Validation, e.what());
    } catch (const ComputationError& e) {
        throw StageError(stage, ErrorKind::Computation, e.what());
    } catch (const nlohmann::json::exception& e) {
        throw StageError(stage, ErrorKind::Validation, e.what());
    } catch (const std::exception& e) {
        throw StageError(stage, ErrorKind::Computation, e.what());
    }
}

/// Plot-ready side table, written as tables/<name>.csv.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

using SideTables = std::map<std::string, CsvTable>;

namespace detail {

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string cell(double v) { return std::isfinite(v) ? format_double(v) : ""; }

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const CsvTable& t) {
    for (std::size_t c = 0; c < t.header.size(); ++c) out << (c ? "," : "") << detail::csv_escape(t.header[c]);
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << detail::csv_escape(r[c]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Validation and data preparation
// ---------------------------------------------------------------------------

inline Dag load_dag(const LoadedConfig& lc) {
    const auto& c = lc.config;
    if (c.dag.empty()) {
        if (!c.synthetic()) throw ValidationError("config needs a 'dag' path for csv data");
        return to_dag(*c.data.scm);
    }
    return parse_dag(read_file(lc.resolve(c.dag)));
}

/*
 * Every check that needs no data: counts, column references, DAG syntax and
 * acyclicity, and back-door validity of the adjustment set. Identification
 * failures carry the stage tag "identification"; the rest "config".
 */
inline Dag validate_config(const LoadedConfig& lc) {
    const auto& c = lc.config;
    const Dag dag = run_stage("config", [&] {
        std::map<std::string, ColumnKind> kinds;
        for (const auto& e : c.schema) {
            if (!Dag::is_identifier(e.name)) throw ValidationError("invalid schema name '" + e.name + "'");
            if (!kinds.emplace(e.name, e.kind).second) throw ValidationError("schema lists '" + e.name + "' twice");
        }
        auto need = [&](const std::string& col, const std::string& what) {
            if (!kinds.count(col)) throw ValidationError(what + " '" + col + "' is not in the schema");
            return kinds.at(col);
        };
        c.model.validate();
        if (need(c.model.outcome, "outcome") != ColumnKind::Binary) throw ValidationError("outcome must be binary");
        if (need(c.model.treatment, "treatment") != ColumnKind::Continuous) {
            throw ValidationError("treatment must be continuous");
        }
        for (const auto& a : c.model.all_covariates()) need(a, "covariate");
        if (c.stratum.empty()) throw ValidationError("matching.stratum is required");
        if (need(c.stratum, "matching stratum") != ColumnKind::Binary) throw ValidationError("matching stratum must be binary");
        if (!(c.caliper >= 0.0)) throw ValidationError("caliper must be nonnegative");
        if (!(c.trim_percentile > 0.0 && c.trim_percentile <= 100.0)) throw ValidationError("trim percentile must be in (0,100]");
        if (!(c.contrast_reduction >= 0.0)) throw ValidationError("contrast reduction must be nonnegative");
        if (c.interventions.empty()) throw ValidationError("interventions must not be empty");
        for (double d : c.interventions) {
            if (!(d >= 0.0)) throw ValidationError("interventions must be nonnegative");
        }
        if (c.bootstrap.gcomp < 100) throw ValidationError("bootstrap.gcomp must be at least 100");
        if (!(c.naive_band > 0.0)) throw ValidationError("naive band must be positive");
        if (!(c.power > 0.0 && c.power < 1.0) || !(c.alpha > 0.0 && c.alpha < 1.0)) {
            throw ValidationError("power and alpha must lie in (0,1)");
        }
        c.rlearner.validate();
        for (const auto& p : c.placebos) {
            need(p.instrument, "placebo instrument");
            need(p.target, "placebo target");
            for (const auto& a : p.adjust) need(a, "placebo adjustment column");
        }
        std::set<std::string> names;
        for (const auto& s : c.subgroups) {
            if (!names.insert(s.name).second) throw ValidationError("subgroup '" + s.name + "' defined twice");
            const auto kind = need(s.column, "subgroup column");
            if (kind == ColumnKind::Binary) {
                if (!s.edges.empty()) throw ValidationError("binary subgroup '" + s.name + "' takes no edges");
                if (!s.labels.empty() && s.labels.size() != 2) throw ValidationError("binary subgroup '" + s.name + "' needs 2 labels");
            } else {
                if (s.edges.empty()) throw ValidationError("continuous subgroup '" + s.name + "' needs edges");
                if (!std::is_sorted(s.edges.begin(), s.edges.end()) ||
                    std::adjacent_find(s.edges.begin(), s.edges.end()) != s.edges.end()) {
                    throw ValidationError("subgroup '" + s.name + "' edges must be strictly increasing");
                }
                if (!s.labels.empty() && s.labels.size() != s.edges.size() + 1) {
                    throw ValidationError("subgroup '" + s.name + "' needs one label per bin");
                }
            }
        }
        if (!c.baseline_group.empty() && need(c.baseline_group, "baseline group") != ColumnKind::Binary) {
            throw ValidationError("baseline group must be binary");
        }
        for (const auto& v : c.baseline_variables) need(v, "baseline variable");
        for (const auto& v : c.observational_covariates) {
            if (v == c.model.outcome) throw ValidationError("the outcome cannot be an observational predictor");
            need(v, "observational covariate");
        }
        if (c.synthetic()) {
            for (const auto& e : c.schema) c.data.scm->index_of(e.name);
        }
        Dag d = load_dag(lc);
        for (const auto& n : d.nodes()) need(n, "DAG node");
        for (const auto& i : c.implications) {
            d.index_of(i.x);
            d.index_of(i.y);
            for (const auto& z : i.cond) d.index_of(z);
        }
        return d;
    });
    run_stage("identification", [&] { c.model.validate_against(dag); });
    return dag;
}

inline Table load_data(const LoadedConfig& lc) {
    const auto& c = lc.config;
    return run_stage("load", [&] {
        if (!c.synthetic()) return load_table(lc.resolve(c.data.csv).string(), c.schema);
        const Table full = generate(*c.data.scm, c.data.scm_rows, c.data.scm_seed);
        std::vector<Column> cols;
        for (const auto& e : c.schema) {
            Column col = full.column(e.name);
            col.kind = e.kind;
            cols.push_back(std::move(col));
        }
        return Table(std::move(cols));
    });
}

struct PreparedData {
    Table analysis;
    Json summary;
};

/// MCAR tests on the raw table, then imputation or complete-case filtering.
inline PreparedData prepare_data(const PipelineConfig& c, const Table& raw) {
    PreparedData out;
    Json mcar = Json::array();
    run_stage("mcar", [&] {
        if (raw.missing_count(c.model.outcome) > 0) {
            throw ValidationError("outcome '" + c.model.outcome + "' has missing values");
        }
        for (const auto& col : raw.columns()) {
            if (raw.missing_count(col.name) == 0) continue;
            const auto r = mcar_test(raw, col.name, c.model.outcome);
            mcar.push_back({{"variable", r.variable},
                            {"missing", raw.missing_count(col.name)},
                            {"missing_fraction", detail::num(r.missing_fraction)},
                            {"chi_square", detail::num(r.chi_square)},
                            {"df", r.df},
                            {"p_value", detail::num(r.p_value)}});
        }
    });
    out.analysis = run_stage("missing-data", [&] {
        if (c.missing == MissingMode::CompleteCase) return complete_cases(raw);
        return impute_iterative(raw, c.impute_iterations, derive_seed(c.seed, "impute"));
    });
    if (out.analysis.rows() == 0) throw StageError("missing-data", ErrorKind::Validation, "no rows remain");
    std::size_t complete = 0, complete_events = 0;
    const auto& y = raw.values(c.model.outcome);
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        bool ok = true;
        for (const auto& col : raw.columns()) ok = ok && !col.missing[i];
        complete += ok;
        complete_events += ok && y[i] == 1.0;
    }
    double events = 0.0;
    for (double v : out.analysis.values(c.model.outcome)) events += v;
    out.summary = {{"rows_loaded", raw.rows()},
                   {"complete_cases", complete},
                   {"complete_case_events", complete_events},
                   {"missing_mode", to_string(c.missing)},
                   {"rows_analysed", out.analysis.rows()},
                   {"outcome_events", static_cast<std::size_t>(events)},
                   {"mcar", mcar}};
    return out;
}

/*
 * prepare_data with an on-disk cache of the analysis table under
 * out_dir/cache. The key covers the data-related config and the input bytes;
 * doubles are stored in shortest round-trip form, so a cache hit is exact.
 */
inline PreparedData prepare_data_cached(const LoadedConfig& lc, const std::filesystem::path& out_dir) {
    const auto& c = lc.config;
    const Json cj = to_json(c);
    std::string key_material = cj.at("data").dump() + cj.at("schema").dump() + cj.at("missing").dump() +
                               std::to_string(c.seed) + c.model.outcome;
    if (!c.synthetic()) key_material += read_file(lc.resolve(c.data.csv));
    const std::string key = std::to_string(fnv1a(key_material));
    const auto dir = out_dir / "cache";
    const auto table_path = dir / "analysis.csv";
    const auto meta_path = dir / "analysis.json";
    if (std::filesystem::exists(meta_path) && std::filesystem::exists(table_path)) {
        try {
            const Json meta = Json::parse(read_file(meta_path));
            if (meta.at("key").get<std::string>() == key) {
                std::vector<SchemaEntry> schema;
                for (const auto& e : c.schema) schema.push_back({e.name, e.kind, {}});
                std::ifstream in(table_path, std::ios::binary);
                return {parse_table(in, schema), meta.at("summary")};
            }
        } catch (const std::exception&) {
            // unreadable cache: recompute
        }
    }
    auto prepared = prepare_data(c, load_data(lc));
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(table_path, std::ios::binary);
        write_table(out, prepared.analysis);
    }
    std::ofstream meta(meta_path, std::ios::binary);
    meta << Json{{"key", key}, {"summary", prepared.summary}}.dump(2) << '\n';
    return prepared;
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

struct StageContext {
    const PipelineConfig& config;
    const Dag& dag;
    const Table& data;
    SideTables& tables;

    std::uint64_t seed(const char* label) const { return derive_seed(config.seed, label); }

    Contrast contrast() const {
        const double hi = config.contrast_high.value_or(data.vector(config.model.treatment).mean());
        return {hi, hi - config.contrast_reduction};
    }

    std::vector<double> dose_grid() const {
        if (!config.dose_grid.empty()) return config.dose_grid;
        const auto& t = data.values(config.model.treatment);
        const double lo = percentile(t, 5.0), hi = percentile(t, 95.0);
        std::vector<double> g;
        for (int k = 0; k <= 18; ++k) g.push_back(lo + (hi - lo) * k / 18.0);
        return g;
    }
};

inline Json baseline_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const std::string group = c.baseline_group.empty() ? c.model.outcome : c.baseline_group;
    std::vector<std::string> vars = c.baseline_variables;
    if (vars.empty()) {
        for (const auto& e : c.schema) {
            if (e.name != group) vars.push_back(e.name);
        }
    }
    const auto rows = summarize_baseline(ctx.data, group, vars);
    auto summary = [](const GroupSummary& s, ColumnKind k) {
        Json j = {{"n", s.n}, {"n_observed", s.n_observed}};
        if (k == ColumnKind::Binary) {
            j["count"] = s.count;
            j["percent"] = detail::num(s.percent);
        } else {
            j["mean"] = detail::num(s.mean);
            j["sd"] = detail::num(s.sd);
        }
        return j;
    };
    Json out = Json::array();
    CsvTable t{{"variable", "kind", "overall", "group0", "group1", "test", "p_value"}, {}};
    for (const auto& r : rows) {
        out.push_back({{"variable", r.variable},
                       {"kind", to_string(r.kind)},
                       {"overall", summary(r.overall, r.kind)},
                       {"group0", summary(r.group0, r.kind)},
                       {"group1", summary(r.group1, r.kind)},
                       {"test", r.test},
                       {"p_value", detail::num(r.p_value)}});
        auto fmt = [&](const GroupSummary& s) {
            return r.kind == ColumnKind::Binary ? std::to_string(s.count) + " (" + detail::cell(s.percent) + "%)"
                                                : detail::cell(s.mean) + " +- " + detail::cell(s.sd);
        };
        t.rows.push_back({r.variable, to_string(r.kind), fmt(r.overall), fmt(r.group0), fmt(r.group1), r.test,
                          detail::cell(r.p_value)});
    }
    ctx.tables["baseline"] = std::move(t);
    return {{"group", group}, {"rows", out}};
}

struct ImplicationTest {
    std::string x;
    std::string y;
    std::vector<std::string> cond;
    std::string source;  // "generated" or "explicit"
    bool d_separated = false;
    PartialCorrelation result;
    bool passed = false;  // p > 0.05
};

inline std::vector<ImplicationTest> run_implication_tests(const PipelineConfig& c, const Dag& dag, const Table& data) {
    std::vector<ImplicationTest> out;
    std::set<std::tuple<std::string, std::string, std::vector<std::string>>> seen;
    auto add = [&](std::string x, std::string y, std::vector<std::string> cond, const char* source) {
        std::sort(cond.begin(), cond.end());
        if (y < x) std::swap(x, y);
        if (!seen.emplace(x, y, cond).second) return;
        ImplicationTest t;
        t.x = x;
        t.y = y;
        t.cond = cond;
        t.source = source;
        t.d_separated = d_separated(dag, x, y, NodeSet(cond.begin(), cond.end()));
        t.result = partial_correlation(data.vector(x), data.vector(y), data.matrix(cond));
        t.passed = t.result.p_value > 0.05;
        out.push_back(std::move(t));
    };
    if (c.generate_implications) {
        for (const auto& imp : testable_implications(dag, c.max_cond_size)) {
            add(imp.x, imp.y, std::vector<std::string>(imp.cond.begin(), imp.cond.end()), "generated");
        }
    }
    for (const auto& imp : c.implications) add(imp.x, imp.y, imp.cond, "explicit");
    return out;
}

inline Json dag_tests_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const NodeSet z(c.model.adjustment.begin(), c.model.adjustment.end());
    const auto verdict = is_valid_backdoor(ctx.dag, c.model.treatment, c.model.outcome, z);
    Json violations = Json::array();
    for (const auto& v : verdict.violations) violations.push_back(describe(v));
    Json implications = Json::array();
    CsvTable t{{"x", "y", "cond", "source", "d_separated", "r", "p_value", "n", "verdict"}, {}};
    for (const auto& i : run_implication_tests(c, ctx.dag, ctx.data)) {
        implications.push_back({{"x", i.x},
                                {"y", i.y},
                                {"cond", i.cond},
                                {"source", i.source},
                                {"d_separated", i.d_separated},
                                {"r", detail::num(i.result.r)},
                                {"p_value", detail::num(i.result.p_value)},
                                {"n", i.result.n},
                                {"verdict", i.passed ? "PASS" : "FAIL"}});
        t.rows.push_back({i.x, i.y, detail::join(i.cond, " "), i.source, i.d_separated ? "true" : "false",
                          detail::cell(i.result.r), detail::cell(i.result.p_value), std::to_string(i.result.n),
                          i.passed ? "PASS" : "FAIL"});
    }
    ctx.tables["implications"] = std::move(t);
    return {{"nodes", ctx.dag.size()},
            {"edges", ctx.dag.edges().size()},
            {"identification", {{"treatment", c.model.treatment},
                                {"outcome", c.model.outcome},
                                {"adjustment", c.model.adjustment},
                                {"valid", verdict.valid},
                                {"violations", violations}}},
            {"implications", implications}};
}

/// Stratified k-fold assignment: each class is shuffled and dealt round-robin.
inline std::vector<std::size_t> stratified_folds(const Vector& y, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold(static_cast<std::size_t>(y.size()));
    Rng rng(seed);
    for (double cls : {0.0, 1.0}) {
        std::vector<std::size_t> idx;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y(i) == cls) idx.push_back(static_cast<std::size_t>(i));
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % folds;
    }
    return fold;
}

inline Json observational_model_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto cov = c.observational_covariates.empty() ? c.model.outcome_covariates() : c.observational_covariates;
    const Matrix X = ctx.data.matrix(cov);
    const Vector y = ctx.data.vector(c.model.outcome);
    const auto fit = logistic_fit_or_throw(X, y);
    const double z = normal_quantile(0.975);
    Json coefs = Json::array();
    CsvTable t{{"term", "beta", "se", "odds_ratio", "or_ci_low", "or_ci_high", "p_value"}, {}};
    for (std::size_t j = 0; j < cov.size(); ++j) {
        const double b = fit.coef(j), se = fit.se(j);
        const double p = two_sided_normal_p(b / se);
        coefs.push_back({{"term", cov[j]},
                         {"beta", detail::num(b)},
                         {"se", detail::num(se)},
                         {"odds_ratio", detail::num(std::exp(b))},
                         {"or_ci_low", detail::num(std::exp(b - z * se))},
                         {"or_ci_high", detail::num(std::exp(b + z * se))},
                         {"p_value", detail::num(p)}});
        t.rows.push_back({cov[j], detail::cell(b), detail::cell(se), detail::cell(std::exp(b)),
                          detail::cell(std::exp(b - z * se)), detail::cell(std::exp(b + z * se)), detail::cell(p)});
    }
    ctx.tables["observational_model"] = std::move(t);

    constexpr std::size_t kFolds = 5;
    const auto fold = stratified_folds(y, kFolds, ctx.seed("observational-cv"));
    std::vector<double> oof(static_cast<std::size_t>(y.size()));
    for (std::size_t f = 0; f < kFolds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        const auto ff = logistic_fit_or_throw(X(train, Eigen::all), y(train));
        const Vector p = predict_proba(ff, X(test, Eigen::all));
        for (std::size_t k = 0; k < test.size(); ++k) oof[static_cast<std::size_t>(test[k])] = p(static_cast<Eigen::Index>(k));
    }
    const std::vector<double> labels(y.data(), y.data() + y.size());
    double brier = 0.0;
    for (std::size_t i = 0; i < oof.size(); ++i) brier += (oof[i] - labels[i]) * (oof[i] - labels[i]);
    brier /= static_cast<double>(oof.size());
    const Vector fitted = predict_proba(fit, X);
    const std::vector<double> apparent(fitted.data(), fitted.data() + fitted.size());
    return {{"covariates", cov},
            {"n", fit.n_observations},
            {"log_likelihood", detail::num(fit.log_likelihood)},
            {"iterations", fit.iterations},
            {"coefficients", coefs},
            {"cv_folds", kFolds},
            {"auroc_cv", detail::num(auroc(oof, labels))},
            {"average_precision_cv", detail::num(average_precision(oof, labels))},
            {"brier_cv", detail::num(brier)},
            {"auroc_apparent", detail::num(auroc(apparent, labels))}};
}

inline Json ace_json(const AceResult& a) {
    return {{"s_high", detail::num(a.s_high)},
            {"s_low", detail::num(a.s_low)},
            {"risk_high", detail::num(a.risk_high)},
            {"risk_low", detail::num(a.risk_low)},
            {"ace", detail::num(a.ace)},
            {"rrr", detail::num(a.rrr)},
            {"ci_low", detail::num(a.ci_low)},
            {"ci_high", detail::num(a.ci_high)},
            {"risk_ratio", detail::num(a.risk_high / a.risk_low)},
            {"rr_ci_low", detail::num(a.rr_ci_low)},
            {"rr_ci_high", detail::num(a.rr_ci_high)},
            {"n_bootstrap", a.n_bootstrap},
            {"n_failed", a.n_failed},
            {"seed", a.seed}};
}

inline Json ace_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto k = ctx.contrast();
    const auto model = fit_outcome_model(ctx.data, c.model);
    const auto ace = gcomp_ace(ctx.data, c.model, k.s_high, k.s_low, c.bootstrap.gcomp, ctx.seed("gcomp"));

    Json curve = Json::array();
    CsvTable dr{{"s", "risk"}, {}};
    for (const auto& p : dose_response_curve(ctx.data, c.model, ctx.dose_grid())) {
        curve.push_back({{"s", detail::num(p.s)}, {"risk", detail::num(p.risk)}});
        dr.rows.push_back({detail::cell(p.s), detail::cell(p.risk)});
    }
    ctx.tables["dose_response"] = std::move(dr);
    CsvTable boot{{"replicate_rank", "ace"}, {}};
    for (std::size_t i = 0; i < ace.bootstrap_aces.size(); ++i) {
        boot.rows.push_back({std::to_string(i), detail::cell(ace.bootstrap_aces[i])});
    }
    ctx.tables["bootstrap_ace"] = std::move(boot);

    const double naive_model =
        naive_contrast(ctx.data, c.model.treatment, c.model.outcome, k.s_high, k.s_low, NaiveMethod::Model);
    Json naive_band = nullptr;
    try {
        naive_band = detail::num(naive_contrast(ctx.data, c.model.treatment, c.model.outcome, k.s_high, k.s_low,
                                                NaiveMethod::Band, c.naive_band));
    } catch (const ComputationError&) {
        // empty band: reported as null
    }
    const Json primary = c.naive_method == NaiveMethod::Model ? Json(naive_model) : naive_band;
    Json inflation = nullptr;
    if (primary.is_number() && ace.ace != 0.0) inflation = detail::num(100.0 * (primary.get<double>() - ace.ace) / ace.ace);
    const double plugin = mean_z_plugin(ctx.data, c.model, k.s_high, k.s_low);

    return {{"contrast", {{"s_high", detail::num(k.s_high)}, {"s_low", detail::num(k.s_low)}, {"reduction", c.contrast_reduction}}},
            {"treatment_coefficient", detail::num(model.treatment_coefficient())},
            {"gcomp", ace_json(ace)},
            {"dose_response", curve},
            {"naive",
             {{"method", c.naive_method == NaiveMethod::Model ? "model" : "band"},
              {"value", primary},
              {"model", detail::num(naive_model)},
              {"band", naive_band},
              {"band_width", c.naive_band},
              {"relative_inflation_percent", inflation}}},
            {"mean_z_plugin", {{"value", detail::num(plugin)}, {"gap_vs_marginal", detail::num(plugin - ace.ace)}}}};
}

inline Json triangulation_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto m = psm_att(ctx.data, c.model, c.caliper, c.stratum, c.bootstrap.psm, ctx.seed("psm"));
    const auto w = ipw_ate(ctx.data, c.model, c.trim_percentile, c.bootstrap.ipw, ctx.seed("ipw"));
    Json balance = Json::array();
    CsvTable bt{{"covariate", "smd_before", "smd_after"}, {}};
    for (const auto& b : m.balance) {
        balance.push_back({{"covariate", b.covariate},
                           {"smd_before", detail::num(b.smd_before)},
                           {"smd_after", detail::num(b.smd_after)}});
        bt.rows.push_back({b.covariate, detail::cell(b.smd_before), detail::cell(b.smd_after)});
    }
    ctx.tables["balance"] = std::move(bt);
    return {{"binary_treatment_threshold", detail::num(m.treatment_threshold)},
            {"psm",
             {{"att", detail::num(m.att)},
              {"ci_low", detail::num(m.ci_low)},
              {"ci_high", detail::num(m.ci_high)},
              {"caliper", m.caliper},
              {"stratum", c.stratum},
              {"n_pairs", m.n_pairs},
              {"n_treated", m.n_treated},
              {"n_unmatched_treated", m.n_unmatched_treated},
              {"n_bootstrap", m.n_bootstrap},
              {"seed", m.seed},
              {"balance", balance}}},
            {"ipw",
             {{"ate", detail::num(w.ate)},
              {"ci_low", detail::num(w.ci_low)},
              {"ci_high", detail::num(w.ci_high)},
              {"max_weight", detail::num(w.max_weight)},
              {"mean_weight", detail::num(w.mean_weight)},
              {"trim_threshold", detail::num(w.trim_threshold)},
              {"trim_percentile", c.trim_percentile},
              {"n_capped", w.n_capped},
              {"effective_sample_size", detail::num(w.effective_sample_size)},
              {"n_bootstrap", w.n_bootstrap},
              {"n_failed", w.n_failed},
              {"seed", w.seed}}}};
}

inline Json refutation_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto k = ctx.contrast();
    const auto perm = permutation_refute(ctx.data, c.model, k.s_high, k.s_low, c.permutations, ctx.seed("permutation"));
    CsvTable nt{{"permutation", "ace"}, {}};
    for (std::size_t i = 0; i < perm.null_aces.size(); ++i) nt.rows.push_back({std::to_string(i), detail::cell(perm.null_aces[i])});
    ctx.tables["permutation_null"] = std::move(nt);

    Json placebos = Json::array();
    CsvTable pt{{"instrument", "target", "adjust", "model", "coefficient", "ci_low", "ci_high", "p_value", "passed",
                 "pre_specified_invalid"},
                {}};
    for (const auto& p : c.placebos) {
        const auto r = placebo_instrument_test(ctx.data, p.instrument, p.target, p.adjust);
        placebos.push_back({{"instrument", r.instrument},
                            {"target", r.target},
                            {"adjust", r.adjust},
                            {"model", r.model},
                            {"coefficient", detail::num(r.coefficient)},
                            {"std_error", detail::num(r.std_error)},
                            {"ci_low", detail::num(r.ci_low)},
                            {"ci_high", detail::num(r.ci_high)},
                            {"p_value", detail::num(r.p_value)},
                            {"passed", r.passed},
                            {"pre_specified_invalid", p.pre_specified_invalid}});
        pt.rows.push_back({r.instrument, r.target, detail::join(r.adjust, " "), r.model, detail::cell(r.coefficient),
                           detail::cell(r.ci_low), detail::cell(r.ci_high), detail::cell(r.p_value),
                           r.passed ? "true" : "false", p.pre_specified_invalid ? "true" : "false"});
    }
    ctx.tables["placebos"] = std::move(pt);
    return {{"permutation",
             {{"observed_ace", detail::num(perm.observed_ace)},
              {"null_mean", detail::num(perm.null_mean)},
              {"null_sd", detail::num(perm.null_sd)},
              {"p_value", detail::num(perm.p_value)},
              {"n_permutations", perm.n_permutations},
              {"n_failed", perm.n_failed},
              {"seed", perm.seed}}},
            {"placebos", placebos}};
}

/// Per-row labels and level order for a subgroup definition.
inline std::pair<std::vector<std::string>, std::vector<std::string>> subgroup_labels(const SubgroupSpec& s,
                                                                                     const Table& data) {
    const auto& v = data.values(s.column);
    std::vector<std::string> levels = s.labels;
    if (data.column(s.column).kind == ColumnKind::Binary) {
        if (levels.empty()) levels = {s.column + "=0", s.column + "=1"};
    } else if (levels.empty()) {
        levels.push_back("<" + format_double(s.edges.front()));
        for (std::size_t k = 0; k + 1 < s.edges.size(); ++k) {
            levels.push_back(format_double(s.edges[k]) + "-" + format_double(s.edges[k + 1]));
        }
        levels.push_back(">=" + format_double(s.edges.back()));
    }
    std::vector<std::string> labels(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (data.column(s.column).kind == ColumnKind::Binary) {
            labels[i] = levels[v[i] == 1.0 ? 1 : 0];
        } else {
            const auto bin = static_cast<std::size_t>(std::upper_bound(s.edges.begin(), s.edges.end(), v[i]) - s.edges.begin());
            labels[i] = levels[bin];
        }
    }
    // drop levels without rows so summaries stay defined
    std::vector<std::string> present;
    for (const auto& l : levels) {
        if (std::find(labels.begin(), labels.end(), l) != labels.end()) present.push_back(l);
    }
    return {labels, present};
}

inline Json cate_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto r = r_learner(ctx.data, c.model, c.rlearner, ctx.seed("rlearner"));
    const auto t = t_learner(ctx.data, c.model, c.rlearner.boost, ctx.seed("tlearner"));
    std::vector<double> r_inc, t_inc;
    for (std::size_t i = 0; i < r.tau.size(); ++i) {
        if (r.included[i]) {
            r_inc.push_back(r.tau[i]);
            t_inc.push_back(t.tau[i]);
        }
    }
    CsvTable tau{{"row", "tau_r", "included", "tau_t"}, {}};
    for (std::size_t i = 0; i < r.tau.size(); ++i) {
        tau.rows.push_back({std::to_string(i), detail::cell(r.tau[i]), r.included[i] ? "1" : "0", detail::cell(t.tau[i])});
    }
    ctx.tables["cate_tau"] = std::move(tau);

    Json groups = Json::array();
    CsvTable st{{"subgroup", "label", "n", "mean_tau", "implied_arr", "ci_low", "ci_high", "mde", "test", "test_p"}, {}};
    for (const auto& s : c.subgroups) {
        const auto [labels, levels] = subgroup_labels(s, ctx.data);
        const auto rows = subgroup_summary(r, labels, levels, 20.0, c.bootstrap.cate_subgroup,
                                           derive_seed(c.seed, "subgroup:" + s.name));
        const std::string test = rows.size() == 2 ? "mann-whitney" : rows.size() > 2 ? "kruskal-wallis" : "none";
        Json jr = Json::array();
        for (const auto& row : rows) {
            Json mde = nullptr;
            if (row.sd_tau > 0.0) mde = detail::num(minimum_detectable_effect(row.n, row.sd_tau, c.power, c.alpha));
            jr.push_back({{"label", row.label},
                          {"n", row.n},
                          {"mean_tau", detail::num(row.mean_tau)},
                          {"sd_tau", detail::num(row.sd_tau)},
                          {"implied_arr", detail::num(row.implied_arr)},
                          {"ci_low", detail::num(row.ci_low)},
                          {"ci_high", detail::num(row.ci_high)},
                          {"mde", mde}});
            st.rows.push_back({s.name, row.label, std::to_string(row.n), detail::cell(row.mean_tau),
                               detail::cell(row.implied_arr), detail::cell(row.ci_low), detail::cell(row.ci_high),
                               mde.is_number() ? detail::cell(mde.get<double>()) : "", test,
                               row.test_p ? detail::cell(*row.test_p) : ""});
        }
        groups.push_back({{"name", s.name},
                          {"column", s.column},
                          {"test", test},
                          {"p_value", rows.size() > 1 && rows.front().test_p ? detail::num(*rows.front().test_p) : Json(nullptr)},
                          {"rows", jr}});
    }
    ctx.tables["cate_subgroups"] = std::move(st);
    return {{"r_learner",
             {{"n_included", r.n_included()},
              {"n_excluded", r.tau.size() - r.n_included()},
              {"mean_tau", detail::num(mean(r_inc))},
              {"sd_tau", detail::num(sample_sd(r_inc))},
              {"pseudo_outcome_clip", {detail::num(r.clip_low_value), detail::num(r.clip_high_value)}},
              {"folds", c.rlearner.folds},
              {"residual_threshold", c.rlearner.residual_threshold}}},
            {"t_learner", {{"mean_tau", detail::num(mean(t.tau))}, {"sd_tau", detail::num(sample_sd(t.tau))}}},
            {"spearman_r_vs_t", detail::num(spearman(r_inc, t_inc))},
            {"subgroups", groups}};
}

inline Json sensitivity_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto rows = e_value_table(ctx.data, c.model, c.interventions, c.bootstrap.gcomp, ctx.seed("gcomp"));
    Json out = Json::array();
    CsvTable t{{"intervention", "ace", "risk_ratio", "rr_ci_low", "rr_ci_high", "e_point", "e_ci"}, {}};
    for (const auto& r : rows) {
        out.push_back({{"intervention", detail::num(r.intervention_mmhg)},
                       {"s_high", detail::num(r.s_high)},
                       {"s_low", detail::num(r.s_low)},
                       {"ace", detail::num(r.ace)},
                       {"risk_ratio", detail::num(r.risk_ratio)},
                       {"rr_ci_low", detail::num(r.rr_ci_low)},
                       {"rr_ci_high", detail::num(r.rr_ci_high)},
                       {"e_point", detail::num(r.e_point)},
                       {"e_ci", detail::num(r.e_ci)}});
        t.rows.push_back({detail::cell(r.intervention_mmhg), detail::cell(r.ace), detail::cell(r.risk_ratio),
                          detail::cell(r.rr_ci_low), detail::cell(r.rr_ci_high), detail::cell(r.e_point),
                          detail::cell(r.e_ci)});
    }
    ctx.tables["evalues"] = std::move(t);
    // descriptive: squared correlation of each adjustment covariate with treatment and outcome
    Json r2 = Json::array();
    const Vector tr = ctx.data.vector(c.model.treatment);
    const Vector y = ctx.data.vector(c.model.outcome);
    for (const auto& a : c.model.adjustment) {
        const Vector x = ctx.data.vector(a);
        const double rt = pearson(x, tr), ry = pearson(x, y);
        r2.push_back({{"covariate", a}, {"r2_treatment", detail::num(rt * rt)}, {"r2_outcome", detail::num(ry * ry)}});
    }
    return {{"e_values", out}, {"covariate_r2", r2}};
}

inline Json oracle_section(const StageContext& ctx) {
    const auto& c = ctx.config;
    const auto& scm = *c.data.scm;
    const auto k = ctx.contrast();
    const auto model = fit_outcome_model(ctx.data, c.model);
    auto oracle = [&](double s) {
        return mc_interventional_risk(scm, c.model.treatment, s, c.model.outcome, c.oracle_mc, c.oracle_seed);
    };
    const auto hi = oracle(k.s_high), lo = oracle(k.s_low);
    const double g_hi = model.interventional_risk(k.s_high), g_lo = model.interventional_risk(k.s_low);
    Json grid = Json::array();
    for (double s : ctx.dose_grid()) {
        const auto o = oracle(s);
        const double g = model.interventional_risk(s);
        grid.push_back({{"s", detail::num(s)},
                        {"oracle_risk", detail::num(o.risk)},
                        {"mc_se", detail::num(o.mc_se)},
                        {"gcomp_risk", detail::num(g)},
                        {"difference", detail::num(g - o.risk)}});
    }
    return {{"n_mc", c.oracle_mc},
            {"seed", c.oracle_seed},
            {"risk_high", detail::num(hi.risk)},
            {"risk_low", detail::num(lo.risk)},
            {"mc_se_high", detail::num(hi.mc_se)},
            {"mc_se_low", detail::num(lo.mc_se)},
            {"ace", detail::num(hi.risk - lo.risk)},
            {"gcomp_ace_minus_oracle", detail::num((g_hi - g_lo) - (hi.risk - lo.risk))},
            {"dose_response", grid}};
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

struct RunResult {
    Json report;
    SideTables tables;
};

using SectionFn = Json (*)(const StageContext&);

struct Section {
    const char* name;
    SectionFn fn;
};

inline const std::vector<Section>& report_sections() {
    static const std::vector<Section> s = {
        {"baseline", baseline_section},       {"dag_tests", dag_tests_section},
        {"observational_model", observational_model_section},
        {"ace", ace_section},                 {"triangulation", triangulation_section},
        {"refutation", refutation_section},   {"cate", cate_section},
        {"sensitivity", sensitivity_section},
    };
    return s;
}

inline Json run_section(const std::string& name, const StageContext& ctx) {
    if (name == "oracle") return run_stage("oracle", [&] { return oracle_section(ctx); });
    for (const auto& s : report_sections()) {
        if (name == s.name) return run_stage(name, [&] { return s.fn(ctx); });
    }
    throw std::logic_error("unknown section " + name);
}

/// Every stage in order; `prepared` short-circuits data loading (for cached runs).
inline RunResult run_pipeline(const LoadedConfig& lc, std::optional<PreparedData> prepared = std::nullopt) {
    using Clock = std::chrono::steady_clock;
    const auto& c = lc.config;
    Json durations = Json::object();
    auto timed = [&](const std::string& name, auto&& f) {
        const auto t0 = Clock::now();
        auto r = f();
        durations[name] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        return r;
    };
    const Dag dag = timed("validate", [&] { return validate_config(lc); });
    if (!prepared) prepared = timed("prepare", [&] { return prepare_data(c, load_data(lc)); });

    RunResult out;
    const StageContext ctx{c, dag, prepared->analysis, out.tables};
    Json sections = Json::object();
    for (const auto& s : report_sections()) sections[s.name] = timed(s.name, [&] { return run_section(s.name, ctx); });
    if (c.synthetic()) sections["oracle"] = timed("oracle", [&] { return run_section("oracle", ctx); });

    out.report = {{"format", "docausal-report"},
                  {"schema_version", kReportSchemaVersion},
                  {"run", {{"seed", c.seed}, {"provenance", std::string("docausal ") + kVersion}, {"durations_ms", durations}}},
                  {"config", to_json(c)},
                  {"data", prepared->summary},
                  {"sections", sections}};
    return out;
}

/// The report without timing fields; two runs with identical inputs serialize identically.
inline Json strip_timing(Json report) {
    if (report.contains("run")) report["run"].erase("durations_ms");
    return report;
}

inline void write_outputs(const std::filesystem::path& out_dir, const std::string& report_name, const Json& doc,
                          const SideTables& tables) {
    std::filesystem::create_directories(out_dir / "tables");
    {
        std::ofstream f(out_dir / report_name, std::ios::binary);
        if (!f) throw ValidationError("cannot write to '" + (out_dir / report_name).string() + "'");
        f << doc.dump(2) << '\n';
    }
    for (const auto& [name, t] : tables) {
        std::ofstream f(out_dir / "tables" / (name + ".csv"), std::ios::binary);
        write_csv(f, t);
    }
}

}  // namespace docausal

#endif  // DOCAUSAL_PIPELINE_HPP
