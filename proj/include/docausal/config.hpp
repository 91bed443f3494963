#ifndef DOCAUSAL_CONFIG_HPP
#define DOCAUSAL_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "docausal/cate.hpp"
#include "docausal/dag.hpp"
#include "docausal/effects.hpp"
#include "docausal/error.hpp"
#include "docausal/gboost.hpp"
#include "docausal/synth.hpp"
#include "docausal/table.hpp"

namespace docausal {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

enum class MissingMode { Impute, CompleteCase };

inline const char* to_string(MissingMode m) { return m == MissingMode::Impute ? "impute" : "complete-case"; }

inline MissingMode missing_mode_from_string(const std::string& s) {
    if (s == "impute") return MissingMode::Impute;
    if (s == "complete-case") return MissingMode::CompleteCase;
    throw ValidationError("missing-data mode must be 'impute' or 'complete-case', got '" + s + "'");
}

struct DataSource {
    std::string csv;                 // path relative to the config file
    std::optional<ScmSpec> scm;      // synthetic source when set
    std::size_t scm_rows = 0;
    std::uint64_t scm_seed = 0;
    bool operator==(const DataSource&) const = default;
};

struct BootstrapCounts {
    std::size_t gcomp = 1500;
    std::size_t psm = 800;
    std::size_t ipw = 800;
    std::size_t cate_subgroup = 500;
    bool operator==(const BootstrapCounts&) const = default;
};

struct PlaceboSpec {
    std::string instrument;
    std::string target;
    std::vector<std::string> adjust;
    bool pre_specified_invalid = false;
    bool operator==(const PlaceboSpec&) const = default;
};

/// Binary column (two labels, for 0 and 1) or a continuous column cut at `edges` (edges.size() + 1 labels).
struct SubgroupSpec {
    std::string name;
    std::string column;
    std::vector<double> edges;
    std::vector<std::string> labels;
    bool operator==(const SubgroupSpec&) const = default;
};

struct ImplicationSpec {
    std::string x;
    std::string y;
    std::vector<std::string> cond;
    bool operator==(const ImplicationSpec&) const = default;
};

struct PipelineConfig {
    int schema_version = kConfigSchemaVersion;
    std::uint64_t seed = 42;
    DataSource data;
    std::vector<SchemaEntry> schema;
    std::string dag;  // path relative to the config file; empty derives the DAG from the SCM
    CausalModelSpec model;
    std::optional<double> contrast_high;  // empty: cohort mean of the treatment
    double contrast_reduction = 20.0;
    std::vector<double> dose_grid;
    std::vector<double> interventions{20.0, 15.0, 10.0};
    BootstrapCounts bootstrap;
    std::size_t permutations = 600;
    double caliper = 0.05;
    std::string stratum;
    double trim_percentile = 98.0;
    NaiveMethod naive_method = NaiveMethod::Model;
    double naive_band = 2.5;
    RLearnerConfig rlearner;
    std::size_t max_cond_size = 3;
    bool generate_implications = true;
    std::vector<ImplicationSpec> implications;
    std::vector<PlaceboSpec> placebos;
    std::vector<SubgroupSpec> subgroups;
    std::string baseline_group;  // empty: the outcome
    std::vector<std::string> baseline_variables;  // empty: every other schema column
    std::vector<std::string> observational_covariates;  // empty: the outcome-model covariates
    MissingMode missing = MissingMode::Impute;
    std::size_t impute_iterations = 10;
    double power = 0.8;
    double alpha = 0.05;
    std::size_t oracle_mc = 500000;
    std::uint64_t oracle_seed = 7;

    bool synthetic() const { return data.scm.has_value(); }

    bool operator==(const PipelineConfig&) const = default;
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

template <class T>
T get_req(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(where + " is missing required key '" + key + "'");
    return get_or<T>(j, key, T{}, where);
}

inline std::size_t get_count(const Json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw ValidationError("'" + std::string(key) + "' in " + where + " must be a positive integer");
    }
    return v.get<std::size_t>();
}

inline std::uint64_t get_seed(const Json& j, const char* key, std::uint64_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ValidationError("'" + std::string(key) + "' in " + where + " must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

}  // namespace detail

inline Json to_json(const BoostParams& p) {
    return {{"n_estimators", p.n_estimators},
            {"max_depth", p.max_depth},
            {"learning_rate", p.learning_rate},
            {"min_leaf", p.min_leaf}};
}

inline BoostParams boost_params_from_json(const Json& j) {
    const std::string where = "boost";
    detail::check_keys(j, {"n_estimators", "max_depth", "learning_rate", "min_leaf"}, where);
    BoostParams p;
    p.n_estimators = detail::get_count(j, "n_estimators", p.n_estimators, where);
    p.max_depth = detail::get_count(j, "max_depth", p.max_depth, where);
    p.learning_rate = detail::get_or(j, "learning_rate", p.learning_rate, where);
    p.min_leaf = detail::get_count(j, "min_leaf", p.min_leaf, where);
    p.validate();
    return p;
}

inline Json to_json(const ScmSpec& s) {
    Json vars = Json::array();
    for (const auto& v : s.variables) {
        Json terms = Json::array();
        for (const auto& t : v.terms) terms.push_back({{"parent", t.parent}, {"coefficient", t.coefficient}});
        Json jv = {{"name", v.name}, {"kind", to_string(v.kind)}, {"intercept", v.intercept}, {"terms", terms}};
        if (v.kind == ScmKind::GaussianLinear) jv["noise_sd"] = v.noise_sd;
        vars.push_back(std::move(jv));
    }
    return {{"variables", vars}};
}

inline ScmSpec scm_from_json(const Json& j) {
    detail::check_keys(j, {"variables"}, "scm");
    const auto& vars = j.at("variables");
    if (!vars.is_array()) throw ValidationError("scm.variables must be an array");
    ScmSpec s;
    for (const auto& jv : vars) {
        const std::string where = "scm variable";
        detail::check_keys(jv, {"name", "kind", "intercept", "terms", "noise_sd"}, where);
        ScmVariable v;
        v.name = detail::get_req<std::string>(jv, "name", where);
        v.kind = scm_kind_from_string(detail::get_req<std::string>(jv, "kind", where));
        v.intercept = detail::get_or(jv, "intercept", 0.0, where);
        v.noise_sd = v.kind == ScmKind::GaussianLinear ? detail::get_or(jv, "noise_sd", 1.0, where) : 0.0;
        if (jv.contains("terms")) {
            for (const auto& jt : jv.at("terms")) {
                detail::check_keys(jt, {"parent", "coefficient"}, "scm term of " + v.name);
                v.terms.push_back({detail::get_req<std::string>(jt, "parent", where),
                                   detail::get_req<double>(jt, "coefficient", where)});
            }
        }
        s.variables.push_back(std::move(v));
    }
    s.validate();
    return s;
}

inline Json to_json(const PipelineConfig& c) {
    Json data;
    if (c.data.scm) {
        data = {{"scm", to_json(*c.data.scm)}, {"rows", c.data.scm_rows}, {"seed", c.data.scm_seed}};
    } else {
        data = {{"csv", c.data.csv}};
    }
    Json schema = Json::array();
    for (const auto& e : c.schema) schema.push_back({{"name", e.name}, {"column", e.header()}, {"kind", to_string(e.kind)}});
    Json implications = Json::array();
    for (const auto& i : c.implications) implications.push_back({{"x", i.x}, {"y", i.y}, {"cond", i.cond}});
    Json placebos = Json::array();
    for (const auto& p : c.placebos) {
        placebos.push_back({{"instrument", p.instrument},
                            {"target", p.target},
                            {"adjust", p.adjust},
                            {"pre_specified_invalid", p.pre_specified_invalid}});
    }
    Json subgroups = Json::array();
    for (const auto& s : c.subgroups) {
        subgroups.push_back({{"name", s.name}, {"column", s.column}, {"edges", s.edges}, {"labels", s.labels}});
    }
    Json j = {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"data", data},
        {"schema", schema},
        {"dag", c.dag},
        {"model",
         {{"treatment", c.model.treatment},
          {"outcome", c.model.outcome},
          {"adjustment", c.model.adjustment},
          {"precision", c.model.precision}}},
        {"contrast", {{"high", c.contrast_high ? Json(*c.contrast_high) : Json(nullptr)}, {"reduction", c.contrast_reduction}}},
        {"dose_grid", c.dose_grid},
        {"interventions", c.interventions},
        {"bootstrap",
         {{"gcomp", c.bootstrap.gcomp},
          {"psm", c.bootstrap.psm},
          {"ipw", c.bootstrap.ipw},
          {"cate_subgroup", c.bootstrap.cate_subgroup}}},
        {"permutations", c.permutations},
        {"matching", {{"caliper", c.caliper}, {"stratum", c.stratum}}},
        {"ipw", {{"trim_percentile", c.trim_percentile}}},
        {"naive", {{"method", c.naive_method == NaiveMethod::Model ? "model" : "band"}, {"band", c.naive_band}}},
        {"rlearner",
         {{"folds", c.rlearner.folds},
          {"residual_threshold", c.rlearner.residual_threshold},
          {"clip_low", c.rlearner.clip_low},
          {"clip_high", c.rlearner.clip_high},
          {"final_covariates", c.rlearner.final_covariates == CateCovariates::AdjustmentOnly ? "adjustment"
                                                                                               : "adjustment+precision"},
          {"boost", to_json(c.rlearner.boost)}}},
        {"implications", {{"max_cond_size", c.max_cond_size}, {"generate", c.generate_implications}, {"explicit", implications}}},
        {"placebos", placebos},
        {"subgroups", subgroups},
        {"baseline", {{"group", c.baseline_group}, {"variables", c.baseline_variables}}},
        {"observational", {{"covariates", c.observational_covariates}}},
        {"missing", {{"mode", to_string(c.missing)}, {"iterations", c.impute_iterations}}},
        {"power", {{"power", c.power}, {"alpha", c.alpha}}},
        {"oracle", {{"n_mc", c.oracle_mc}, {"seed", c.oracle_seed}}},
    };
    return j;
}

/// Parses and shape-checks a config. Cross-references against data and DAG happen in validate_config.
inline PipelineConfig config_from_json(const Json& j) {
    using namespace detail;
    const std::string top = "config";
    check_keys(j,
               {"schema_version", "seed", "data", "schema", "dag", "model", "contrast", "dose_grid", "interventions",
                "bootstrap", "permutations", "matching", "ipw", "naive", "rlearner", "implications", "placebos",
                "subgroups", "baseline", "observational", "missing", "power", "oracle"},
               top);
    PipelineConfig c;
    c.schema_version = get_req<int>(j, "schema_version", top);
    if (c.schema_version != kConfigSchemaVersion) {
        throw ValidationError("unsupported config schema_version " + std::to_string(c.schema_version) + " (expected " +
                              std::to_string(kConfigSchemaVersion) + ")");
    }
    c.seed = get_seed(j, "seed", c.seed, top);

    const auto& data = j.contains("data") ? j.at("data") : throw ValidationError("config is missing 'data'");
    check_keys(data, {"csv", "scm", "rows", "seed"}, "data");
    if (data.contains("scm") == data.contains("csv")) throw ValidationError("data needs exactly one of 'csv' or 'scm'");
    if (data.contains("scm")) {
        c.data.scm = scm_from_json(data.at("scm"));
        c.data.scm_rows = get_count(data, "rows", 0, "data");
        if (c.data.scm_rows == 0) throw ValidationError("synthetic data needs 'rows'");
        c.data.scm_seed = get_seed(data, "seed", 0, "data");
    } else {
        if (data.contains("rows") || data.contains("seed")) throw ValidationError("'rows'/'seed' apply to scm data only");
        c.data.csv = get_req<std::string>(data, "csv", "data");
    }

    if (j.contains("schema")) {
        if (!j.at("schema").is_array()) throw ValidationError("schema must be an array");
        for (const auto& e : j.at("schema")) {
            check_keys(e, {"name", "column", "kind"}, "schema entry");
            SchemaEntry s;
            s.name = get_req<std::string>(e, "name", "schema entry");
            s.kind = column_kind_from_string(get_req<std::string>(e, "kind", "schema entry"));
            s.csv_column = get_or<std::string>(e, "column", s.name, "schema entry");
            if (s.csv_column == s.name) s.csv_column.clear();
            c.schema.push_back(std::move(s));
        }
    } else if (c.data.scm) {
        for (const auto& v : c.data.scm->variables) {
            c.schema.push_back({v.name, v.kind == ScmKind::BernoulliLogistic ? ColumnKind::Binary : ColumnKind::Continuous, {}});
        }
    } else {
        throw ValidationError("csv data needs a 'schema'");
    }
    c.dag = get_or<std::string>(j, "dag", "", top);

    const auto& m = j.contains("model") ? j.at("model") : throw ValidationError("config is missing 'model'");
    check_keys(m, {"treatment", "outcome", "adjustment", "precision"}, "model");
    c.model.treatment = get_req<std::string>(m, "treatment", "model");
    c.model.outcome = get_req<std::string>(m, "outcome", "model");
    c.model.adjustment = get_or<std::vector<std::string>>(m, "adjustment", {}, "model");
    c.model.precision = get_or<std::vector<std::string>>(m, "precision", {}, "model");

    if (j.contains("contrast")) {
        const auto& k = j.at("contrast");
        check_keys(k, {"high", "reduction"}, "contrast");
        if (k.contains("high") && !k.at("high").is_null()) c.contrast_high = get_req<double>(k, "high", "contrast");
        c.contrast_reduction = get_or(k, "reduction", c.contrast_reduction, "contrast");
    }
    c.dose_grid = get_or<std::vector<double>>(j, "dose_grid", {}, top);
    c.interventions = get_or(j, "interventions", c.interventions, top);

    if (j.contains("bootstrap")) {
        const auto& b = j.at("bootstrap");
        check_keys(b, {"gcomp", "psm", "ipw", "cate_subgroup"}, "bootstrap");
        c.bootstrap.gcomp = get_count(b, "gcomp", c.bootstrap.gcomp, "bootstrap");
        c.bootstrap.psm = get_count(b, "psm", c.bootstrap.psm, "bootstrap");
        c.bootstrap.ipw = get_count(b, "ipw", c.bootstrap.ipw, "bootstrap");
        c.bootstrap.cate_subgroup = get_count(b, "cate_subgroup", c.bootstrap.cate_subgroup, "bootstrap");
    }
    c.permutations = get_count(j, "permutations", c.permutations, top);
    if (j.contains("matching")) {
        const auto& mt = j.at("matching");
        check_keys(mt, {"caliper", "stratum"}, "matching");
        c.caliper = get_or(mt, "caliper", c.caliper, "matching");
        c.stratum = get_or<std::string>(mt, "stratum", "", "matching");
    }
    if (j.contains("ipw")) {
        check_keys(j.at("ipw"), {"trim_percentile"}, "ipw");
        c.trim_percentile = get_or(j.at("ipw"), "trim_percentile", c.trim_percentile, "ipw");
    }
    if (j.contains("naive")) {
        const auto& nv = j.at("naive");
        check_keys(nv, {"method", "band"}, "naive");
        const auto method = get_or<std::string>(nv, "method", "model", "naive");
        if (method != "model" && method != "band") throw ValidationError("naive.method must be 'model' or 'band'");
        c.naive_method = method == "model" ? NaiveMethod::Model : NaiveMethod::Band;
        c.naive_band = get_or(nv, "band", c.naive_band, "naive");
    }
    if (j.contains("rlearner")) {
        const auto& r = j.at("rlearner");
        check_keys(r, {"folds", "residual_threshold", "clip_low", "clip_high", "final_covariates", "boost"}, "rlearner");
        c.rlearner.folds = get_count(r, "folds", c.rlearner.folds, "rlearner");
        c.rlearner.residual_threshold = get_or(r, "residual_threshold", c.rlearner.residual_threshold, "rlearner");
        c.rlearner.clip_low = get_or(r, "clip_low", c.rlearner.clip_low, "rlearner");
        c.rlearner.clip_high = get_or(r, "clip_high", c.rlearner.clip_high, "rlearner");
        const auto fc = get_or<std::string>(r, "final_covariates", "adjustment+precision", "rlearner");
        if (fc == "adjustment") {
            c.rlearner.final_covariates = CateCovariates::AdjustmentOnly;
        } else if (fc == "adjustment+precision") {
            c.rlearner.final_covariates = CateCovariates::AdjustmentAndPrecision;
        } else {
            throw ValidationError("rlearner.final_covariates must be 'adjustment' or 'adjustment+precision'");
        }
        if (r.contains("boost")) c.rlearner.boost = boost_params_from_json(r.at("boost"));
    }
    if (j.contains("implications")) {
        const auto& im = j.at("implications");
        check_keys(im, {"max_cond_size", "generate", "explicit"}, "implications");
        c.max_cond_size = get_or<std::size_t>(im, "max_cond_size", c.max_cond_size, "implications");
        c.generate_implications = get_or(im, "generate", c.generate_implications, "implications");
        if (im.contains("explicit")) {
            for (const auto& e : im.at("explicit")) {
                check_keys(e, {"x", "y", "cond"}, "implication");
                c.implications.push_back({get_req<std::string>(e, "x", "implication"),
                                          get_req<std::string>(e, "y", "implication"),
                                          get_or<std::vector<std::string>>(e, "cond", {}, "implication")});
            }
        }
    }
    if (j.contains("placebos")) {
        for (const auto& p : j.at("placebos")) {
            check_keys(p, {"instrument", "target", "adjust", "pre_specified_invalid"}, "placebo");
            c.placebos.push_back({get_req<std::string>(p, "instrument", "placebo"),
                                  get_req<std::string>(p, "target", "placebo"),
                                  get_or<std::vector<std::string>>(p, "adjust", {}, "placebo"),
                                  get_or(p, "pre_specified_invalid", false, "placebo")});
        }
    }
    if (j.contains("subgroups")) {
        for (const auto& s : j.at("subgroups")) {
            check_keys(s, {"name", "column", "edges", "labels"}, "subgroup");
            c.subgroups.push_back({get_req<std::string>(s, "name", "subgroup"),
                                   get_req<std::string>(s, "column", "subgroup"),
                                   get_or<std::vector<double>>(s, "edges", {}, "subgroup"),
                                   get_or<std::vector<std::string>>(s, "labels", {}, "subgroup")});
        }
    }
    if (j.contains("observational")) {
        const auto& o = j.at("observational");
        check_keys(o, {"covariates"}, "observational");
        c.observational_covariates = get_or<std::vector<std::string>>(o, "covariates", {}, "observational");
    }
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        check_keys(b, {"group", "variables"}, "baseline");
        c.baseline_group = get_or<std::string>(b, "group", "", "baseline");
        c.baseline_variables = get_or<std::vector<std::string>>(b, "variables", {}, "baseline");
    }
    if (j.contains("missing")) {
        const auto& mi = j.at("missing");
        check_keys(mi, {"mode", "iterations"}, "missing");
        c.missing = missing_mode_from_string(get_or<std::string>(mi, "mode", "impute", "missing"));
        c.impute_iterations = get_count(mi, "iterations", c.impute_iterations, "missing");
    }
    if (j.contains("power")) {
        const auto& pw = j.at("power");
        check_keys(pw, {"power", "alpha"}, "power");
        c.power = get_or(pw, "power", c.power, "power");
        c.alpha = get_or(pw, "alpha", c.alpha, "power");
    }
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        check_keys(o, {"n_mc", "seed"}, "oracle");
        c.oracle_mc = get_count(o, "n_mc", c.oracle_mc, "oracle");
        c.oracle_seed = get_seed(o, "seed", c.oracle_seed, "oracle");
    }
    return c;
}

inline PipelineConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

struct LoadedConfig {
    PipelineConfig config;
    std::filesystem::path base_dir;  // relative paths in the config resolve against this

    std::filesystem::path resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline LoadedConfig load_config(const std::filesystem::path& path) {
    return {parse_config(read_file(path)), std::filesystem::absolute(path).parent_path()};
}

}  // namespace docausal

#endif  // DOCAUSAL_CONFIG_HPP
