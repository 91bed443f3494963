// docausal command-line front end. Exit codes: 0 ok, 1 validation, 2 computation, 64 usage.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "docausal/docausal.hpp"

namespace fs = std::filesystem;
using namespace docausal;

namespace {

constexpr int kExitUsage = 64;

struct Options {
    std::string config;
    std::string dag;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::string missing;
    std::optional<double> rr;
};

LoadedConfig load(const Options& o) {
    auto lc = run_stage("config", [&] { return load_config(o.config); });
    if (o.seed) lc.config.seed = *o.seed;
    if (!o.missing.empty()) lc.config.missing = run_stage("config", [&] { return missing_mode_from_string(o.missing); });
    return lc;
}

// Validation, cached data preparation, then one named section.
Json single_section(const Options& o, const std::string& name, SideTables& tables) {
    const auto lc = load(o);
    const Dag dag = validate_config(lc);
    const auto prepared = run_stage("prepare", [&] { return prepare_data_cached(lc, o.out); });
    const StageContext ctx{lc.config, dag, prepared.analysis, tables};
    return run_section(name, ctx);
}

void emit(const Options& o, const std::string& file, const Json& doc, const SideTables& tables) {
    write_outputs(o.out, file, doc, tables);
    std::cout << doc.dump(2) << '\n';
}

int cmd_validate_dag(const Options& o) {
    if (!o.dag.empty()) {
        const Dag dag = run_stage("dag", [&] { return parse_dag(read_file(o.dag)); });
        std::cout << "ok: " << dag.size() << " nodes, " << dag.edges().size() << " edges\n";
        return 0;
    }
    const auto lc = load(o);
    const Dag dag = validate_config(lc);
    const auto& m = lc.config.model;
    std::cout << "ok: " << dag.size() << " nodes, " << dag.edges().size() << " edges\n"
              << "adjustment set for " << m.treatment << " -> " << m.outcome << " satisfies the back-door criterion\n";
    return 0;
}

int cmd_test_implications(const Options& o) {
    SideTables tables;
    const Json section = single_section(o, "dag_tests", tables);
    write_outputs(o.out, "implications.json", section, tables);
    write_csv(std::cout, tables.at("implications"));
    return 0;
}

int cmd_section(const Options& o, const std::string& section, const std::string& file) {
    SideTables tables;
    const Json doc = single_section(o, section, tables);
    emit(o, file, doc, tables);
    return 0;
}

int cmd_evalue(const Options& o) {
    if (o.rr) {
        const double e = run_stage("evalue", [&] { return e_value(*o.rr); });
        std::printf("%.2f\n", e);
        return 0;
    }
    return cmd_section(o, "sensitivity", "evalue.json");
}

int cmd_report(const Options& o) {
    const auto lc = load(o);
    validate_config(lc);
    auto prepared = run_stage("prepare", [&] { return prepare_data_cached(lc, o.out); });
    const auto result = run_pipeline(lc, std::move(prepared));
    write_outputs(o.out, "report.json", result.report, result.tables);
    std::cout << "wrote " << (fs::path(o.out) / "report.json").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"docausal: causal analysis of a continuous exposure on a binary outcome"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", o.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
        if (config_required) c->required();
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--missing", o.missing, "missing-data mode")->check(CLI::IsMember({"impute", "complete-case"}));
        return sub;
    };

    auto* validate = common(app.add_subcommand("validate-dag", "parse a DAG and check the adjustment set"), false);
    validate->add_option("--dag", o.dag, "DAG file (checks syntax and acyclicity only)")->check(CLI::ExistingFile);
    auto* implications = common(app.add_subcommand("test-implications", "partial-correlation tests of DAG implications"), true);
    auto* estimate = common(app.add_subcommand("estimate", "g-computation ACE, dose response and naive contrasts"), true);
    auto* refute = common(app.add_subcommand("refute", "permutation null and placebo instruments"), true);
    auto* cate = common(app.add_subcommand("cate", "R-learner and T-learner heterogeneity"), true);
    auto* evalue = common(app.add_subcommand("evalue", "E-values from --rr or from a config"), false);
    evalue->add_option("--rr", o.rr, "risk ratio");
    auto* report = common(app.add_subcommand("report", "full pipeline"), true);

    try {
        app.parse(argc, argv);
        if (validate->parsed() && o.dag.empty() && o.config.empty()) {
            throw CLI::RequiredError("validate-dag needs --dag or --config");
        }
        if (evalue->parsed() && !o.rr && o.config.empty()) throw CLI::RequiredError("evalue needs --rr or --config");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate_dag(o);
        if (implications->parsed()) return cmd_test_implications(o);
        if (estimate->parsed()) return cmd_section(o, "ace", "estimate.json");
        if (refute->parsed()) return cmd_section(o, "refutation", "refute.json");
        if (cate->parsed()) return cmd_section(o, "cate", "cate.json");
        if (evalue->parsed()) return cmd_evalue(o);
        if (report->parsed()) return cmd_report(o);
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::Validation ? 1 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return kExitUsage;
}
