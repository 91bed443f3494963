#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "docausal/config.hpp"
#include "docausal/synth.hpp"

using namespace docausal;

namespace {

std::filesystem::path config_path(const char* name) { return std::filesystem::path(DOCAUSAL_SOURCE_DIR) / "configs" / name; }

ScmSpec two_node(double intercept, double slope) {
    ScmSpec s;
    s.variables = {{"T", ScmKind::GaussianLinear, 10.0, {}, 2.0},
                   {"Y", ScmKind::BernoulliLogistic, intercept, {{"T", slope}}, 0.0}};
    return s;
}

Json minimal_config() {
    return Json::parse(R"({
        "schema_version": 1,
        "data": {"scm": {"variables": [
            {"name": "A", "kind": "gaussian-linear", "intercept": 0, "noise_sd": 1, "terms": []},
            {"name": "T", "kind": "gaussian-linear", "intercept": 0, "noise_sd": 1, "terms": [{"parent": "A", "coefficient": 1}]},
            {"name": "Y", "kind": "bernoulli-logistic", "intercept": 0, "terms": [{"parent": "T", "coefficient": 0.5}, {"parent": "A", "coefficient": 0.5}]}
        ]}, "rows": 500, "seed": 1},
        "model": {"treatment": "T", "outcome": "Y", "adjustment": ["A"]},
        "matching": {"stratum": "Y"}
    })");
}

}  // namespace

TEST(Synth, GenerateIsSeededAndTyped) {
    const Table a = generate(reference_scm(), 5000, 3);
    EXPECT_EQ(a, generate(reference_scm(), 5000, 3));
    EXPECT_FALSE(a == generate(reference_scm(), 5000, 4));
    EXPECT_EQ(a.rows(), 5000u);
    EXPECT_EQ(a.column("CHD").kind, ColumnKind::Binary);
    EXPECT_EQ(a.column("SYSBP").kind, ColumnKind::Continuous);
    // a prefix of a longer draw is the shorter draw
    const Table b = generate(reference_scm(), 5001, 3);
    EXPECT_EQ(b.values("AGE")[4999], a.values("AGE")[4999]);
}

TEST(Synth, MarginalMomentsOfRootNodes) {
    const Table t = generate(reference_scm(), 40000, 8);
    const auto age = t.vector("AGE");
    EXPECT_NEAR(age.mean(), 49.6, 0.2);
    EXPECT_NEAR(std::sqrt((age.array() - age.mean()).square().mean()), 8.6, 0.15);
    EXPECT_NEAR(t.vector("SEX_MALE").mean(), inv_logit(-0.22), 0.01);
}

TEST(Synth, OracleMatchesClosedFormWithoutConfounding) {
    const auto spec = two_node(-2.0, 0.1);
    for (double s : {0.0, 10.0, 25.0}) {
        const auto r = mc_interventional_risk(spec, "T", s, "Y", 200000, 5);
        EXPECT_NEAR(r.risk, inv_logit(-2.0 + 0.1 * s), 4.0 * r.mc_se + 1e-12) << s;
    }
}

TEST(Synth, OracleOnEdgelessModelIgnoresIntervention) {
    const auto spec = two_node(-1.0, 0.0);
    const auto lo = mc_interventional_risk(spec, "T", -50.0, "Y", 100000, 9);
    const auto hi = mc_interventional_risk(spec, "T", 50.0, "Y", 100000, 9);
    EXPECT_DOUBLE_EQ(lo.risk, hi.risk);
    EXPECT_NEAR(lo.risk, inv_logit(-1.0), 4.0 * lo.mc_se);
}

TEST(Synth, ValidationAndDag) {
    const Dag d = to_dag(reference_scm());
    EXPECT_TRUE(d.has_edge("SYSBP", "CHD"));
    EXPECT_EQ(d.size(), 9u);
    ScmSpec bad = two_node(0.0, 1.0);
    std::swap(bad.variables[0], bad.variables[1]);
    EXPECT_THROW(bad.validate(), ValidationError);
    ScmSpec neg = two_node(0.0, 1.0);
    neg.variables[0].noise_sd = -1.0;
    EXPECT_THROW(neg.validate(), ValidationError);
    ScmSpec zero = two_node(0.0, 1.0);
    zero.variables[0].noise_sd = 0.0;
    EXPECT_NO_THROW(zero.validate());
    EXPECT_THROW(mc_interventional_risk(two_node(0, 1), "Y", 1.0, "T", 10, 1), ValidationError);
}

TEST(Config, ShippedConfigsRoundTrip) {
    for (const char* name : {"reference_scm.json", "null_scm.json", "framingham.json"}) {
        const auto lc = load_config(config_path(name));
        EXPECT_EQ(config_from_json(to_json(lc.config)), lc.config) << name;
    }
}

TEST(Config, SyntheticConfigsUseReferenceModel) {
    EXPECT_EQ(*load_config(config_path("reference_scm.json")).config.data.scm, reference_scm(0.018));
    EXPECT_EQ(*load_config(config_path("null_scm.json")).config.data.scm, reference_scm(0.0));
}

TEST(Config, DefaultsFillMinimalConfig) {
    const auto c = config_from_json(minimal_config());
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.schema.size(), 3u);
    EXPECT_EQ(c.bootstrap.gcomp, 1500u);
    EXPECT_EQ(c.missing, MissingMode::Impute);
    EXPECT_TRUE(c.synthetic());
    EXPECT_EQ(config_from_json(to_json(c)), c);
}

TEST(Config, RejectsUnknownKeysAndBadVersions) {
    auto j = minimal_config();
    j["colour"] = 1;
    EXPECT_THROW(config_from_json(j), ValidationError);
    j = minimal_config();
    j["model"]["treatmnt"] = "T";
    EXPECT_THROW(config_from_json(j), ValidationError);
    j = minimal_config();
    j["schema_version"] = 2;
    EXPECT_THROW(config_from_json(j), ValidationError);
    j = minimal_config();
    j["data"]["csv"] = "x.csv";
    EXPECT_THROW(config_from_json(j), ValidationError);
    EXPECT_THROW(parse_config("{"), ValidationError);
    j = minimal_config();
    j["missing"] = {{"mode", "drop"}};
    EXPECT_THROW(config_from_json(j), ValidationError);
}
