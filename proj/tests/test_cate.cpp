#include <gtest/gtest.h>

#include <cmath>

#include "docausal/cate.hpp"
#include "oracles.hpp"

using namespace docausal;

namespace {

const CausalModelSpec kSpec{"T", "Y", {"X1", "X2"}, {}};

RLearnerConfig small_config() {
    RLearnerConfig c;
    c.boost = BoostParams{50, 2, 0.1, 20};
    return c;
}

CateEstimates manual(std::vector<double> tau, std::vector<bool> included) {
    CateEstimates e;
    e.tau = std::move(tau);
    e.included = std::move(included);
    return e;
}

}  // namespace

TEST(Folds, BalancedAndSeeded) {
    const auto f = assign_folds(103, 5, 8);
    std::vector<int> count(5, 0);
    for (auto k : f) {
        ASSERT_LT(k, 5u);
        ++count[k];
    }
    for (int c : count) EXPECT_TRUE(c == 20 || c == 21);
    EXPECT_EQ(f, assign_folds(103, 5, 8));
    EXPECT_NE(f, assign_folds(103, 5, 9));
}

TEST(RLearner, ConfigValidation) {
    RLearnerConfig c;
    c.folds = 1;
    EXPECT_THROW(c.validate(), ValidationError);
    c = RLearnerConfig{};
    c.clip_low = 60;
    c.clip_high = 40;
    EXPECT_THROW(c.validate(), ValidationError);
    c = RLearnerConfig{};
    c.residual_threshold = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(RLearner, FilterAndClipInvariants) {
    const Table t = oracle::linear_cate_data(3000, 0.002, 4);
    const auto cfg = small_config();
    const auto e = r_learner_with(t, kSpec, cfg, 4, LinearNuisance{});
    ASSERT_EQ(e.tau.size(), 3000u);
    EXPECT_LT(e.clip_low_value, e.clip_high_value);
    for (std::size_t i = 0; i < e.tau.size(); ++i) {
        ASSERT_EQ(e.included[i], std::abs(e.treatment_residual[i]) > cfg.residual_threshold);
        if (e.included[i]) {
            EXPECT_GE(e.pseudo_outcome[i], e.clip_low_value);
            EXPECT_LE(e.pseudo_outcome[i], e.clip_high_value);
        } else {
            EXPECT_TRUE(std::isnan(e.pseudo_outcome[i]));
        }
        EXPECT_TRUE(std::isfinite(e.tau[i]));
    }
}

TEST(RLearner, InvariantToOutcomeShiftWithLinearNuisance) {
    const Table t = oracle::linear_cate_data(1500, 0.002, 6);
    std::vector<double> shifted = t.values("Y");
    for (auto& v : shifted) v += 3.0;
    const Table s = t.with_column(Column{"YS", ColumnKind::Continuous, shifted, {}});
    const CausalModelSpec spec_s{"T", "YS", {"X1", "X2"}, {}};
    const auto a = r_learner_with(t, kSpec, small_config(), 1, LinearNuisance{});
    const auto b = r_learner_with(s, spec_s, small_config(), 1, LinearNuisance{});
    ASSERT_EQ(a.included, b.included);
    for (std::size_t i = 0; i < a.tau.size(); ++i) ASSERT_NEAR(a.tau[i], b.tau[i], 1e-9);
}

TEST(RLearner, RecoversConstantEffect) {
    const Table t = oracle::linear_cate_data(20000, 0.003, 12);
    const auto e = r_learner_with(t, kSpec, small_config(), 12, LinearNuisance{});
    EXPECT_NEAR(e.mean_included_tau(), 0.003, 0.001);
}

TEST(RLearner, DefaultNuisanceIsSeeded) {
    const Table t = oracle::linear_cate_data(800, 0.002, 3);
    const auto a = r_learner(t, kSpec, small_config(), 5);
    const auto b = r_learner(t, kSpec, small_config(), 5);
    EXPECT_EQ(a.tau, b.tau);
    EXPECT_EQ(a.learner, Learner::R);
}

TEST(TLearner, RiskDifferencesWithinUnitInterval) {
    const Table t = oracle::linear_cate_data(2000, 0.002, 7);
    const auto e = t_learner(t, kSpec, BoostParams{50, 2, 0.1, 20}, 7);
    EXPECT_EQ(e.learner, Learner::T);
    EXPECT_EQ(e.n_included(), 2000u);
    for (double v : e.tau) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
    EXPECT_GT(e.mean_included_tau(), 0.0);
}

TEST(Subgroups, MeansArrAndHeterogeneityTest) {
    const auto e = manual({0.001, 0.002, 0.003, 0.010, 0.012, 0.014, 99.0}, {true, true, true, true, true, true, false});
    const std::vector<std::string> labels{"a", "a", "a", "b", "b", "b", "b"};
    const auto s = subgroup_summary(e, labels, {"b", "a"}, 20.0, 50, 1);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].label, "b");
    EXPECT_EQ(s[0].n, 3u);
    EXPECT_NEAR(s[0].mean_tau, 0.012, 1e-15);
    EXPECT_NEAR(s[0].implied_arr, 20.0 * 0.012, 1e-14);
    EXPECT_NEAR(s[1].sd_tau, 0.001, 1e-15);
    EXPECT_LE(s[1].ci_low, s[1].mean_tau);
    EXPECT_GE(s[1].ci_high, s[1].mean_tau);
    ASSERT_TRUE(s[0].test_p.has_value());
    EXPECT_DOUBLE_EQ(*s[0].test_p,
                     mann_whitney_u(std::vector<double>{0.010, 0.012, 0.014}, std::vector<double>{0.001, 0.002, 0.003}).p_value);
}

TEST(Subgroups, SingleStratumHasNoTest) {
    const auto e = manual({0.1, 0.2, 0.3}, {true, true, true});
    const auto s = subgroup_summary(e, {"x", "x", "x"});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_FALSE(s[0].test_p.has_value());
}

TEST(Subgroups, ThreeStrataUseKruskalWallis) {
    const auto e = manual({1, 2, 3, 4, 5, 6, 7, 8, 9}, std::vector<bool>(9, true));
    const std::vector<std::string> labels{"a", "a", "a", "b", "b", "b", "c", "c", "c"};
    const auto s = subgroup_summary(e, labels);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(*s[2].test_p, kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}).p_value);
}

TEST(Subgroups, RejectsBadLabels) {
    const auto e = manual({0.1, 0.2, 0.3}, {true, true, true});
    EXPECT_THROW(subgroup_summary(e, {"x", "x"}), ValidationError);
    EXPECT_THROW(subgroup_summary(e, {"x", "", "x"}), ValidationError);
    EXPECT_THROW(subgroup_summary(e, {"x", "x", "y"}), ComputationError);
    EXPECT_THROW(subgroup_summary(e, {"x", "x", "x"}, {"z"}), ComputationError);
}
