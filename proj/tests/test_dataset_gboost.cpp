#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "docausal/dataset.hpp"
#include "docausal/gboost.hpp"
#include "docausal/table.hpp"

using namespace docausal;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Column continuous(std::string name, std::vector<double> v) {
    std::vector<bool> miss(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) miss[i] = std::isnan(v[i]);
    return Column{std::move(name), ColumnKind::Continuous, std::move(v), std::move(miss)};
}

Column binary(std::string name, std::vector<double> v) {
    std::vector<bool> miss(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) miss[i] = std::isnan(v[i]);
    return Column{std::move(name), ColumnKind::Binary, std::move(v), std::move(miss)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Table and CSV
// ---------------------------------------------------------------------------

TEST(Csv, SchemaMapsHeadersAndMissingCells) {
    std::istringstream in("\xEF\xBB\xBF" "age,male,extra\n50,1,x\n,0,y\n61.5,NA,z\n");
    const std::vector<SchemaEntry> schema{{"AGE", ColumnKind::Continuous, "age"}, {"SEX_MALE", ColumnKind::Binary, "male"}};
    const Table t = parse_table(in, schema);
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.cols(), 2u);
    EXPECT_EQ(t.missing_count("AGE"), 1u);
    EXPECT_EQ(t.missing_count("SEX_MALE"), 1u);
    EXPECT_DOUBLE_EQ(t.values("AGE")[2], 61.5);
    EXPECT_EQ(complete_cases(t).rows(), 1u);
}

TEST(Csv, RejectsBadInput) {
    const std::vector<SchemaEntry> schema{{"B", ColumnKind::Binary, ""}};
    std::istringstream bad_binary("B\n2\n");
    EXPECT_THROW(parse_table(bad_binary, schema), ValidationError);
    std::istringstream text("B\nyes\n");
    EXPECT_THROW(parse_table(text, schema), ValidationError);
    std::istringstream absent("C\n1\n");
    EXPECT_THROW(parse_table(absent, schema), ValidationError);
    std::istringstream ragged("B,C\n1\n");
    EXPECT_THROW(parse_table(ragged, schema), ValidationError);
}

// ---------------------------------------------------------------------------
// MCAR
// ---------------------------------------------------------------------------

TEST(Mcar, MatchesTwoByTwoChiSquare) {
    // missing rows: 3 events, 2 non-events; observed rows: 2 events, 8 non-events
    std::vector<double> x, y;
    auto add = [&](bool miss, double yy, int k) {
        for (int i = 0; i < k; ++i) {
            x.push_back(miss ? kNaN : 1.0 + static_cast<double>(x.size()));
            y.push_back(yy);
        }
    };
    add(true, 1, 3);
    add(true, 0, 2);
    add(false, 1, 2);
    add(false, 0, 8);
    const Table t({continuous("X", x), binary("Y", y)});
    const auto r = mcar_test(t, "X", "Y");
    const auto want = chi_square_2x2(3, 2, 2, 8);
    EXPECT_DOUBLE_EQ(r.chi_square, want.statistic);
    EXPECT_DOUBLE_EQ(r.p_value, want.p_value);
    EXPECT_DOUBLE_EQ(r.missing_fraction, 5.0 / 15.0);
}

TEST(Mcar, RejectsDegenerateColumns) {
    const Table t({continuous("X", {1, 2, 3}), binary("Y", {0, 1, 0})});
    EXPECT_THROW(mcar_test(t, "X", "Y"), ValidationError);
    EXPECT_THROW(mcar_test(t, "Y", "X"), ValidationError);
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

TEST(Impute, RecoversExactLinearRelation) {
    std::vector<double> a, b;
    for (int i = 0; i < 40; ++i) {
        a.push_back(0.5 * i);
        b.push_back(2.0 * (0.5 * i) + 1.0);
    }
    b[3] = kNaN;
    b[17] = kNaN;
    const Table t({continuous("A", a), continuous("B", b)});
    const Table out = impute_iterative(t, 5);
    EXPECT_TRUE(out.complete());
    EXPECT_NEAR(out.values("B")[3], 2.0 * 1.5 + 1.0, 1e-9);
    EXPECT_NEAR(out.values("B")[17], 2.0 * 8.5 + 1.0, 1e-9);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i != 3 && i != 17) {
            EXPECT_EQ(out.values("B")[i], b[i]);
        }
    }
}

TEST(Impute, BinaryCellsStayBinaryAndObservedCellsUntouched) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> x, z;
    for (int i = 0; i < 200; ++i) {
        const double v = g(rng);
        x.push_back(v);
        z.push_back(v > 0 ? 1.0 : 0.0);
    }
    auto zm = z;
    for (int i = 0; i < 200; i += 9) zm[static_cast<std::size_t>(i)] = kNaN;
    const Table t({continuous("X", x), binary("Z", zm)});
    const Table out = impute_iterative(t, 3, 99);
    EXPECT_EQ(out, impute_iterative(t, 3, 1));
    for (std::size_t i = 0; i < 200; ++i) {
        const double v = out.values("Z")[i];
        EXPECT_TRUE(v == 0.0 || v == 1.0);
        if (!std::isnan(zm[i])) {
            EXPECT_EQ(v, zm[i]);
        }
    }
    EXPECT_EQ(out.values("X"), x);
}

TEST(Impute, RejectsAllMissingColumn) {
    const Table t({continuous("A", {1, 2, 3}), continuous("B", {kNaN, kNaN, kNaN})});
    EXPECT_THROW(impute_iterative(t, 1), ValidationError);
    EXPECT_THROW(impute_iterative(t, 0), ValidationError);
}

// ---------------------------------------------------------------------------
// Baseline table
// ---------------------------------------------------------------------------

TEST(Baseline, CountsMeansAndTests) {
    const Table t({binary("G", {0, 0, 0, 1, 1, 1}), continuous("AGE", {40, 50, 60, 55, 65, kNaN}),
                   binary("SMOKE", {1, 0, 0, 1, 1, 0})});
    const auto rows = summarize_baseline(t, "G", {"AGE", "SMOKE"});
    ASSERT_EQ(rows.size(), 2u);
    const auto& age = rows[0];
    EXPECT_EQ(age.test, "mann-whitney");
    EXPECT_EQ(age.group1.n, 3u);
    EXPECT_EQ(age.group1.n_observed, 2u);
    EXPECT_DOUBLE_EQ(age.group0.mean, 50.0);
    EXPECT_DOUBLE_EQ(age.group0.sd, 10.0);
    EXPECT_DOUBLE_EQ(age.group1.mean, 60.0);
    EXPECT_DOUBLE_EQ(age.overall.mean, 54.0);
    EXPECT_DOUBLE_EQ(age.p_value, mann_whitney_u(std::vector<double>{55, 65}, std::vector<double>{40, 50, 60}).p_value);
    const auto& smoke = rows[1];
    EXPECT_EQ(smoke.test, "chi-square");
    EXPECT_EQ(smoke.group1.count, 2u);
    EXPECT_EQ(smoke.group0.count, 1u);
    EXPECT_NEAR(smoke.group1.percent, 200.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(smoke.p_value, chi_square_2x2(2, 1, 1, 2).p_value);
}

TEST(Baseline, GroupMustBeBinaryAndComplete) {
    const Table t({continuous("G", {0, 1, 0, 1}), binary("H", {0, 1, kNaN, 1}), continuous("X", {1, 2, 3, 4})});
    EXPECT_THROW(summarize_baseline(t, "G", {"X"}), ValidationError);
    EXPECT_THROW(summarize_baseline(t, "H", {"X"}), ValidationError);
}

// ---------------------------------------------------------------------------
// Gradient boosting
// ---------------------------------------------------------------------------

TEST(Gboost, HandTracedStumps) {
    Matrix X(4, 1);
    X << 1, 2, 3, 4;
    Vector y(4);
    y << 0, 0, 1, 1;
    BoostParams p{2, 1, 0.5, 1};
    const auto m = fit_gbm(X, y, p);
    EXPECT_DOUBLE_EQ(m.base_value, 0.5);
    ASSERT_EQ(m.trees.size(), 2u);
    // residuals -0.5, -0.5, 0.5, 0.5 split between 2 and 3
    const auto& root = m.trees[0].nodes[0];
    EXPECT_EQ(root.feature, 0);
    EXPECT_DOUBLE_EQ(root.threshold, 2.5);
    const Vector pred = predict(m, X);
    // 0.5 -+ 0.5 * 0.5 -+ 0.5 * 0.25
    EXPECT_DOUBLE_EQ(pred(0), 0.125);
    EXPECT_DOUBLE_EQ(pred(1), 0.125);
    EXPECT_DOUBLE_EQ(pred(2), 0.875);
    EXPECT_DOUBLE_EQ(pred(3), 0.875);
}

TEST(Gboost, WeightedFitEqualsReplicatedRows) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> wd(1, 4);
    const int n = 60;
    Matrix X(n, 2);
    Vector y(n);
    std::vector<double> w(n);
    std::vector<Eigen::Index> rep;
    for (int i = 0; i < n; ++i) {
        X(i, 0) = g(rng);
        X(i, 1) = g(rng);
        y(i) = std::sin(X(i, 0)) + 0.5 * X(i, 1) + 0.1 * g(rng);
        w[static_cast<std::size_t>(i)] = wd(rng);
        for (int k = 0; k < static_cast<int>(w[static_cast<std::size_t>(i)]); ++k) rep.push_back(i);
    }
    const BoostParams p{25, 3, 0.1, 1};
    const auto weighted = fit_gbm(X, y, p, w);
    const auto replicated = fit_gbm(X(rep, Eigen::all), y(rep), p);
    const Vector a = predict(weighted, X), b = predict(replicated, X);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gboost, TrainingErrorDecreasesWithRounds) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix X(200, 3);
    Vector y(200);
    for (int i = 0; i < 200; ++i) {
        for (int j = 0; j < 3; ++j) X(i, j) = g(rng);
        y(i) = X(i, 0) * X(i, 1) + (X(i, 2) > 0 ? 1.0 : 0.0);
    }
    double prev = INFINITY;
    for (std::size_t rounds : {1, 10, 50, 200}) {
        const auto m = fit_gbm(X, y, BoostParams{rounds, 3, 0.1, 5});
        const double mse = (predict(m, X) - y).squaredNorm();
        EXPECT_LT(mse, prev);
        prev = mse;
    }
}

TEST(Gboost, LeavesRespectMinLeaf) {
    Matrix X(30, 1);
    Vector y(30);
    for (int i = 0; i < 30; ++i) {
        X(i, 0) = i;
        y(i) = i % 7;
    }
    const auto m = fit_gbm(X, y, BoostParams{5, 4, 0.3, 8});
    for (const auto& tree : m.trees) {
        for (const auto& nd : tree.nodes) {
            if (nd.feature < 0) continue;
            // any split must leave at least 8 rows either side
            EXPECT_GE(nd.threshold, 7.0);
            EXPECT_LE(nd.threshold, 22.0);
        }
    }
}

TEST(Gboost, ConstantTargetAndValidation) {
    Matrix X = Matrix::Random(10, 2);
    const Vector y = Vector::Constant(10, 3.0);
    const auto m = fit_gbm(X, y, BoostParams{10, 2, 0.1, 1});
    EXPECT_TRUE(m.trees.empty());
    EXPECT_DOUBLE_EQ(predict(m, X)(4), 3.0);
    EXPECT_THROW(predict(m, Matrix::Zero(2, 3)), ValidationError);
    EXPECT_THROW(fit_gbm(X, y, BoostParams{10, 2, 0.1, 6}), ValidationError);
    EXPECT_THROW(fit_gbm(X, y, BoostParams{0, 2, 0.1, 1}), ValidationError);
    const std::vector<double> neg(10, -1.0);
    EXPECT_THROW(fit_gbm(X, y, BoostParams{1, 2, 0.1, 1}, neg), ValidationError);
}
