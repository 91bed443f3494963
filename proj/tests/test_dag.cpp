#include <gtest/gtest.h>

#include <filesystem>

#include "docausal/dag.hpp"
#include "docausal/config.hpp"
#include "oracles.hpp"

using namespace docausal;

namespace {

Dag framingham() { return parse_dag(read_file(std::filesystem::path(DOCAUSAL_SOURCE_DIR) / "data" / "framingham.dag")); }

const NodeSet kZ{"AGE", "SEX_MALE", "BMI", "CURSMOKE"};

}  // namespace

TEST(ParseDag, MinimalGraph) {
    const Dag d = parse_dag("A; B; A -> B;");
    EXPECT_EQ(d.nodes(), (std::vector<std::string>{"A", "B"}));
    ASSERT_EQ(d.edges().size(), 1u);
    EXPECT_EQ(d.edges()[0], (Edge{"A", "B"}));
}

TEST(ParseDag, CommentsAndBlankLines) {
    const Dag d = parse_dag("# header\n\nX;  # trailing\nY;\r\nX -> Y;\n");
    EXPECT_EQ(d.size(), 2u);
    EXPECT_TRUE(d.has_edge("X", "Y"));
}

TEST(ParseDag, TwoCycleReportsCycle) {
    try {
        parse_dag("A; B; A -> B; B -> A;");
        FAIL() << "expected a cycle error";
    } catch (const DagCycleError& e) {
        ASSERT_GE(e.cycle().size(), 3u);
        EXPECT_EQ(e.cycle().front(), e.cycle().back());
        EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
    }
}

TEST(ParseDag, SyntaxErrorCarriesPosition) {
    try {
        parse_dag("A;\nB -> ;\n");
        FAIL() << "expected a syntax error";
    } catch (const DagSyntaxError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 6u);
    }
    EXPECT_THROW(parse_dag("A; A;"), DagSyntaxError);
    EXPECT_THROW(parse_dag("A; A -> B;"), DagError);
    EXPECT_THROW(parse_dag("A; 1B;"), DagSyntaxError);
    EXPECT_THROW(parse_dag("A"), DagSyntaxError);
}

TEST(ParseDag, RenderRoundTrips) {
    const Dag d = framingham();
    EXPECT_EQ(parse_dag(render_dag(d)), d);
}

TEST(Descendants, ChainAndIsolated) {
    const Dag d = parse_dag("A; B; C; X; A -> B; B -> C;");
    EXPECT_EQ(descendants(d, "A"), (NodeSet{"B", "C"}));
    EXPECT_TRUE(descendants(d, "X").empty());
    EXPECT_EQ(ancestors(d, "C"), (NodeSet{"A", "B"}));
    EXPECT_THROW(descendants(d, "Q"), ValidationError);
}

TEST(DSeparation, ColliderAndChain) {
    const Dag d = parse_dag("A; B; C; A -> C; B -> C;");
    EXPECT_TRUE(d_separated(d, "A", "B", {}));
    EXPECT_FALSE(d_separated(d, "A", "B", {"C"}));
    const Dag chain = parse_dag("A; B; C; A -> B; B -> C;");
    EXPECT_FALSE(d_separated(chain, "A", "C", {}));
    EXPECT_TRUE(d_separated(chain, "A", "C", {"B"}));
}

TEST(DSeparation, ConditioningOnColliderDescendantOpensPath) {
    const Dag d = parse_dag("A; B; C; D; A -> C; B -> C; C -> D;");
    EXPECT_FALSE(d_separated(d, "A", "B", {"D"}));
}

TEST(DSeparation, MatchesPathEnumerationOnFourNodes) {
    std::size_t checked = 0;
    oracle::for_each_dag(4, [&](const oracle::Adjacency& adj) {
        const Dag d = oracle::to_dag(adj);
        for (std::size_t x = 0; x < 4; ++x) {
            for (std::size_t y = x + 1; y < 4; ++y) {
                for (unsigned mask = 0; mask < 16; ++mask) {
                    if (mask & ((1u << x) | (1u << y))) continue;
                    std::vector<bool> z(4);
                    NodeSet cond;
                    for (std::size_t k = 0; k < 4; ++k) {
                        z[k] = (mask >> k) & 1u;
                        if (z[k]) cond.insert(oracle::node_name(k));
                    }
                    ASSERT_EQ(d_separated(d, oracle::node_name(x), oracle::node_name(y), cond),
                              oracle::brute_force_d_separated(adj, x, y, z));
                    // symmetry
                    ASSERT_EQ(d_separated(d, oracle::node_name(x), oracle::node_name(y), cond),
                              d_separated(d, oracle::node_name(y), oracle::node_name(x), cond));
                    ++checked;
                }
            }
        }
    });
    EXPECT_EQ(checked, 543u * 24u);
}

TEST(Framingham, Shape) {
    const Dag d = framingham();
    EXPECT_EQ(d.size(), 11u);
    EXPECT_EQ(d.edges().size(), 24u);
    EXPECT_FALSE(d.has_edge("CURSMOKE", "SYSBP"));
    EXPECT_TRUE(d.has_edge("AGE", "DIABETES"));
    EXPECT_TRUE(d.has_edge("SEX_MALE", "SYSBP"));
    const auto desc = descendants(d, "SYSBP");
    for (const char* n : {"BPMEDS", "PREVHYP", "CHD"}) EXPECT_TRUE(desc.count(n)) << n;
}

TEST(Framingham, StatedIndependencies) {
    const Dag d = framingham();
    EXPECT_TRUE(d_separated(d, "BPMEDS", "TOTCHOL", {"AGE", "SYSBP"}));
    EXPECT_TRUE(d_separated(d, "BPMEDS", "GLUCOSE", {"AGE", "SYSBP"}));
    EXPECT_TRUE(d_separated(d, "AGE", "BPMEDS", {"SYSBP"}));
    EXPECT_TRUE(d_separated(d, "SEX_MALE", "GLUCOSE", {"BMI", "DIABETES"}));
    EXPECT_FALSE(d_separated(d, "SEX_MALE", "SYSBP", {"AGE", "BMI"}));
}

TEST(Backdoor, FraminghamAdjustmentSetIsValid) {
    const auto v = is_valid_backdoor(framingham(), "SYSBP", "CHD", kZ);
    EXPECT_TRUE(v.valid);
    EXPECT_TRUE(v.violations.empty());
}

TEST(Backdoor, AddingBpmedsIsDescendantViolation) {
    auto z = kZ;
    z.insert("BPMEDS");
    const auto v = is_valid_backdoor(framingham(), "SYSBP", "CHD", z);
    EXPECT_FALSE(v.valid);
    ASSERT_FALSE(v.violations.empty());
    EXPECT_EQ(describe(v.violations.front()), "descendant-of-treatment: BPMEDS");
}

TEST(Backdoor, EmptySetLeavesOpenPath) {
    const auto v = is_valid_backdoor(framingham(), "SYSBP", "CHD", {});
    EXPECT_FALSE(v.valid);
    bool open_path = false;
    for (const auto& viol : v.violations) open_path = open_path || std::holds_alternative<OpenBackdoorPath>(viol);
    EXPECT_TRUE(open_path);
}

TEST(Backdoor, ConfounderTriangle) {
    const Dag d = parse_dag("Z; T; Y; Z -> T; Z -> Y; T -> Y;");
    EXPECT_TRUE(is_valid_backdoor(d, "T", "Y", {"Z"}).valid);
    const auto v = is_valid_backdoor(d, "T", "Y", {});
    ASSERT_EQ(v.violations.size(), 1u);
    EXPECT_EQ(describe(v.violations[0]), "open-backdoor-path: T Z Y");
}

TEST(TestableImplications, FraminghamIncludesAgeBpmeds) {
    const Dag d = framingham();
    const auto imps = testable_implications(d, 3);
    const Implication want{"AGE", "BPMEDS", {"SYSBP"}};
    EXPECT_NE(std::find(imps.begin(), imps.end(), want), imps.end());
    for (const auto& i : imps) {
        EXPECT_LT(i.x, i.y);
        EXPECT_LE(i.cond.size(), 3u);
        EXPECT_FALSE(d.adjacent(i.x, i.y));
        EXPECT_TRUE(d_separated(d, i.x, i.y, i.cond));
    }
}

TEST(TestableImplications, CompleteGraphHasNone) {
    EXPECT_TRUE(testable_implications(parse_dag("A; B; C; A -> B; A -> C; B -> C;"), 5).empty());
}
