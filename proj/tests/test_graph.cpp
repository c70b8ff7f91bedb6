#include <gtest/gtest.h>

#include <set>

#include "aggcausal/error.hpp"
#include "aggcausal/graph.hpp"

using namespace aggcausal;

namespace {

Dag make_dag(std::vector<std::string> nodes, std::set<Edge> edges) {
    Dag d;
    d.nodes = std::move(nodes);
    d.edges = std::move(edges);
    return d;
}

// Brute-force class signature: skeleton plus unshielded colliders.
std::pair<std::set<Edge>, std::set<std::tuple<int, int, int>>> signature(const Dag& d) {
    std::set<Edge> skel;
    for (auto [a, b] : d.edges) skel.insert(unordered(a, b));
    std::set<std::tuple<int, int, int>> colliders;
    for (int c = 0; c < d.size(); ++c)
        for (int a = 0; a < d.size(); ++a)
            for (int b = a + 1; b < d.size(); ++b)
                if (d.has_edge(a, c) && d.has_edge(b, c) && !skel.count(unordered(a, b))) colliders.insert({a, c, b});
    return {skel, colliders};
}

}  // namespace

TEST(Dag, TopologicalOrderAndCycles) {
    const Dag chain = make_dag({"X", "Y", "Z"}, {{0, 1}, {1, 2}});
    EXPECT_TRUE(chain.is_acyclic());
    EXPECT_EQ(*chain.topological_order(), (std::vector<int>{0, 1, 2}));
    const Dag cyc = make_dag({"X", "Y"}, {{0, 1}, {1, 0}});
    EXPECT_FALSE(cyc.is_acyclic());
    EXPECT_FALSE(cyc.topological_order().has_value());
    EXPECT_EQ(chain.parents(1), std::vector<int>{0});
    EXPECT_EQ(chain.index_of("Q"), -1);
}

TEST(Cpdag, ChainIsUndirected) {
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {1, 2}}));
    EXPECT_TRUE(g.directed.empty());
    EXPECT_EQ(g.undirected, (std::set<Edge>{{0, 1}, {1, 2}}));
}

TEST(Cpdag, ColliderKeepsArrows) {
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {2, 1}}));
    EXPECT_EQ(g.directed, (std::set<Edge>{{0, 1}, {2, 1}}));
    EXPECT_TRUE(g.undirected.empty());
}

TEST(Cpdag, SingleEdgeIsUndirected) {
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y"}, {{0, 1}}));
    EXPECT_TRUE(g.has_undirected(0, 1));
    EXPECT_TRUE(g.directed.empty());
}

TEST(Cpdag, MeekPropagatesBelowCollider) {
    // X -> Z <- Y, Z -> H: the collider forces Z -> H.
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y", "Z", "H"}, {{0, 2}, {1, 2}, {2, 3}}));
    EXPECT_EQ(g.directed, (std::set<Edge>{{0, 2}, {1, 2}, {2, 3}}));
}

TEST(Cpdag, ConstantAcrossEquivalenceClassOnThreeNodes) {
    const auto dags = enumerate_dags({"A", "B", "C"});
    ASSERT_EQ(dags.size(), 25u);
    for (const Dag& a : dags) {
        for (const Dag& b : dags) {
            const bool equivalent = signature(a) == signature(b);
            EXPECT_EQ(same_mec(dag_to_cpdag(a), dag_to_cpdag(b)), equivalent);
        }
    }
}

TEST(Cpdag, EnumerationCountsMatchKnownSequence) {
    EXPECT_EQ(enumerate_dags({"A"}).size(), 1u);
    EXPECT_EQ(enumerate_dags({"A", "B"}).size(), 3u);
    EXPECT_EQ(enumerate_dags({"A", "B", "C", "D"}).size(), 543u);
}

TEST(Cpdag, SameMecNodeMismatchThrows) {
    Cpdag a, b;
    a.nodes = {"X", "Y"};
    b.nodes = {"X", "Z"};
    EXPECT_THROW(same_mec(a, b), SpecError);
}

TEST(Cpdag, ChainVsColliderDiffer) {
    const Cpdag chain = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {1, 2}}));
    const Cpdag collider = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {2, 1}}));
    EXPECT_FALSE(same_mec(chain, collider));
    EXPECT_TRUE(same_mec(chain, chain));
}

TEST(Cpdag, JsonAndEdgeListRoundTrip) {
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y", "Z", "H"}, {{0, 2}, {1, 2}, {2, 3}}));
    const Cpdag back = cpdag_from_json(to_json(g));
    EXPECT_TRUE(same_mec(g, back));
    EXPECT_EQ(to_edge_list(g), "X->Z; Y->Z; Z->H");
}

TEST(Cpdag, SkeletonF1) {
    const Cpdag truth = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {1, 2}}));
    Cpdag est;
    est.nodes = truth.nodes;
    est.add_undirected(0, 1);
    EXPECT_DOUBLE_EQ(skeleton_f1(est, truth), 2.0 * 1.0 * 0.5 / 1.5);
    EXPECT_DOUBLE_EQ(skeleton_f1(truth, truth), 1.0);
}

TEST(Cpdag, VStructures) {
    const Cpdag g = dag_to_cpdag(make_dag({"X", "Y", "Z"}, {{0, 1}, {2, 1}}));
    const auto vs = v_structures(g);
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_EQ(vs[0], std::make_tuple(0, 1, 2));
}
