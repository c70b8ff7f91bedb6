#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "aggcausal/error.hpp"
#include "aggcausal/exact_oracle.hpp"

using namespace aggcausal;

namespace {

nlohmann::json read_fixture(const std::string& name) {
    std::ifstream in(std::string(FIXTURE_DIR) + "/" + name);
    return nlohmann::json::parse(in);
}

AlignedModelSpec binary_fork() {
    const NoiseSpec coin = NoiseSpec::discrete({0, 1}, {0.5, 0.5});
    return models::fork(models::linear({{"Y", 1.0}}, coin), models::linear({{"Y", 2.0}}, coin),
                        NoiseSpec::discrete({0, 1}, {0.3, 0.7}));
}

// Distribution of the k-fold sum of iid draws, by direct summation.
std::map<double, double> convolve(const std::vector<double>& support, const std::vector<double>& probs, int k) {
    std::map<double, double> dist{{0.0, 1.0}};
    for (int step = 0; step < k; ++step) {
        std::map<double, double> next;
        for (const auto& [v, p] : dist)
            for (std::size_t i = 0; i < support.size(); ++i) next[v + support[i]] += p * probs[i];
        dist = std::move(next);
    }
    return dist;
}

}  // namespace

TEST(Lattice, KeysRoundTrip) {
    EXPECT_EQ(lattice_key(0.1 + 0.2), lattice_key(0.3));
    EXPECT_NEAR(lattice_value(lattice_key(-2.5)), -2.5, 1e-15);
}

TEST(JointTable, BinaryForkSupportBound) {
    const JointTable j = build_joint_table(binary_fork(), 1);
    EXPECT_LE(j.probs.size(), 8u);
    EXPECT_NEAR(j.total(), 1.0, 1e-12);
    for (const auto& [key, p] : j.probs) EXPECT_GE(p, 0.0);
    EXPECT_EQ(j.column_names(), (std::vector<std::string>{"X_1", "Y_1", "Z_1"}));
}

TEST(JointTable, SumOfRootMatchesConvolution) {
    const AlignedModelSpec spec = fixtures::nonlinear_fork();
    for (int k : {1, 2, 3}) {
        const JointTable j = build_joint_table(spec, k);
        const auto m = marginal(j, {"S_Y"});
        const auto oracle = convolve({-1, 0, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, k);
        ASSERT_EQ(m.size(), oracle.size());
        for (const auto& [v, p] : oracle) {
            const auto it = m.find({lattice_key(v)});
            ASSERT_NE(it, m.end());
            EXPECT_NEAR(it->second, p, 1e-12);
        }
    }
}

TEST(JointTable, StateSpaceLimitReportsSize) {
    std::vector<double> support(10), probs(10, 0.1);
    for (int i = 0; i < 10; ++i) support[i] = i;
    const NoiseSpec wide = NoiseSpec::discrete(support, probs);
    const AlignedModelSpec spec = models::fork(models::linear({{"Y", 1.0}}, wide), models::linear({{"Y", 1.0}}, wide), wide);
    EXPECT_DOUBLE_EQ(state_space_size(spec, 3), 1e9);
    try {
        build_joint_table(spec, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "STATE_SPACE_TOO_LARGE");
        EXPECT_NE(std::string(e.what()).find("1000000000"), std::string::npos);
    }
}

TEST(JointTable, ContinuousNoiseRejected) {
    EXPECT_THROW(build_joint_table(models::fork(models::linear({{"Y", 1.0}}, NoiseSpec::gaussian(0, 1)),
                                                models::linear({{"Y", 1.0}}, NoiseSpec::gaussian(0, 1)),
                                                NoiseSpec::gaussian(0, 1)),
                                   2),
                 SpecError);
}

TEST(JointTable, CsvIsSortedWithHeader) {
    const JointTable j = build_joint_table(binary_fork(), 2);
    const std::string csv = joint_to_csv(j);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "X_1,X_2,Y_1,Y_2,Z_1,Z_2,probability");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, static_cast<int>(j.probs.size()));
    EXPECT_EQ(joint_to_csv(build_joint_table(binary_fork(), 2)), csv);
}

TEST(CiExact, ColliderMarginalIndependence) {
    MechanismSpec y;
    y.inner = {{"X", BasicFunction::square()}, {"Z", BasicFunction::identity()}};
    y.noise = NoiseSpec::discrete({0, 1}, {0.5, 0.5});
    const JointTable j = build_joint_table(
        models::collider(y, NoiseSpec::discrete({-1, 0, 2}, {0.2, 0.5, 0.3}), NoiseSpec::discrete({0, 1}, {0.4, 0.6})), 2);
    const CiResult r = check_ci_exact(j, {"S_X"}, {"S_Z"}, {});
    EXPECT_TRUE(r.holds);
    EXPECT_LT(r.max_deviation, 1e-12);
    EXPECT_FALSE(check_ci_exact(j, {"S_X"}, {"S_Z"}, {"S_Y"}).holds);
}

TEST(CiExact, SelfDependenceFails) {
    const JointTable j = build_joint_table(binary_fork(), 2);
    EXPECT_FALSE(check_ci_exact(j, {"S_X"}, {"S_X"}, {}).holds);
    EXPECT_TRUE(check_ci_exact(j, {"X_1"}, {"Z_2"}, {"Y_1:k"}).holds);
}

TEST(Condition, FixturesMatchCommittedJson) {
    EXPECT_EQ(to_json(fixtures::nonlinear_fork()), read_fixture("nonlinear_fork_discrete.json"));
    EXPECT_EQ(to_json(fixtures::partial_linear_fork()), read_fixture("partial_linear_fork_discrete.json"));
}

TEST(Condition, NonlinearFixtureViolates) {
    const JointTable j = build_joint_table(aligned_from_json(read_fixture("nonlinear_fork_discrete.json")), 2);
    const ConditionReport r = check_integral_condition(j);
    EXPECT_FALSE(r.ci_holds);
    EXPECT_GT(r.ci_deviation, 1e-4);
    EXPECT_GT(r.condition_ii_residual, 1e-4);
    EXPECT_TRUE(r.equivalence_ok);
}

TEST(Condition, PartialLinearFixtureHolds) {
    const JointTable j = build_joint_table(aligned_from_json(read_fixture("partial_linear_fork_discrete.json")), 2);
    const ConditionReport r = check_integral_condition(j);
    EXPECT_TRUE(r.ci_holds);
    EXPECT_LT(r.condition_ii_residual, 1e-12);
    EXPECT_TRUE(r.equivalence_ok);
    const SufficientConditionReport c = check_sufficient_conditions(j);
    EXPECT_TRUE(c.b_holds);
    EXPECT_TRUE(c.vi_holds);
    EXPECT_TRUE(c.implication_ok);
}

TEST(Condition, LinearForkHoldsWithBothResidualsTiny) {
    const ConditionReport r = check_integral_condition(build_joint_table(binary_fork(), 2));
    EXPECT_TRUE(r.ci_holds);
    EXPECT_LT(r.condition_ii_residual, 1e-12);
    EXPECT_LT(r.condition_iii_residual, 1e-12);
}

TEST(Condition, MechanismIgnoringMiddleGivesZeroResidual) {
    const NoiseSpec tri = NoiseSpec::discrete({-1, 0, 1}, {0.25, 0.5, 0.25});
    MechanismSpec x;
    x.inner = {{"Y", BasicFunction::square()}};
    x.noise = NoiseSpec::discrete({0, 1}, {0.5, 0.5});
    const AlignedModelSpec spec =
        models::make_aligned({"X", "Y", "Z"}, {{"X", x}, {"Y", models::root(tri)}, {"Z", models::root(tri)}});
    const ConditionReport r = check_integral_condition(build_joint_table(spec, 2));
    EXPECT_LT(r.condition_ii_residual, 1e-15);
    EXPECT_TRUE(r.ci_holds);
}

TEST(Condition, RequiresTrivariateLayoutAndTwoSteps) {
    EXPECT_THROW(check_integral_condition(build_joint_table(binary_fork(), 1)), SpecError);
    const AlignedModelSpec pair = models::bivariate_linear(1.0, NoiseSpec::discrete({0, 1}, {0.5, 0.5}),
                                                           NoiseSpec::discrete({0, 1}, {0.5, 0.5}));
    EXPECT_THROW(check_integral_condition(build_joint_table(pair, 2)), SpecError);
}

TEST(Condition, RandomSpecsHaveNoCounterexamples) {
    Rng rng(20240611);
    int counterexamples = 0, implication_failures = 0, ci_true = 0;
    for (int i = 0; i < 100; ++i) {
        const AlignedModelSpec spec = random_discrete_spec(rng, i % 2 ? TrivariateShape::fork : TrivariateShape::chain);
        ASSERT_TRUE(validate_spec(spec).empty());
        const JointTable j = build_joint_table(spec, 2);
        ASSERT_NEAR(j.total(), 1.0, 1e-12);
        const ConditionReport r = check_integral_condition(j);
        counterexamples += !r.equivalence_ok;
        ci_true += r.ci_holds;
        implication_failures += !check_sufficient_conditions(j).implication_ok;
    }
    EXPECT_EQ(counterexamples, 0);
    EXPECT_EQ(implication_failures, 0);
    // Both verdicts occur, so the equivalence is exercised in each direction.
    EXPECT_GT(ci_true, 0);
    EXPECT_LT(ci_true, 100);
}
