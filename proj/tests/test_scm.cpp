#include <gtest/gtest.h>

#include <cmath>

#include "aggcausal/error.hpp"
#include "aggcausal/io.hpp"
#include "aggcausal/scm.hpp"

using namespace aggcausal;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
    for (const auto& x : v)
        if (x.code == code) return true;
    return false;
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> slice(const Panel& p, int t, int v) {
    std::vector<double> out;
    for (int r = 0; r < p.n(); ++r) out.push_back(p.at(r, t, v));
    return out;
}

double variance(const std::vector<double>& x) {
    double m = 0, s = 0;
    for (double v : x) m += v / x.size();
    for (double v : x) s += (v - m) * (v - m);
    return s / (x.size() - 1);
}

AlignedModelSpec linear_fork() {
    return models::fork(models::linear({{"Y", 1.0}}, NoiseSpec::gaussian(0, 1)),
                        models::linear({{"Y", 1.0}}, NoiseSpec::gaussian(0, 1)), NoiseSpec::gaussian(0, 1));
}

}  // namespace

TEST(Validate, ForkIsValid) { EXPECT_TRUE(validate_spec(linear_fork()).empty()); }

TEST(Validate, CycleReported) {
    AlignedModelSpec s = linear_fork();
    s.instantaneous_dag.edges.insert({0, 1});  // X -> Y on top of Y -> X
    EXPECT_TRUE(has_code(validate_spec(s), "cycle"));
}

TEST(Validate, ZeroVarianceNoise) {
    EXPECT_TRUE(has_code(validate_noise(NoiseSpec::gaussian(0, 0), "n"), "zero variance"));
    EXPECT_TRUE(has_code(validate_noise(NoiseSpec::uniform(1, 1), "n"), "zero variance"));
    EXPECT_TRUE(has_code(validate_noise(NoiseSpec::discrete({2.0}, {1.0}), "n"), "zero variance"));
    EXPECT_TRUE(has_code(validate_noise(NoiseSpec::discrete({0, 1}, {0.5, 0.6}), "n"), "bad probs"));
    EXPECT_TRUE(has_code(validate_noise(NoiseSpec::discrete({}, {}), "n"), "empty support"));
}

TEST(Validate, FieldNamesPointAtOffender) {
    AlignedModelSpec s = linear_fork();
    s.mechanisms["Z"].noise = NoiseSpec::gaussian(0, -1);
    const auto v = validate_spec(s);
    ASSERT_FALSE(v.empty());
    EXPECT_EQ(v.front().field, "mechanisms.Z.noise");
}

TEST(Validate, ParentMismatchAndMissingMechanism) {
    AlignedModelSpec s = linear_fork();
    s.mechanisms["X"].inner.clear();
    EXPECT_TRUE(has_code(validate_spec(s), "parent mismatch"));
    s = linear_fork();
    s.mechanisms.erase("Z");
    EXPECT_TRUE(has_code(validate_spec(s), "missing mechanism"));
}

TEST(Validate, UnstableSelfLag) {
    AlignedModelSpec s = models::make_aligned({"X"}, {{"X", models::root(NoiseSpec::gaussian(0, 1))}});
    s.self_lag["X"] = {BasicFunction::identity(), 1.0};
    EXPECT_TRUE(has_code(validate_spec(s), "unstable self lag"));
}

TEST(Validate, VarSpectralNorm) {
    VarModelSpec v;
    v.dimension = 2;
    v.B = Eigen::MatrixXd::Identity(2, 2) * 1.1;
    v.noise.assign(2, NoiseSpec::gaussian(0, 1));
    EXPECT_TRUE(has_code(validate_spec(v), "spectral norm"));
    v.B *= 0.5;
    EXPECT_TRUE(validate_spec(v).empty());
    EXPECT_NEAR(spectral_norm(v.B), 0.55, 1e-12);
}

TEST(Validate, RequireValidThrowsCodedError) {
    AlignedModelSpec s = linear_fork();
    s.instantaneous_dag.edges.insert({0, 1});
    try {
        require_valid(s);
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_EQ(e.code(), "SPEC_CYCLE");
    }
}

TEST(Simulate, ShapeAndDeterminism) {
    const Panel a = simulate_aligned(linear_fork(), 2, 1000, 42);
    EXPECT_EQ(a.n(), 1000);
    EXPECT_EQ(a.k(), 2);
    EXPECT_EQ(a.s(), 3);
    const Panel b = simulate_aligned(linear_fork(), 2, 1000, 42);
    EXPECT_EQ(a.raw(), b.raw());
    const Panel c = simulate_aligned(linear_fork(), 2, 1000, 43);
    EXPECT_NE(a.raw(), c.raw());
}

TEST(Simulate, SeveredEdgesGiveIndependence) {
    const int n = 4000;
    const AlignedModelSpec s = models::fork(models::linear({{"Y", 0.0}}, NoiseSpec::gaussian(0, 1)),
                                            models::linear({{"Y", 0.0}}, NoiseSpec::gaussian(0, 1)),
                                            NoiseSpec::gaussian(0, 1));
    const Panel p = simulate_aligned(s, 1, n, 9);
    const double bound = 4.0 / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(corr(slice(p, 0, 0), slice(p, 0, 1))), bound);
    EXPECT_LT(std::abs(corr(slice(p, 0, 1), slice(p, 0, 2))), bound);
    EXPECT_LT(std::abs(corr(slice(p, 0, 0), slice(p, 0, 2))), bound);
}

TEST(Simulate, DeclarationOrderDoesNotChangeDraws) {
    AlignedModelSpec a = linear_fork();
    AlignedModelSpec b = a;
    b.variables = {"Z", "X", "Y"};
    b.instantaneous_dag.nodes = {"Z", "X", "Y"};
    b.instantaneous_dag.edges = {{2, 1}, {2, 0}};
    const Panel pa = simulate_aligned(a, 3, 200, 5);
    const Panel pb = simulate_aligned(b, 3, 200, 5);
    for (int r = 0; r < 200; ++r)
        for (int t = 0; t < 3; ++t)
            for (const std::string v : {"X", "Y", "Z"})
                ASSERT_EQ(pa.at(r, t, pa.index_of(v)), pb.at(r, t, pb.index_of(v)));
}

TEST(Simulate, StationaryAr1SelfLag) {
    const double beta = 0.5;
    AlignedModelSpec s = models::make_aligned({"X"}, {{"X", models::root(NoiseSpec::gaussian(0, 1))}});
    s.self_lag["X"] = {BasicFunction::identity(), beta};
    s.initial["X"] = NoiseSpec::gaussian(0, 1.0 / (1 - beta * beta));
    const int n = 20000, k = 6;
    const Panel p = simulate_aligned(s, k, n, 11);
    const double expected = 1.0 / (1 - beta * beta);
    // Sample variance has standard error about expected * sqrt(2/n).
    const double tol = 5 * expected * std::sqrt(2.0 / n);
    EXPECT_NEAR(variance(slice(p, 0, 0)), expected, tol);
    EXPECT_NEAR(variance(slice(p, k - 1, 0)), expected, tol);
}

TEST(Simulate, NonFiniteValueNamesStepAndVariable) {
    MechanismSpec m;
    m.inner["X"] = BasicFunction::cube();
    m.outer = BasicFunction::cube();
    m.noise = NoiseSpec::gaussian(0, 1);
    AlignedModelSpec s = models::make_aligned({"X", "Y"}, {{"X", models::root(NoiseSpec::gaussian(0, 1e200))}, {"Y", m}});
    try {
        simulate_aligned(s, 1, 5, 1);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("Y"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(SimulateVar, WhiteNoiseWhenBIsZero) {
    VarModelSpec v;
    v.dimension = 1;
    v.B = Eigen::MatrixXd::Zero(1, 1);
    v.noise = {NoiseSpec::gaussian(0, 1)};
    const int T = 20000;
    const Eigen::MatrixXd x = simulate_var(v, T, 3);
    ASSERT_EQ(x.rows(), T);
    std::vector<double> a(x.data(), x.data() + T - 1), b(x.data() + 1, x.data() + T);
    EXPECT_LT(std::abs(corr(a, b)), 4.0 / std::sqrt(static_cast<double>(T)));
}

TEST(SimulateVar, Ar1LagOneAutocovariance) {
    // Lyapunov: Sigma = 0.25 Sigma + 1 => Sigma = 4/3; lag-1 autocovariance = 0.5 * Sigma = 2/3.
    VarModelSpec v;
    v.dimension = 1;
    v.B = Eigen::MatrixXd::Constant(1, 1, 0.5);
    v.noise = {NoiseSpec::gaussian(0, 1)};
    v.burn_in = 100;
    const int T = 200000;
    const Eigen::MatrixXd x = simulate_var(v, T, 4);
    double m = x.mean(), acov = 0.0;
    for (int t = 1; t < T; ++t) acov += (x(t, 0) - m) * (x(t - 1, 0) - m);
    acov /= (T - 1);
    EXPECT_NEAR(acov, 2.0 / 3.0, 0.03);
    EXPECT_EQ(simulate_var(v, 50, 4), simulate_var(v, 50, 4));
}

TEST(Serialization, AlignedSpecRoundTrip) {
    AlignedModelSpec s = models::four_variable(true, 4.0, 1.0);
    s.self_lag["X"] = {BasicFunction::tanh(), 0.3};
    s.initial["X"] = NoiseSpec::uniform(-1, 1);
    const nlohmann::json j = to_json(s);
    const AlignedModelSpec back = aligned_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(spec_hash(back), spec_hash(s));
    EXPECT_EQ(spec_hash(s).size(), 64u);
}

TEST(Serialization, VarSpecRoundTripAndDispatch) {
    VarModelSpec v;
    v.dimension = 2;
    v.B = Eigen::MatrixXd::Zero(2, 2);
    v.B(0, 1) = 0.4;
    v.noise = {NoiseSpec::gaussian(0, 1), NoiseSpec::discrete({-1, 1}, {0.5, 0.5})};
    v.burn_in = 7;
    const nlohmann::json j = to_json(v);
    const ModelSpec m = model_from_json(j);
    ASSERT_TRUE(std::holds_alternative<VarModelSpec>(m));
    EXPECT_EQ(to_json(std::get<VarModelSpec>(m)), j);
}

TEST(Serialization, ShorthandFunctionsParse) {
    EXPECT_EQ(function_from_json("cube").tag, FunctionTag::cube);
    const BasicFunction f = function_from_json(nlohmann::json{{"tag", "scale"}, {"c", -2.0}});
    EXPECT_DOUBLE_EQ(f(3.0), -6.0);
    EXPECT_THROW(function_from_json("sine"), SpecError);
}

TEST(Serialization, PanelCsvRoundTrip) {
    const Panel p = simulate_aligned(linear_fork(), 3, 7, 8);
    const Panel q = panel_from_csv(panel_to_csv(p));
    EXPECT_EQ(q.names(), p.names());
    EXPECT_EQ(q.raw(), p.raw());
}

TEST(Functions, Values) {
    EXPECT_DOUBLE_EQ(BasicFunction::square()(-3), 9);
    EXPECT_DOUBLE_EQ(BasicFunction::cube()(-2), -8);
    EXPECT_DOUBLE_EQ(BasicFunction::tanh()(0.5), std::tanh(0.5));
    EXPECT_DOUBLE_EQ(BasicFunction::identity()(1.25), 1.25);
}
