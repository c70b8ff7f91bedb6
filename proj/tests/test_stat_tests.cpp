#include <gtest/gtest.h>

#include <cmath>

#include "aggcausal/error.hpp"
#include "aggcausal/rng.hpp"
#include "aggcausal/stat_tests.hpp"

using namespace aggcausal;

namespace {

Eigen::MatrixXd gaussian_matrix(int n, int s, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd m(n, s);
    for (int c = 0; c < s; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = d(rng);
    return m;
}

// Unit-coefficient Gaussian chain X -> Y -> Z.
Eigen::MatrixXd gaussian_chain(int n, std::uint64_t seed) {
    Eigen::MatrixXd m = gaussian_matrix(n, 3, seed);
    m.col(1) += m.col(0);
    m.col(2) += m.col(1);
    return m;
}

// Partial correlation via least-squares residuals, independent of the library route.
double residual_partial_correlation(const Eigen::MatrixXd& data, int i, int j, const std::vector<int>& cond) {
    const Eigen::Index n = data.rows();
    Eigen::MatrixXd design(n, cond.size() + 1);
    design.col(0).setOnes();
    for (std::size_t c = 0; c < cond.size(); ++c) design.col(c + 1) = data.col(cond[c]);
    auto residual = [&](int col) {
        const Eigen::VectorXd y = data.col(col);
        const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
        return Eigen::VectorXd(y - design * beta);
    };
    const Eigen::VectorXd ri = residual(i), rj = residual(j);
    return ri.dot(rj) / std::sqrt(ri.squaredNorm() * rj.squaredNorm());
}

// Partial correlation from the precision matrix of {i, j} u cond.
double precision_partial_correlation(const Eigen::MatrixXd& data, int i, int j, const std::vector<int>& cond) {
    std::vector<int> cols{i, j};
    cols.insert(cols.end(), cond.begin(), cond.end());
    Eigen::MatrixXd sub(data.rows(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(c) = data.col(cols[c]);
    const Eigen::MatrixXd centered = sub.rowwise() - sub.colwise().mean();
    const Eigen::MatrixXd prec = (centered.transpose() * centered).inverse();
    return -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
}

}  // namespace

TEST(FisherZ, MatchesPrecisionAndResidualOracles) {
    Eigen::MatrixXd data = gaussian_matrix(400, 5, 3);
    data.col(2) += 0.7 * data.col(0) - 0.3 * data.col(4);
    data.col(3) += data.col(2) + 0.5 * data.col(1);
    const std::vector<std::vector<int>> conds{{}, {2}, {2, 4}, {1, 2, 4}};
    for (const auto& cond : conds) {
        const double lib = partial_correlation(data, 0, 3, cond);
        EXPECT_NEAR(lib, precision_partial_correlation(data, 0, 3, cond), 1e-10);
        EXPECT_NEAR(lib, residual_partial_correlation(data, 0, 3, cond), 1e-10);
        const TestResult r = fisher_z_test(data, 0, 3, cond, 0.05);
        const double dof = 400.0 - cond.size() - 3.0;
        EXPECT_NEAR(r.statistic, std::sqrt(dof) * std::atanh(lib), 1e-9);
        EXPECT_NEAR(r.p_value, std::erfc(std::abs(r.statistic) / std::sqrt(2.0)), 1e-12);
    }
}

TEST(FisherZ, ExchangeSymmetry) {
    const Eigen::MatrixXd data = gaussian_chain(300, 4);
    const TestResult a = fisher_z_test(data, 0, 2, {1}, 0.05);
    const TestResult b = fisher_z_test(data, 2, 0, {1}, 0.05);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-10);
}

TEST(FisherZ, NullCalibration) {
    const int reps = 500;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) rejects += fisher_z_test(gaussian_matrix(2000, 2, 100 + r), 0, 1, {}, 0.05).reject;
    const double rate = rejects / static_cast<double>(reps);
    EXPECT_GE(rate, 0.03);
    EXPECT_LE(rate, 0.07);
}

TEST(FisherZ, GaussianChainSeparationAndPower) {
    const int reps = 200;
    int given = 0, marginal = 0;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd data = gaussian_chain(2000, 900 + r);
        given += fisher_z_test(data, 0, 2, {1}, 0.05).reject;
        marginal += fisher_z_test(data, 0, 2, {}, 0.05).reject;
    }
    const double half = 2 * std::sqrt(0.05 * 0.95 / reps);
    EXPECT_NEAR(given / static_cast<double>(reps), 0.05, half + 0.01);
    EXPECT_GE(marginal / static_cast<double>(reps), 0.99);
}

TEST(FisherZ, Errors) {
    Eigen::MatrixXd data = gaussian_matrix(50, 3, 5);
    EXPECT_THROW(fisher_z_test(data, 0, 0, {}, 0.05), SpecError);
    EXPECT_THROW(fisher_z_test(data, 0, 1, {1}, 0.05), SpecError);
    EXPECT_THROW(fisher_z_test(data, 0, 1, {}, 1.5), SpecError);
    data.col(1) = 2.0 * data.col(0);
    try {
        fisher_z_test(data, 0, 1, {}, 0.05);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.code(), "DEGENERATE_CORRELATION");
    }
    data.col(2) = data.col(0) + data.col(0);
    EXPECT_THROW(fisher_z_test(data, 0, 1, {2, 2}, 0.05), NumericalError);
    data.col(1).setConstant(3.0);
    EXPECT_THROW(fisher_z_test(data, 0, 1, {}, 0.05), NumericalError);
}

TEST(TestResult, RejectMatchesPValue) {
    const Eigen::MatrixXd data = gaussian_chain(200, 6);
    for (double alpha : {0.01, 0.05, 0.2}) {
        const TestResult r = fisher_z_test(data, 0, 2, {1}, alpha);
        EXPECT_EQ(r.reject, r.p_value < alpha);
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
    }
    EXPECT_TRUE(to_json(fisher_z_test(data, 0, 2, {}, 0.05)).contains("p_value"));
}

TEST(Kci, NullCalibrationUnconditional) {
    const int reps = 500;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) {
        KciOptions o;
        o.seed = r;
        rejects += kci_test(gaussian_matrix(200, 2, 5000 + r), 0, 1, {}, 0.05, o).reject;
    }
    const double rate = rejects / static_cast<double>(reps);
    EXPECT_GE(rate, 0.02);
    EXPECT_LE(rate, 0.09);
}

TEST(Kci, DetectsQuadraticDependence) {
    const int reps = 40;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd data = gaussian_matrix(1000, 2, 7000 + r);
        data.col(1) += data.col(0).array().square().matrix();
        KciOptions o;
        o.seed = r;
        rejects += kci_test(data, 0, 1, {}, 0.05, o).reject;
    }
    EXPECT_GE(rejects / static_cast<double>(reps), 0.95);
}

TEST(Kci, QuadraticDependenceConfirmedByPermutationNull) {
    Eigen::MatrixXd data = gaussian_matrix(400, 2, 77);
    data.col(1) += data.col(0).array().square().matrix();
    KciOptions o;
    o.permutations = 200;
    const TestResult r = kci_test(data, 0, 1, {}, 0.05, o);
    EXPECT_TRUE(r.reject);
    EXPECT_LE(r.p_value, 1.0 / 201 + 1e-12);
}

TEST(Kci, ChainSeparatedByMiddleVariable) {
    const int reps = 100;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) {
        KciOptions o;
        o.seed = r;
        rejects += kci_test(gaussian_chain(300, 8000 + r), 0, 2, {1}, 0.05, o).reject;
    }
    EXPECT_LE(rejects / static_cast<double>(reps), 0.12);
}

TEST(Kci, ExchangeSymmetryWithSharedFeatureSeed) {
    const Eigen::MatrixXd data = gaussian_chain(300, 9);
    KciOptions o;
    o.seed = 3;
    o.column_keys = {11, 22, 33};
    const TestResult a = kci_test(data, 0, 2, {1}, 0.05, o);
    const TestResult b = kci_test(data, 2, 0, {1}, 0.05, o);
    EXPECT_NEAR(a.statistic, b.statistic, 1e-8 * std::max(1.0, a.statistic));
    EXPECT_NEAR(a.p_value, b.p_value, 1e-8);
}

TEST(Kci, DeterministicGivenSeed) {
    const Eigen::MatrixXd data = gaussian_chain(200, 10);
    KciOptions o;
    o.seed = 12;
    EXPECT_EQ(kci_test(data, 0, 2, {1}, 0.05, o).statistic, kci_test(data, 0, 2, {1}, 0.05, o).statistic);
}

TEST(Kci, Errors) {
    Eigen::MatrixXd data = gaussian_matrix(100, 3, 13);
    KciOptions o;
    o.num_features = 0;
    EXPECT_THROW(kci_test(data, 0, 1, {2}, 0.05, o), SpecError);
    data.col(0).setZero();
    EXPECT_THROW(kci_test(data, 0, 1, {2}, 0.05), NumericalError);
    EXPECT_THROW(kci_test(gaussian_matrix(5, 2, 1), 0, 1, {}, 0.05), NumericalError);
}

TEST(Kci, GramAndCovarianceTracesAgree) {
    const Eigen::MatrixXd rx = gaussian_matrix(40, 3, 14), ry = gaussian_matrix(40, 4, 15);
    Eigen::MatrixXd cx = rx.rowwise() - rx.colwise().mean();
    Eigen::MatrixXd cy = ry.rowwise() - ry.colwise().mean();
    const auto cov = detail::product_null_traces(cx, cy, detail::TraceRoute::covariance);
    const auto gram = detail::product_null_traces(cx, cy, detail::TraceRoute::gram);
    EXPECT_NEAR(cov.first, gram.first, 1e-9 * cov.first);
    EXPECT_NEAR(cov.second, gram.second, 1e-9 * cov.second);
}

TEST(Hsic, IdenticalVectorsRejectStrongly) {
    const Eigen::VectorXd x = gaussian_matrix(500, 1, 16).col(0);
    const TestResult r = hsic_test(x, x, 0.05);
    EXPECT_TRUE(r.reject);
    EXPECT_LT(r.p_value, 1e-3);
}

TEST(Hsic, NullCalibration) {
    const int reps = 500;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd m = gaussian_matrix(100, 2, 20000 + r);
        rejects += hsic_test(m.col(0), m.col(1), 0.05).reject;
    }
    const double rate = rejects / static_cast<double>(reps);
    EXPECT_GE(rate, 0.02);
    EXPECT_LE(rate, 0.09);
}

TEST(Hsic, DetectsSquare) {
    const int reps = 40;
    int rejects = 0;
    for (int r = 0; r < reps; ++r) {
        const Eigen::VectorXd x = gaussian_matrix(500, 1, 30000 + r).col(0);
        rejects += hsic_test(x, x.array().square().matrix(), 0.05).reject;
    }
    EXPECT_GE(rejects / static_cast<double>(reps), 0.95);
}

TEST(Hsic, PermutationNullAgreesOnIndependentData) {
    const Eigen::MatrixXd m = gaussian_matrix(200, 2, 31);
    HsicOptions o;
    o.permutations = 300;
    const TestResult perm = hsic_test(m.col(0), m.col(1), 0.05, o);
    const TestResult gamma = hsic_test(m.col(0), m.col(1), 0.05);
    EXPECT_NEAR(perm.statistic, gamma.statistic, 1e-10 * gamma.statistic);
    EXPECT_NEAR(perm.p_value, gamma.p_value, 0.15);
}

TEST(Hsic, Errors) {
    const Eigen::VectorXd x = gaussian_matrix(60, 1, 17).col(0);
    EXPECT_THROW(hsic_test(x, x.head(30), 0.05), SpecError);
    EXPECT_THROW(hsic_test(x, Eigen::VectorXd::Ones(60), 0.05), NumericalError);
}

TEST(Helpers, GammaTailAndMedianDistance) {
    // Shape 1 is exponential.
    EXPECT_NEAR(gamma_upper_tail(2.0, 1.0, 1.0), std::exp(-2.0), 1e-12);
    EXPECT_THROW(gamma_upper_tail(1.0, 0.0, 1.0), NumericalError);
    Eigen::MatrixXd pts(3, 1);
    pts << 0.0, 1.0, 3.0;
    EXPECT_DOUBLE_EQ(median_distance(pts), 2.0);
    const Eigen::MatrixXd z = standardize(gaussian_matrix(50, 2, 18));
    EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-12);
    EXPECT_NEAR((z.col(1).array() - z.col(1).mean()).square().sum() / 49.0, 1.0, 1e-12);
}
