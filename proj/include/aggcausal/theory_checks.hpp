#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aggcausal/aggregation.hpp"
#include "aggcausal/scm.hpp"
#include "aggcausal/stat_tests.hpp"

namespace aggcausal {

/// Conditional-mean estimate of the aggregated mechanism on a grid. Grid points
/// with local support below the minimum carry NaN.
struct FhatEstimate {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<int> support;
    double bandwidth = 0.0;
    int n_used = 0;

    bool missing(std::size_t g) const { return std::isnan(values[g]); }
    // Linear interpolation over non-missing grid points; nullopt outside them.
    std::optional<double> at(double t) const;
};

enum class Smoother { nadaraya_watson, local_linear };

struct FhatOptions {
    Smoother smoother = Smoother::nadaraya_watson;
    std::optional<std::vector<double>> grid;
    std::optional<double> bandwidth;
    int grid_points = 41;
    double lower_quantile = 0.025;
    double upper_quantile = 0.975;
    int min_support = 10;
};

// 0.9 min(sd, IQR/1.34) n^(-1/5).
double silverman_bandwidth(const Eigen::VectorXd& v);
double quantile(std::vector<double> v, double q);

// Cause variable is the mechanism's single inner parent; returns per-realization
// sums of the noise-free mechanism outer(inner(x_t)) and the aggregated cause.
std::pair<Eigen::VectorXd, Eigen::VectorXd> mechanism_sums(const Panel& panel, const MechanismSpec& f);

// Nadaraya-Watson regression of the mechanism sums on the aggregated cause.
FhatEstimate estimate_fhat(const Panel& panel, const MechanismSpec& f, const FhatOptions& opts = {});
FhatEstimate nadaraya_watson(const Eigen::VectorXd& t, const Eigen::VectorXd& s, const std::vector<double>& grid,
                             double bandwidth, int min_support = 10);

// Gaussian-weighted local-linear fit; reproduces linear functions exactly.
FhatEstimate local_linear_smoother(const Eigen::VectorXd& t, const Eigen::VectorXd& s, const std::vector<double>& grid,
                                   double bandwidth, int min_support = 10);

// Ordinary least-squares slope of the non-missing estimate values on the grid.
double fhat_slope(const FhatEstimate& est);

struct ProfilePoint {
    double t = 0.0;
    double variance = 0.0;  // NaN when unsupported
    int support = 0;
};

// Residual variance of a local-linear fit of the mechanism sums inside
// |aggregated cause - t| <= bandwidth.
std::vector<ProfilePoint> conditional_variance_profile(const Panel& panel, const MechanismSpec& f,
                                                       const std::vector<double>& grid, double bandwidth,
                                                       int min_support = 10);

struct ResidualDiagnostics {
    std::vector<double> residuals;
    TestResult independence;
    std::vector<ProfilePoint> variance_profile;
    double coverage = 0.0;
    double residual_mean = 0.0;
    double residual_stderr = 0.0;
    double residual_correlation = 0.0;
};

// Residuals of the effect's aggregate against the estimate; the effect is the
// mechanism's own variable `effect`.
ResidualDiagnostics residual_independence_check(const Panel& panel, const FhatEstimate& fhat, const MechanismSpec& f,
                                                const std::string& effect, double alpha, const HsicOptions& hsic = {});

struct RegionOptions {
    int grid_points = 25;
    int bootstrap = 200;
    double alpha = 0.05;
    double lower_quantile = 0.025;
    double upper_quantile = 0.975;
    std::string effect = "Y";
};

struct RegionReport {
    FhatEstimate fhat_a;
    FhatEstimate fhat_b;
    std::vector<double> se_a;
    std::vector<double> se_b;
    double max_gap = 0.0;
    double critical = 0.0;  // Bonferroni normal quantile
    bool gap_significant = false;
    double slope_at_zero_a = 0.0;
    double slope_at_zero_b = 0.0;
};

RegionReport region_consistency_check(const AlignedModelSpec& spec_a, const AlignedModelSpec& spec_b, int k, int n,
                                      std::uint64_t seed, const RegionOptions& opts = {});

// Local-linear slope of the mechanism sums at t with window half-width h.
double local_linear_slope(const Eigen::VectorXd& t, const Eigen::VectorXd& s, double at, double h);

struct AsymptoticPoint {
    int k = 0;
    double mean = 0.0;
    double variance = 0.0;
    double stderr_mean = 0.0;
    double bound_mean = 0.0;        // proof bound averaged over realizations
    double expected_bound = 0.0;    // proof bound with the sampled mean noise norm
    int dominated = 0;              // realizations whose difference <= their bound
    int reps = 0;
};

std::vector<AsymptoticPoint> asymptotic_equivalence_check(const VarModelSpec& spec, NormalizationSpec norm,
                                                          const std::vector<int>& ks, int reps, std::uint64_t seed);

struct KurtosisPoint {
    int k = 0;
    double excess_kurtosis = 0.0;
    double expected = 0.0;  // base excess kurtosis / k
};

std::vector<KurtosisPoint> nongaussianity_curve(const NoiseSpec& noise, const std::vector<int>& ks, int n,
                                                std::uint64_t seed);
double excess_kurtosis(const Eigen::VectorXd& v);
double noise_excess_kurtosis(const NoiseSpec& noise);

nlohmann::json to_json(const FhatEstimate& f);
nlohmann::json to_json(const ResidualDiagnostics& d);
nlohmann::json to_json(const RegionReport& r);
nlohmann::json to_json(const std::vector<AsymptoticPoint>& pts);
nlohmann::json to_json(const std::vector<KurtosisPoint>& pts);
nlohmann::json to_json(const std::vector<ProfilePoint>& pts);

// Header `grid,value`; missing values are written empty.
std::string fhat_to_csv(const FhatEstimate& f);

}  // namespace aggcausal
