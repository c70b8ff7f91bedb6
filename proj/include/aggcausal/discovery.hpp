#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aggcausal/aggregation.hpp"
#include "aggcausal/graph.hpp"
#include "aggcausal/stat_tests.hpp"

namespace aggcausal {

enum class CiTestKind { fisher_z, kci };

CiTestKind parse_ci_test(const std::string& name);
std::string ci_test_name(CiTestKind kind);

struct PcOptions {
    CiTestKind test = CiTestKind::fisher_z;
    double alpha = 0.05;
    bool stable = true;
    int max_cond = -1;  // unlimited when negative
    // Unordered pairs (first < second) of node indices.
    std::optional<std::set<Edge>> skeleton_prior;
    KciOptions kci;
};

Cpdag pc_discover(const Eigen::MatrixXd& data, const std::vector<std::string>& names, const PcOptions& opts);
Cpdag pc_discover(const AggregatedDataset& data, const PcOptions& opts);

// Linear-Gaussian BIC of `node` regressed on `parents` (with intercept);
// larger is better.
double local_bic(const Eigen::MatrixXd& data, int node, const std::vector<int>& parents);
double bic_score(const Eigen::MatrixXd& data, const Dag& dag);

struct ScoreSearchResult {
    Dag best;
    double score = 0.0;
    Cpdag cpdag;
};

ScoreSearchResult score_search_full(const Eigen::MatrixXd& data, const std::vector<std::string>& names,
                                    int max_vars = 5);
Cpdag score_search(const Eigen::MatrixXd& data, const std::vector<std::string>& names, int max_vars = 5);
Cpdag score_search(const AggregatedDataset& data, int max_vars = 5);

enum class Direction { x_to_y, y_to_x, undecided };
std::string direction_name(Direction d);

struct DirectionVerdict {
    Direction direction = Direction::undecided;
    double confidence = 0.0;
    nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const DirectionVerdict& v);

struct LingamOptions {
    int num_features = 10;  // per block of the kernel contrast
    double threshold = 0.0; // undecided when confidence < threshold
    std::uint64_t seed = 0;
};

DirectionVerdict direct_lingam_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                         const LingamOptions& opts = {});

struct AnmOptions {
    double ridge = -1.0;     // absolute ridge; defaults to 1e-3 * n when negative
    double bandwidth = 1.0;  // multiplier on the median heuristic
    double threshold = 0.0;
    HsicOptions hsic;
};

DirectionVerdict anm_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AnmOptions& opts = {});

// Gaussian-kernel ridge fit of y on x without intercept; returns fitted values.
Eigen::VectorXd kernel_ridge_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double ridge,
                                 double bandwidth_multiplier);

}  // namespace aggcausal
