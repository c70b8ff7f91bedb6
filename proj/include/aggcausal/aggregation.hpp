#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggcausal/scm.hpp"

namespace aggcausal {

struct NormalizationSpec {
    enum class Kind { one, k, sqrt_k };
    Kind kind = Kind::one;

    double g(int k) const;
    std::string name() const;
    static NormalizationSpec parse(const std::string& name);  // "one" | "k" | "sqrt_k"
};

/// n x s table of aggregated samples.
struct AggregatedDataset {
    Eigen::MatrixXd data;
    std::vector<std::string> names;
    int k = 1;
    NormalizationSpec norm;

    int n() const { return static_cast<int>(data.rows()); }
    int s() const { return static_cast<int>(data.cols()); }
    int index_of(const std::string& name) const;
    Eigen::VectorXd column(const std::string& name) const;
};

AggregatedDataset aggregate_panel(const Panel& panel, NormalizationSpec norm);

// Non-overlapping windows of length k; a trailing remainder is dropped.
AggregatedDataset aggregate_series(const Eigen::MatrixXd& series, int k, NormalizationSpec norm,
                                   std::vector<std::string> names = {});

// Header `rep,<names>`, rep 1-based.
std::string dataset_to_csv(const AggregatedDataset& d);
AggregatedDataset dataset_from_csv(const std::string& text);

}  // namespace aggcausal
