#include "aggcausal/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aggcausal/error.hpp"
#include "aggcausal/io.hpp"

namespace aggcausal {

double NormalizationSpec::g(int k) const {
    switch (kind) {
        case Kind::one: return 1.0;
        case Kind::k: return static_cast<double>(k);
        case Kind::sqrt_k: return std::sqrt(static_cast<double>(k));
    }
    return 1.0;
}

std::string NormalizationSpec::name() const {
    switch (kind) {
        case Kind::one: return "one";
        case Kind::k: return "k";
        case Kind::sqrt_k: return "sqrt_k";
    }
    return "one";
}

NormalizationSpec NormalizationSpec::parse(const std::string& name) {
    if (name == "one") return {Kind::one};
    if (name == "k") return {Kind::k};
    if (name == "sqrt_k") return {Kind::sqrt_k};
    throw SpecError("SPEC_BAD_NORM", "unknown normalization '" + name + "'");
}

int AggregatedDataset::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

Eigen::VectorXd AggregatedDataset::column(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw SpecError("UNKNOWN_VARIABLE", "dataset has no column '" + name + "'");
    return data.col(i);
}

AggregatedDataset aggregate_panel(const Panel& panel, NormalizationSpec norm) {
    panel.check_finite();
    AggregatedDataset out;
    out.names = panel.names();
    out.k = panel.k();
    out.norm = norm;
    out.data = Eigen::MatrixXd::Zero(panel.n(), panel.s());
    const double g = norm.g(panel.k());
    for (int r = 0; r < panel.n(); ++r) {
        for (int v = 0; v < panel.s(); ++v) {
            double sum = 0.0;
            for (int t = 0; t < panel.k(); ++t) sum += panel.at(r, t, v);
            out.data(r, v) = sum / g;
        }
    }
    return out;
}

AggregatedDataset aggregate_series(const Eigen::MatrixXd& series, int k, NormalizationSpec norm,
                                   std::vector<std::string> names) {
    if (k < 1) throw SpecError("BAD_ARGUMENT", "aggregation factor k must be >= 1");
    const int T = static_cast<int>(series.rows());
    if (T < k) throw SpecError("SERIES_TOO_SHORT", "series shorter than one window");
    if (!series.allFinite()) throw NumericalError("NON_FINITE", "series contains a non-finite entry");
    const int s = static_cast<int>(series.cols());
    if (names.empty())
        for (int v = 0; v < s; ++v) names.push_back("V" + std::to_string(v + 1));
    if (static_cast<int>(names.size()) != s) throw SpecError("BAD_ARGUMENT", "names must match series columns");

    AggregatedDataset out;
    out.names = std::move(names);
    out.k = k;
    out.norm = norm;
    const int windows = T / k;
    out.data = Eigen::MatrixXd::Zero(windows, s);
    const double g = norm.g(k);
    for (int w = 0; w < windows; ++w) out.data.row(w) = series.middleRows(w * k, k).colwise().sum() / g;
    return out;
}

std::string dataset_to_csv(const AggregatedDataset& d) {
    std::ostringstream os;
    os << "rep";
    for (const auto& name : d.names) os << ',' << name;
    os << '\n';
    for (int r = 0; r < d.n(); ++r) {
        os << (r + 1);
        for (int v = 0; v < d.s(); ++v) os << ',' << format_double(d.data(r, v));
        os << '\n';
    }
    return os.str();
}

AggregatedDataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SpecError("BAD_CSV", "empty dataset CSV");
    auto header = split(trim(line), ',');
    if (header.size() < 2 || header[0] != "rep") throw SpecError("BAD_CSV", "dataset CSV header must start with rep");
    AggregatedDataset d;
    d.names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != header.size()) throw SpecError("BAD_CSV", "row has wrong number of columns");
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(std::stod(cells[c]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw SpecError("BAD_CSV", "dataset CSV has no rows");
    d.data.resize(static_cast<int>(rows.size()), static_cast<int>(d.names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) d.data(r, c) = rows[r][c];
    if (!d.data.allFinite()) throw NumericalError("NON_FINITE", "dataset contains a non-finite entry");
    return d;
}

}  // namespace aggcausal
