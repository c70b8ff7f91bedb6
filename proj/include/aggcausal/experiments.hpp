#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace aggcausal {

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    std::string name;
    int repetitions = 100;
    std::uint64_t seed = 0;
    nlohmann::json params = nlohmann::json::object();  // defaults merged in
};

// Default parameter block for an experiment; throws SpecError on unknown names.
nlohmann::json default_params(const std::string& name);

// Merges params over the defaults and validates. A missing "seed" is left at 0
// and flagged through `has_seed`.
ExperimentConfig config_from_json(const nlohmann::json& j, bool* has_seed = nullptr);
nlohmann::json to_json(const ExperimentConfig& c);
void validate_config(const ExperimentConfig& c);

struct Metric {
    std::string name;
    int count = 0;
    int reps = 0;

    double rate() const { return reps > 0 ? static_cast<double>(count) / reps : 0.0; }
    // 1.96 * sqrt(p (1 - p) / R)
    double half_width() const;
};

struct CellResult {
    std::string table;
    std::vector<std::pair<std::string, std::string>> id;
    int reps = 0;
    std::vector<Metric> metrics;
    std::vector<std::pair<std::string, double>> means;
    std::vector<std::uint64_t> seeds;
    bool aborted = false;
    int error_rep = -1;
    std::uint64_t error_seed = 0;
    std::string error_code;
    std::string error_message;
    nlohmann::json extra = nlohmann::json::object();

    const Metric& metric(const std::string& name) const;
    double mean(const std::string& name) const;
    std::string id_value(const std::string& key) const;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<CellResult> cells;
    double wall_clock_seconds = 0.0;

    // First cell of `table` whose id contains every given pair; throws when absent.
    const CellResult& cell(const std::string& table,
                           const std::vector<std::pair<std::string, std::string>>& id) const;
};

struct RunOptions {
    int parallel = 1;
};

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& opts = {});

// Wall-clock time is left out so reports replay byte for byte.
nlohmann::json to_json(const ExperimentReport& r);

struct ManifestEntry {
    std::string path;
    std::string sha256;
    std::vector<std::string> columns;
};

// Writes report.json, one CSV per table and manifest.json. Wall-clock time is
// not written, so replays are byte-identical.
std::vector<ManifestEntry> write_report(const ExperimentReport& report, const std::filesystem::path& dir);

// Runs fn(i) for i in [0, count) on `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace aggcausal
