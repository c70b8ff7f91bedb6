#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aggcausal/error.hpp"
#include "aggcausal/experiments.hpp"
#include "aggcausal/rng.hpp"

using namespace aggcausal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("aggcausal_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig small_fork_config(int reps = 4) {
    return config_from_json(json{{"name", "ci_tables"},
                                 {"repetitions", reps},
                                 {"seed", 11},
                                 {"params", {{"n", 200}, {"structures", {"fork"}}}}});
}

std::string code_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const SpecError& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST(Config, NamesAndDefaults) {
    EXPECT_EQ(experiment_names().size(), 6u);
    for (const auto& name : experiment_names()) {
        const ExperimentConfig c = config_from_json(json{{"name", name}, {"seed", 1}});
        EXPECT_EQ(c.params, default_params(name));
        EXPECT_EQ(c.repetitions, name == "variance_scaling" ? 50 : 100);
    }
    EXPECT_THROW(default_params("ges"), SpecError);
}

TEST(Config, OverridesMergeAndSeedFlag) {
    bool has_seed = true;
    const ExperimentConfig c = config_from_json(json{{"name", "k_effect"}, {"params", {{"n", 50}}}}, &has_seed);
    EXPECT_FALSE(has_seed);
    EXPECT_EQ(c.params["n"], 50);
    EXPECT_EQ(c.params["coefficient"], 0.6);
    EXPECT_EQ(config_from_json(to_json(c)).params, c.params);
}

TEST(Config, ValidationCodes) {
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"colour", 1}}), "UNKNOWN_FIELD");
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"params", {{"depth", 3}}}}), "UNKNOWN_PARAM");
    EXPECT_EQ(code_of(json{{"name", "ges"}}), "UNKNOWN_EXPERIMENT");
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"repetitions", 0}}), "BAD_REPETITIONS");
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"params", {{"alpha", 1.5}}}}), "BAD_PARAM");
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"params", {{"structures", {"loop"}}}}}), "BAD_PARAM");
    EXPECT_EQ(code_of(json{{"name", "k_effect"}, {"params", {{"ks", {0, 2}}}}}), "BAD_PARAM");
    EXPECT_EQ(code_of(json{{"name", "pc_prior"}, {"params", {{"test", "g2"}}}}), "SPEC_BAD_TEST");
    EXPECT_EQ(code_of(json{{"name", "ci_tables"}, {"params", {{"n", "many"}}}}), "BAD_PARAM");
    EXPECT_EQ(code_of(json::array()), "BAD_CONFIG");
}

TEST(Config, ShippedExampleConfigsValidate) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(DOCS_DIR) / "experiments")) {
        if (entry.path().extension() != ".json") continue;
        const json j = json::parse(slurp(entry.path()));
        EXPECT_NO_THROW(config_from_json(j)) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 6);
}

TEST(Metric, RateAndHalfWidth) {
    Metric m{"x", 30, 100};
    EXPECT_DOUBLE_EQ(m.rate(), 0.3);
    EXPECT_NEAR(m.half_width(), 1.96 * std::sqrt(0.3 * 0.7 / 100), 1e-15);
    EXPECT_EQ(Metric{}.half_width(), 0.0);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(257, 4, [&](int i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Run, CiTablesForkShapeAndSeeds) {
    const ExperimentConfig c = small_fork_config();
    const ExperimentReport r = run_experiment(c);
    ASSERT_EQ(r.cells.size(), 4u);
    for (const CellResult& cell : r.cells) {
        EXPECT_EQ(cell.table, "ci_tables_fork");
        EXPECT_FALSE(cell.aborted);
        EXPECT_EQ(cell.metrics.size(), 8u);
        for (const Metric& m : cell.metrics) {
            EXPECT_EQ(m.reps, 4);
            EXPECT_DOUBLE_EQ(m.rate() * m.reps, std::round(m.rate() * m.reps));
        }
        std::string key = cell.table;
        for (const auto& [k, v] : cell.id) key += "/" + k + "=" + v;
        const std::uint64_t base = derive_seed(c.seed, name_key(key));
        for (int rep = 0; rep < 4; ++rep) EXPECT_EQ(cell.seeds[rep], derive_seed(base, rep));
    }
    EXPECT_EQ(r.cell("ci_tables_fork", {{"f", "nonlinear"}, {"g", "linear"}}).id_value("f"), "nonlinear");
    EXPECT_THROW(r.cell("ci_tables_chain", {}), SpecError);
}

TEST(Run, ReproducibleAndParallelInvariant) {
    const ExperimentConfig c = small_fork_config(3);
    const json a = to_json(run_experiment(c));
    EXPECT_EQ(to_json(run_experiment(c)), a);
    EXPECT_EQ(to_json(run_experiment(c, RunOptions{3})), a);
    ExperimentConfig other = c;
    other.seed = 12;
    EXPECT_NE(to_json(run_experiment(other)), a);
}

TEST(Run, FailingRepAbortsOnlyItsCell) {
    const ExperimentConfig c = config_from_json(json{{"name", "fcm_vs_k"},
                                                     {"repetitions", 3},
                                                     {"seed", 2},
                                                     {"params",
                                                      {{"models", {"linear"}},
                                                       {"n_linear", 5},
                                                       {"ks_linear", {1}}}}});
    const ExperimentReport r = run_experiment(c);
    ASSERT_EQ(r.cells.size(), 1u);
    const CellResult& cell = r.cells[0];
    EXPECT_TRUE(cell.aborted);
    EXPECT_EQ(cell.error_rep, 0);
    EXPECT_EQ(cell.error_code, "TOO_FEW_SAMPLES");
    EXPECT_EQ(cell.error_seed, cell.seeds[0]);

    const fs::path dir = scratch_dir("abort");
    write_report(r, dir);
    EXPECT_NE(slurp(dir / "fcm_vs_k.csv").find("aborted:TOO_FEW_SAMPLES"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Report, CsvManifestAndStableHashes) {
    const ExperimentReport r = run_experiment(small_fork_config(3));
    const fs::path a = scratch_dir("write_a"), b = scratch_dir("write_b");
    const auto ma = write_report(r, a);
    const auto mb = write_report(r, b);
    ASSERT_EQ(ma.size(), 2u);
    for (std::size_t i = 0; i < ma.size(); ++i) {
        EXPECT_EQ(ma[i].path, mb[i].path);
        EXPECT_EQ(ma[i].sha256, mb[i].sha256);
        EXPECT_EQ(ma[i].sha256.size(), 64u);
    }
    EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
    EXPECT_FALSE(fs::exists(a / "timing.json"));

    std::istringstream csv(slurp(a / "ci_tables_fork.csv"));
    std::string header, line;
    std::getline(csv, header);
    EXPECT_EQ(header.rfind("structure,f,g,I,I_half_width,II", 0), 0u);
    EXPECT_NE(header.find(",reps,status"), std::string::npos);
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        EXPECT_NE(line.find(",3,ok"), std::string::npos);
    }
    EXPECT_EQ(rows, 4);

    const json manifest = json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(manifest["experiment"], "ci_tables");
    EXPECT_EQ(manifest["seed"], 11);
    EXPECT_EQ(manifest["files"].size(), 2u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Report, EmptyReportWritesOnlyReportJson) {
    ExperimentReport r;
    r.config = small_fork_config(1);
    const fs::path dir = scratch_dir("empty");
    const auto m = write_report(r, dir);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].path, "report.json");
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    fs::remove_all(dir);
}
