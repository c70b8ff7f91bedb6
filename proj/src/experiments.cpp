#include "aggcausal/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "aggcausal/aggregation.hpp"
#include "aggcausal/discovery.hpp"
#include "aggcausal/error.hpp"
#include "aggcausal/graph.hpp"
#include "aggcausal/io.hpp"
#include "aggcausal/rng.hpp"
#include "aggcausal/scm.hpp"
#include "aggcausal/stat_tests.hpp"

namespace aggcausal {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config

const std::map<std::string, json>& defaults_table() {
    static const std::map<std::string, json> table = {
        {"discovery_4var",
         {{"n", 500}, {"k", 2}, {"alpha", 0.05}, {"settings", {"linear", "nonlinear"}}, {"linear_test", "fisher_z"},
          {"nonlinear_test", "kci"}, {"kci_features_xy", 50}, {"normalization", "one"}}},
        {"fcm_vs_k",
         {{"models", {"linear", "nonlinear"}}, {"n_linear", 10000}, {"n_nonlinear", 500}, {"coefficient", 2.0},
          {"ks_linear", {1, 2, 3, 5, 10, 20, 30, 50, 100}}, {"ks_nonlinear", {1, 2, 3, 5, 10}},
          {"normalization", "one"}}},
        {"ci_tables",
         {{"n", 1000}, {"k", 2}, {"alpha", 0.05}, {"structures", {"chain", "fork", "collider"}},
          {"combinations", {"linear+linear", "nonlinear+linear", "linear+nonlinear", "nonlinear+nonlinear"}}}},
        {"k_effect",
         {{"n", 500}, {"ks", {1, 2, 5, 10, 20, 50}}, {"coefficient", 0.6}, {"burn_in", 100},
          {"models", {"var", "aligned"}}, {"normalization", "sqrt_k"}}},
        {"pc_prior",
         {{"n", 500}, {"k", 2}, {"alpha", 0.05}, {"test", "kci"}, {"kci_features_xy", 50},
          {"data", {"disaggregated", "aggregated"}},
          {"normalization", "one"}}},
        {"variance_scaling",
         {{"n", 500}, {"k", 2}, {"repeats", 5}, {"inflated_variance", 4.0}, {"settings", {"N_X", "N_Z"}},
          {"normalization", "one"}}},
    };
    return table;
}

int default_repetitions(const std::string& name) { return name == "variance_scaling" ? 50 : 100; }

template <typename T>
T param(const ExperimentConfig& c, const std::string& key) {
    try {
        return c.params.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SpecError("BAD_PARAM", "parameter '" + key + "': " + e.what());
    }
}

void require(bool ok, const std::string& code, const std::string& msg) {
    if (!ok) throw SpecError(code, msg);
}

void require_subset(const ExperimentConfig& c, const std::string& key, const std::set<std::string>& allowed) {
    const auto values = param<std::vector<std::string>>(c, key);
    require(!values.empty(), "BAD_PARAM", "parameter '" + key + "' is empty");
    for (const auto& v : values) require(allowed.count(v) > 0, "BAD_PARAM", "parameter '" + key + "' has unknown value '" + v + "'");
}

void require_ks(const ExperimentConfig& c, const std::string& key) {
    const auto ks = param<std::vector<int>>(c, key);
    require(!ks.empty(), "BAD_PARAM", "parameter '" + key + "' is empty");
    for (int k : ks) require(k >= 1, "BAD_PARAM", "parameter '" + key + "' needs k >= 1");
}

// ---------------------------------------------------------------------------
// Cell plans

struct RepOutcome {
    std::vector<bool> hits;       // aligned with CellPlan::metrics
    std::vector<double> values;   // aligned with CellPlan::means
};

struct CellPlan {
    std::string table;
    std::vector<std::pair<std::string, std::string>> id;
    std::vector<std::string> metrics;
    std::vector<std::string> means;
    int reps = 0;
    int group_size = 0;  // > 0: report per-group rates of the first metric
    std::function<RepOutcome(std::uint64_t seed)> run;
};

std::string cell_key(const CellPlan& p) {
    std::string key = p.table;
    for (const auto& [k, v] : p.id) key += "/" + k + "=" + v;
    return key;
}

NormalizationSpec norm_of(const ExperimentConfig& c) { return NormalizationSpec::parse(param<std::string>(c, "normalization")); }

AggregatedDataset simulate_and_aggregate(const AlignedModelSpec& spec, int k, int n, std::uint64_t seed,
                                         NormalizationSpec norm) {
    return aggregate_panel(simulate_aligned(spec, k, n, seed), norm);
}

Cpdag truth_of(const AlignedModelSpec& spec) { return dag_to_cpdag(spec.instantaneous_dag); }

// Disaggregated data is the k = 1 panel of the same model.
int effective_k(const std::string& data, int k) { return data == "disaggregated" ? 1 : k; }

// ---------------------------------------------------------------------------
// discovery_4var

std::vector<CellPlan> plan_discovery_4var(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const int n = param<int>(c, "n");
    const int k = param<int>(c, "k");
    const double alpha = param<double>(c, "alpha");
    const NormalizationSpec norm = norm_of(c);
    for (const auto& setting : param<std::vector<std::string>>(c, "settings")) {
        const bool nonlinear = setting == "nonlinear";
        const AlignedModelSpec spec = models::four_variable(nonlinear);
        require_valid(spec);
        PcOptions pc;
        pc.alpha = alpha;
        pc.test = parse_ci_test(param<std::string>(c, nonlinear ? "nonlinear_test" : "linear_test"));
        pc.kci.num_features_xy = param<int>(c, "kci_features_xy");
        for (const std::string data : {"disaggregated", "aggregated"}) {
            CellPlan p;
            p.table = "discovery_4var";
            p.id = {{"setting", setting}, {"data", data}};
            p.metrics = {"pc", "score_search"};
            p.means = {"pc_skeleton_f1", "score_search_skeleton_f1"};
            p.reps = c.repetitions;
            const int kk = effective_k(data, k);
            p.run = [spec, pc, kk, n, norm](std::uint64_t seed) {
                const AggregatedDataset d = simulate_and_aggregate(spec, kk, n, derive_seed(seed, 1), norm);
                const Cpdag truth = truth_of(spec);
                PcOptions o = pc;
                o.kci.seed = derive_seed(seed, 2);
                const Cpdag pc_graph = pc_discover(d, o);
                const Cpdag ss_graph = score_search(d);
                return RepOutcome{{same_mec(pc_graph, truth), same_mec(ss_graph, truth)},
                                  {skeleton_f1(pc_graph, truth), skeleton_f1(ss_graph, truth)}};
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// fcm_vs_k

std::vector<CellPlan> plan_fcm_vs_k(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const NormalizationSpec norm = norm_of(c);
    const double coefficient = param<double>(c, "coefficient");
    for (const auto& model : param<std::vector<std::string>>(c, "models")) {
        const bool linear = model == "linear";
        const NoiseSpec u = NoiseSpec::uniform(0.0, 1.0);
        const AlignedModelSpec spec = linear ? models::bivariate_linear(coefficient, u, u)
                                             : models::bivariate_additive(BasicFunction::square(), u, u);
        require_valid(spec);
        const int n = param<int>(c, linear ? "n_linear" : "n_nonlinear");
        for (int k : param<std::vector<int>>(c, linear ? "ks_linear" : "ks_nonlinear")) {
            CellPlan p;
            p.table = "fcm_vs_k";
            p.id = {{"model", model}, {"method", linear ? "direct_lingam" : "anm"}, {"k", std::to_string(k)}, {"n", std::to_string(n)}};
            p.metrics = {"accuracy"};
            p.reps = c.repetitions;
            p.run = [spec, linear, k, n, norm](std::uint64_t seed) {
                const AggregatedDataset d = simulate_and_aggregate(spec, k, n, derive_seed(seed, 1), norm);
                const Eigen::VectorXd x = d.column("X");
                const Eigen::VectorXd y = d.column("Y");
                DirectionVerdict v;
                if (linear) {
                    LingamOptions o;
                    o.seed = derive_seed(seed, 2);
                    v = direct_lingam_direction(x, y, o);
                } else {
                    AnmOptions o;
                    o.hsic.seed = derive_seed(seed, 2);
                    v = anm_direction(x, y, o);
                }
                return RepOutcome{{v.direction == Direction::x_to_y}, {}};
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// ci_tables

const std::vector<std::string> kHypotheses = {"I", "II", "III", "IV", "V", "VI", "A", "B"};

struct EdgeMechanism {
    bool nonlinear = false;
    BasicFunction inner;
    BasicFunction outer;

    // Linear: parent + noise. Post-nonlinear: outer(inner(parent) + noise).
    double operator()(double parent, double noise) const {
        return nonlinear ? outer(inner(parent) + noise) : parent + noise;
    }
};

BasicFunction draw_pnl_function(Rng& rng) {
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: return BasicFunction::square();
        case 1: return BasicFunction::cube();
        default: return BasicFunction::tanh();
    }
}

EdgeMechanism draw_edge(Rng& rng, bool nonlinear) {
    EdgeMechanism e;
    e.nonlinear = nonlinear;
    e.inner = draw_pnl_function(rng);
    e.outer = draw_pnl_function(rng);
    return e;
}

// Columns: aggregated X, Y, Z and the first step of Y.
Eigen::MatrixXd simulate_ci_structure(const std::string& structure, const EdgeMechanism& f, const EdgeMechanism& g,
                                      int k, int n, std::uint64_t seed) {
    Rng nx = make_stream(seed, name_key("X"));
    Rng ny = make_stream(seed, name_key("Y"));
    Rng nz = make_stream(seed, name_key("Z"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, 4);
    for (int r = 0; r < n; ++r) {
        for (int t = 0; t < k; ++t) {
            const double ex = normal(nx), ey = normal(ny), ez = normal(nz);
            double x = 0.0, y = 0.0, z = 0.0;
            if (structure == "chain") {
                x = ex;
                y = f(x, ey);
                z = g(y, ez);
            } else if (structure == "fork") {
                y = ey;
                x = f(y, ex);
                z = g(y, ez);
            } else {
                x = ex;
                z = ez;
                y = f(x, ey) + g(z, ey);
            }
            if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
                throw NumericalError("NON_FINITE", "non-finite value in " + structure + " sample");
            out(r, 0) += x;
            out(r, 1) += y;
            out(r, 2) += z;
            if (t == 0) out(r, 3) = y;
        }
    }
    return out;
}

std::vector<CellPlan> plan_ci_tables(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const int n = param<int>(c, "n");
    const int k = param<int>(c, "k");
    const double alpha = param<double>(c, "alpha");
    struct Query {
        int i, j;
        std::vector<int> cond;
    };
    const std::vector<Query> queries = {{0, 1, {}},  {1, 2, {}},  {0, 2, {}},  {0, 1, {2}},
                                        {1, 2, {0}}, {0, 2, {1}}, {0, 3, {1}}, {2, 3, {1}}};
    for (const auto& structure : param<std::vector<std::string>>(c, "structures")) {
        for (const auto& combo : param<std::vector<std::string>>(c, "combinations")) {
            const auto plus = combo.find('+');
            const bool f_nl = combo.substr(0, plus) == "nonlinear";
            const bool g_nl = combo.substr(plus + 1) == "nonlinear";
            CellPlan p;
            p.table = "ci_tables_" + structure;
            p.id = {{"structure", structure}, {"f", f_nl ? "nonlinear" : "linear"}, {"g", g_nl ? "nonlinear" : "linear"}};
            p.metrics = kHypotheses;
            p.reps = c.repetitions;
            p.run = [structure, f_nl, g_nl, k, n, alpha, queries](std::uint64_t seed) {
                Rng mech = make_stream(seed, name_key("mechanisms"));
                const EdgeMechanism f = draw_edge(mech, f_nl);
                const EdgeMechanism g = draw_edge(mech, g_nl);
                const Eigen::MatrixXd data = simulate_ci_structure(structure, f, g, k, n, derive_seed(seed, 1));
                KciOptions o;
                o.seed = derive_seed(seed, 2);
                o.column_keys = {name_key("X"), name_key("Y"), name_key("Z"), name_key("Y_1")};
                RepOutcome out;
                for (const Query& q : queries) out.hits.push_back(kci_test(data, q.i, q.j, q.cond, alpha, o).reject);
                return out;
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// k_effect

std::vector<CellPlan> plan_k_effect(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const int n = param<int>(c, "n");
    const double b = param<double>(c, "coefficient");
    const NormalizationSpec norm = norm_of(c);

    VarModelSpec var;
    var.dimension = 3;
    var.variables = {"X", "Y", "Z"};
    var.B = Eigen::MatrixXd::Zero(3, 3);
    var.B(0, 1) = b;
    var.B(2, 1) = b;
    var.noise.assign(3, NoiseSpec::gaussian(0.0, 1.0));
    var.burn_in = param<int>(c, "burn_in");
    require_valid(var);

    const AlignedModelSpec aligned = models::fork(models::linear({{"Y", b}}, NoiseSpec::gaussian(0.0, 1.0)),
                                                  models::linear({{"Y", b}}, NoiseSpec::gaussian(0.0, 1.0)),
                                                  NoiseSpec::gaussian(0.0, 1.0));
    require_valid(aligned);
    const Cpdag truth = truth_of(aligned);

    for (const auto& model : param<std::vector<std::string>>(c, "models")) {
        for (int k : param<std::vector<int>>(c, "ks")) {
            CellPlan p;
            p.table = "k_effect";
            p.id = {{"model", model}, {"k", std::to_string(k)}};
            p.metrics = {"accuracy"};
            p.means = {"skeleton_f1"};
            p.reps = c.repetitions;
            const bool is_var = model == "var";
            p.run = [=](std::uint64_t seed) {
                const AggregatedDataset d =
                    is_var ? aggregate_series(simulate_var(var, k * n, derive_seed(seed, 1)), k, norm, var.variables)
                           : simulate_and_aggregate(aligned, k, n, derive_seed(seed, 1), norm);
                const Cpdag g = score_search(d);
                return RepOutcome{{same_mec(g, truth)}, {skeleton_f1(g, truth)}};
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// pc_prior

std::vector<CellPlan> plan_pc_prior(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const int n = param<int>(c, "n");
    const int k = param<int>(c, "k");
    const NormalizationSpec norm = norm_of(c);
    const AlignedModelSpec spec = models::four_variable(true);
    require_valid(spec);
    const Cpdag truth = truth_of(spec);
    PcOptions base;
    base.alpha = param<double>(c, "alpha");
    base.test = parse_ci_test(param<std::string>(c, "test"));
    base.kci.num_features_xy = param<int>(c, "kci_features_xy");
    for (const auto& data : param<std::vector<std::string>>(c, "data")) {
        for (const std::string prior : {"none", "skeleton"}) {
            CellPlan p;
            p.table = "pc_prior";
            p.id = {{"data", data}, {"prior", prior}};
            p.metrics = {"cpdag", "v_structures"};
            p.means = {"skeleton_f1"};
            p.reps = c.repetitions;
            PcOptions o = base;
            if (prior == "skeleton") o.skeleton_prior = truth.skeleton();
            const int kk = effective_k(data, k);
            p.run = [=](std::uint64_t seed) {
                const AggregatedDataset d = simulate_and_aggregate(spec, kk, n, derive_seed(seed, 1), norm);
                PcOptions run = o;
                run.kci.seed = derive_seed(seed, 2);
                const Cpdag g = pc_discover(d, run);
                return RepOutcome{{same_mec(g, truth), v_structures(g) == v_structures(truth)}, {skeleton_f1(g, truth)}};
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// variance_scaling

std::vector<CellPlan> plan_variance_scaling(const ExperimentConfig& c) {
    std::vector<CellPlan> plans;
    const int n = param<int>(c, "n");
    const int k = param<int>(c, "k");
    const int repeats = param<int>(c, "repeats");
    const double inflated = param<double>(c, "inflated_variance");
    const NormalizationSpec norm = norm_of(c);
    for (const auto& setting : param<std::vector<std::string>>(c, "settings")) {
        const AlignedModelSpec spec = setting == "N_X" ? models::four_variable(true, inflated, 1.0)
                                                       : models::four_variable(true, 1.0, inflated);
        require_valid(spec);
        const Cpdag truth = truth_of(spec);
        for (const std::string data : {"disaggregated", "aggregated"}) {
            CellPlan p;
            p.table = "variance_scaling";
            p.id = {{"setting", setting}, {"data", data}};
            p.metrics = {"accuracy"};
            p.means = {"skeleton_f1"};
            p.reps = c.repetitions * repeats;
            p.group_size = c.repetitions;
            const int kk = effective_k(data, k);
            p.run = [=](std::uint64_t seed) {
                const AggregatedDataset d = simulate_and_aggregate(spec, kk, n, derive_seed(seed, 1), norm);
                const Cpdag g = score_search(d);
                return RepOutcome{{same_mec(g, truth)}, {skeleton_f1(g, truth)}};
            };
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

std::vector<CellPlan> plan_cells(const ExperimentConfig& c) {
    if (c.name == "discovery_4var") return plan_discovery_4var(c);
    if (c.name == "fcm_vs_k") return plan_fcm_vs_k(c);
    if (c.name == "ci_tables") return plan_ci_tables(c);
    if (c.name == "k_effect") return plan_k_effect(c);
    if (c.name == "pc_prior") return plan_pc_prior(c);
    return plan_variance_scaling(c);
}

struct JobResult {
    bool ok = false;
    RepOutcome outcome;
    std::string code;
    std::string message;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"discovery_4var", "fcm_vs_k", "ci_tables",
                                                   "k_effect", "pc_prior", "variance_scaling"};
    return names;
}

json default_params(const std::string& name) {
    auto it = defaults_table().find(name);
    if (it == defaults_table().end()) throw SpecError("UNKNOWN_EXPERIMENT", "unknown experiment '" + name + "'");
    return it->second;
}

ExperimentConfig config_from_json(const json& j, bool* has_seed) {
    if (!j.is_object()) throw SpecError("BAD_CONFIG", "config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "name" && key != "repetitions" && key != "seed" && key != "params")
            throw SpecError("UNKNOWN_FIELD", "unknown config field '" + key + "'");
    if (!j.contains("name") || !j["name"].is_string()) throw SpecError("BAD_CONFIG", "config needs a string 'name'");
    ExperimentConfig c;
    c.name = j["name"].get<std::string>();
    c.params = default_params(c.name);
    c.repetitions = default_repetitions(c.name);
    try {
        if (j.contains("repetitions")) c.repetitions = j["repetitions"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw SpecError("BAD_CONFIG", e.what());
    }
    if (has_seed) *has_seed = j.contains("seed");
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw SpecError("BAD_CONFIG", "'params' must be an object");
        for (const auto& [key, value] : j["params"].items()) {
            if (!c.params.contains(key)) throw SpecError("UNKNOWN_PARAM", "unknown parameter '" + key + "' for " + c.name);
            c.params[key] = value;
        }
    }
    validate_config(c);
    return c;
}

json to_json(const ExperimentConfig& c) {
    return {{"name", c.name}, {"repetitions", c.repetitions}, {"seed", c.seed}, {"params", c.params}};
}

void validate_config(const ExperimentConfig& c) {
    default_params(c.name);
    require(c.repetitions >= 1, "BAD_REPETITIONS", "repetitions must be at least 1");
    for (const auto& [key, _] : c.params.items()) {
        if (key == "n" || key == "n_linear" || key == "n_nonlinear")
            require(param<int>(c, key) >= 2, "BAD_PARAM", "parameter '" + key + "' must be at least 2");
        if (key == "k") require(param<int>(c, key) >= 1, "BAD_PARAM", "parameter 'k' must be at least 1");
        if (key == "kci_features_xy") require(param<int>(c, key) >= 1, "BAD_PARAM", "parameter 'kci_features_xy' must be at least 1");
        if (key == "alpha") {
            const double a = param<double>(c, key);
            require(a > 0.0 && a < 1.0, "BAD_PARAM", "parameter 'alpha' must lie in (0, 1)");
        }
        if (key == "ks" || key == "ks_linear" || key == "ks_nonlinear") require_ks(c, key);
        if (key == "normalization") NormalizationSpec::parse(param<std::string>(c, key));
        if (key == "linear_test" || key == "nonlinear_test" || key == "test") parse_ci_test(param<std::string>(c, key));
    }
    if (c.name == "discovery_4var") require_subset(c, "settings", {"linear", "nonlinear"});
    if (c.name == "fcm_vs_k") require_subset(c, "models", {"linear", "nonlinear"});
    if (c.name == "ci_tables") {
        require_subset(c, "structures", {"chain", "fork", "collider"});
        require_subset(c, "combinations", {"linear+linear", "nonlinear+linear", "linear+nonlinear", "nonlinear+nonlinear"});
    }
    if (c.name == "k_effect") {
        require_subset(c, "models", {"var", "aligned"});
        require(param<int>(c, "burn_in") >= 0, "BAD_PARAM", "parameter 'burn_in' must be nonnegative");
    }
    if (c.name == "pc_prior") require_subset(c, "data", {"disaggregated", "aggregated"});
    if (c.name == "variance_scaling") {
        require_subset(c, "settings", {"N_X", "N_Z"});
        require(param<int>(c, "repeats") >= 1, "BAD_PARAM", "parameter 'repeats' must be at least 1");
        require(param<double>(c, "inflated_variance") > 0.0, "BAD_PARAM", "parameter 'inflated_variance' must be positive");
    }
}

double Metric::half_width() const {
    if (reps <= 0) return 0.0;
    const double p = rate();
    return 1.96 * std::sqrt(p * (1.0 - p) / reps);
}

const Metric& CellResult::metric(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m;
    throw SpecError("UNKNOWN_METRIC", "cell has no metric '" + name + "'");
}

double CellResult::mean(const std::string& name) const {
    for (const auto& [k, v] : means)
        if (k == name) return v;
    throw SpecError("UNKNOWN_METRIC", "cell has no mean '" + name + "'");
}

std::string CellResult::id_value(const std::string& key) const {
    for (const auto& [k, v] : id)
        if (k == key) return v;
    return {};
}

const CellResult& ExperimentReport::cell(const std::string& table,
                                         const std::vector<std::pair<std::string, std::string>>& id) const {
    for (const auto& c : cells) {
        if (c.table != table) continue;
        if (std::all_of(id.begin(), id.end(), [&](const auto& kv) { return c.id_value(kv.first) == kv.second; }))
            return c;
    }
    throw SpecError("UNKNOWN_CELL", "no cell in table " + table);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& opts) {
    validate_config(config);
    const auto start = std::chrono::steady_clock::now();
    const std::vector<CellPlan> plans = plan_cells(config);

    std::vector<std::pair<int, int>> jobs;
    std::vector<std::vector<JobResult>> results(plans.size());
    std::vector<std::vector<std::uint64_t>> seeds(plans.size());
    for (std::size_t p = 0; p < plans.size(); ++p) {
        results[p].resize(plans[p].reps);
        const std::uint64_t cell_seed = derive_seed(config.seed, name_key(cell_key(plans[p])));
        for (int r = 0; r < plans[p].reps; ++r) {
            seeds[p].push_back(derive_seed(cell_seed, static_cast<std::uint64_t>(r)));
            jobs.emplace_back(static_cast<int>(p), r);
        }
    }

    parallel_for(static_cast<int>(jobs.size()), opts.parallel, [&](int j) {
        const auto [p, r] = jobs[j];
        JobResult& out = results[p][r];
        try {
            out.outcome = plans[p].run(seeds[p][r]);
            out.ok = true;
        } catch (const Error& e) {
            out.code = e.code();
            out.message = e.what();
        } catch (const std::exception& e) {
            out.code = "INTERNAL";
            out.message = e.what();
        }
    });

    ExperimentReport report;
    report.config = config;
    for (std::size_t p = 0; p < plans.size(); ++p) {
        const CellPlan& plan = plans[p];
        CellResult cell;
        cell.table = plan.table;
        cell.id = plan.id;
        cell.reps = plan.reps;
        cell.seeds = seeds[p];
        for (int r = 0; r < plan.reps; ++r) {
            if (!results[p][r].ok) {
                cell.aborted = true;
                cell.error_rep = r;
                cell.error_seed = seeds[p][r];
                cell.error_code = results[p][r].code;
                cell.error_message = results[p][r].message;
                break;
            }
        }
        if (!cell.aborted) {
            for (std::size_t m = 0; m < plan.metrics.size(); ++m) {
                Metric metric{plan.metrics[m], 0, plan.reps};
                for (int r = 0; r < plan.reps; ++r) metric.count += results[p][r].outcome.hits[m] ? 1 : 0;
                cell.metrics.push_back(metric);
            }
            for (std::size_t m = 0; m < plan.means.size(); ++m) {
                double sum = 0.0;
                for (int r = 0; r < plan.reps; ++r) sum += results[p][r].outcome.values[m];
                cell.means.emplace_back(plan.means[m], sum / plan.reps);
            }
            if (plan.group_size > 0) {
                std::vector<double> rates;
                for (int g = 0; g * plan.group_size < plan.reps; ++g) {
                    int hits = 0;
                    for (int r = g * plan.group_size; r < (g + 1) * plan.group_size; ++r) hits += results[p][r].outcome.hits[0];
                    rates.push_back(static_cast<double>(hits) / plan.group_size);
                }
                double mean = 0.0, var = 0.0;
                for (double v : rates) mean += v / rates.size();
                for (double v : rates) var += (v - mean) * (v - mean);
                const double sd = rates.size() > 1 ? std::sqrt(var / (rates.size() - 1)) : 0.0;
                cell.extra = {{"group_rates", rates}, {"group_size", plan.group_size}, {"group_sd", sd}};
            }
        }
        report.cells.push_back(std::move(cell));
    }
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

json to_json(const ExperimentReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        json id = json::object();
        for (const auto& [k, v] : c.id) id[k] = v;
        json cell = {{"table", c.table}, {"id", id}, {"reps", c.reps}, {"seeds", c.seeds},
                     {"status", c.aborted ? "aborted" : "ok"}};
        if (c.aborted) {
            cell["error"] = {{"rep", c.error_rep}, {"seed", c.error_seed}, {"code", c.error_code}, {"message", c.error_message}};
        } else {
            json metrics = json::object();
            for (const auto& m : c.metrics)
                metrics[m.name] = {{"count", m.count}, {"rate", m.rate()}, {"half_width", m.half_width()}};
            cell["metrics"] = metrics;
            json means = json::object();
            for (const auto& [k, v] : c.means) means[k] = v;
            cell["means"] = means;
            if (!c.extra.empty()) cell["extra"] = c.extra;
        }
        cells.push_back(cell);
    }
    return {{"config", to_json(r.config)}, {"cells", cells}};
}

std::vector<ManifestEntry> write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("IO_ERROR", "cannot create " + dir.string() + ": " + ec.message());

    std::vector<ManifestEntry> manifest;
    const auto emit = [&](const std::string& name, const std::string& bytes, std::vector<std::string> columns) {
        write_file(dir / name, bytes);
        manifest.push_back({name, sha256_hex(bytes), std::move(columns)});
    };
    emit("report.json", to_json(report).dump(2) + "\n", {});

    // Tables in first-appearance order.
    std::vector<std::string> tables;
    for (const auto& c : report.cells)
        if (std::find(tables.begin(), tables.end(), c.table) == tables.end()) tables.push_back(c.table);
    for (const auto& table : tables) {
        std::vector<const CellResult*> rows;
        for (const auto& c : report.cells)
            if (c.table == table) rows.push_back(&c);
        const CellResult& first = *rows.front();
        std::vector<std::string> id_cols, metric_names, mean_names;
        for (const auto& [k, _] : first.id) id_cols.push_back(k);
        for (const auto* c : rows) {
            for (const auto& m : c->metrics)
                if (std::find(metric_names.begin(), metric_names.end(), m.name) == metric_names.end()) metric_names.push_back(m.name);
            for (const auto& [k, _] : c->means)
                if (std::find(mean_names.begin(), mean_names.end(), k) == mean_names.end()) mean_names.push_back(k);
        }
        std::vector<std::string> columns = id_cols;
        for (const auto& m : metric_names) {
            columns.push_back(m);
            columns.push_back(m + "_half_width");
        }
        columns.insert(columns.end(), mean_names.begin(), mean_names.end());
        columns.push_back("reps");
        columns.push_back("status");

        std::ostringstream out;
        for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << csv_field(columns[i]);
        out << '\n';
        for (const auto* c : rows) {
            std::vector<std::string> fields;
            for (const auto& k : id_cols) fields.push_back(c->id_value(k));
            for (const auto& m : metric_names) {
                const auto it = std::find_if(c->metrics.begin(), c->metrics.end(), [&](const Metric& x) { return x.name == m; });
                if (it == c->metrics.end()) {
                    fields.insert(fields.end(), {"", ""});
                } else {
                    fields.push_back(format_double(it->rate()));
                    fields.push_back(format_double(it->half_width()));
                }
            }
            for (const auto& name : mean_names) {
                const auto it = std::find_if(c->means.begin(), c->means.end(), [&](const auto& kv) { return kv.first == name; });
                fields.push_back(it == c->means.end() ? "" : format_double(it->second));
            }
            fields.push_back(std::to_string(c->reps));
            fields.push_back(c->aborted ? "aborted:" + c->error_code : "ok");
            for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
            out << '\n';
        }
        emit(table + ".csv", out.str(), columns);
    }

    json files = json::array();
    for (const auto& e : manifest) files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"columns", e.columns}});
    const json m = {{"experiment", report.config.name}, {"seed", report.config.seed}, {"files", files}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    return manifest;
}

}  // namespace aggcausal
