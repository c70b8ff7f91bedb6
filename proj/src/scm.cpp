#include "aggcausal/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "aggcausal/error.hpp"
#include "aggcausal/io.hpp"

namespace aggcausal {

double NoiseSpec::sample(Rng& rng) const {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                std::normal_distribution<double> d(n.mean, std::sqrt(n.variance));
                return d(rng);
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                std::uniform_real_distribution<double> d(n.lo, n.hi);
                return d(rng);
            } else {
                std::discrete_distribution<std::size_t> d(n.probs.begin(), n.probs.end());
                return n.support[d(rng)];
            }
        },
        kind);
}

double BasicFunction::operator()(double x) const {
    switch (tag) {
        case FunctionTag::identity: return x;
        case FunctionTag::square: return x * x;
        case FunctionTag::cube: return x * x * x;
        case FunctionTag::tanh: return std::tanh(x);
        case FunctionTag::scale: return c * x;
    }
    return x;
}

std::string BasicFunction::name() const {
    switch (tag) {
        case FunctionTag::identity: return "identity";
        case FunctionTag::square: return "square";
        case FunctionTag::cube: return "cube";
        case FunctionTag::tanh: return "tanh";
        case FunctionTag::scale: return "scale";
    }
    return "identity";
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_noise(const NoiseSpec& noise, const std::string& field) {
    std::vector<Violation> out;
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (!std::isfinite(n.mean) || !std::isfinite(n.variance))
                    out.push_back({field, "non-finite", "gaussian parameters must be finite"});
                else if (n.variance <= 0.0)
                    out.push_back({field, "zero variance", "gaussian variance must be positive"});
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                if (!std::isfinite(n.lo) || !std::isfinite(n.hi))
                    out.push_back({field, "non-finite", "uniform bounds must be finite"});
                else if (!(n.hi > n.lo))
                    out.push_back({field, "zero variance", "uniform requires hi > lo"});
            } else {
                if (n.support.empty()) {
                    out.push_back({field, "empty support", "discrete support is empty"});
                    return;
                }
                if (n.support.size() != n.probs.size()) {
                    out.push_back({field, "bad probs", "support and probs differ in length"});
                    return;
                }
                double total = 0.0;
                for (double p : n.probs) {
                    if (!(p >= 0.0) || !std::isfinite(p)) {
                        out.push_back({field, "bad probs", "probabilities must be nonnegative"});
                        return;
                    }
                    total += p;
                }
                if (std::abs(total - 1.0) > 1e-12)
                    out.push_back({field, "bad probs", "probabilities must sum to 1"});
                for (double v : n.support)
                    if (!std::isfinite(v)) out.push_back({field, "non-finite", "support values must be finite"});
                // A point mass has zero variance.
                double mean = 0.0, second = 0.0;
                for (std::size_t i = 0; i < n.support.size(); ++i) {
                    mean += n.probs[i] * n.support[i];
                    second += n.probs[i] * n.support[i] * n.support[i];
                }
                if (second - mean * mean <= 1e-15)
                    out.push_back({field, "zero variance", "discrete noise is a point mass"});
            }
        },
        noise.kind);
    return out;
}

namespace {

void validate_function(const BasicFunction& f, const std::string& field, std::vector<Violation>& out) {
    if (f.tag == FunctionTag::scale && !std::isfinite(f.c))
        out.push_back({field, "non-finite", "scale coefficient must be finite"});
}

}  // namespace

std::vector<Violation> validate_spec(const AlignedModelSpec& spec) {
    std::vector<Violation> out;
    const std::set<std::string> vars(spec.variables.begin(), spec.variables.end());
    if (vars.size() != spec.variables.size())
        out.push_back({"variables", "duplicate variable", "variable names must be unique"});
    if (spec.variables.empty()) out.push_back({"variables", "empty", "at least one variable required"});

    const Dag& dag = spec.instantaneous_dag;
    const std::set<std::string> dag_nodes(dag.nodes.begin(), dag.nodes.end());
    if (dag_nodes != vars)
        out.push_back({"instantaneous_dag", "node mismatch", "DAG nodes must equal the variables"});
    for (const auto& [a, b] : dag.edges) {
        if (a < 0 || b < 0 || a >= dag.size() || b >= dag.size()) {
            out.push_back({"instantaneous_dag", "bad edge", "edge endpoint out of range"});
            return out;
        }
    }
    if (!dag.is_acyclic()) out.push_back({"instantaneous_dag", "cycle", "instantaneous DAG has a cycle"});

    for (const auto& v : spec.variables) {
        const std::string field = "mechanisms." + v;
        auto it = spec.mechanisms.find(v);
        if (it == spec.mechanisms.end()) {
            out.push_back({field, "missing mechanism", "no mechanism for variable " + v});
            continue;
        }
        const MechanismSpec& m = it->second;
        std::set<std::string> declared;
        for (const auto& [p, f] : m.inner) {
            declared.insert(p);
            if (!vars.count(p)) out.push_back({field + ".inner." + p, "unknown variable", "parent " + p + " does not exist"});
            validate_function(f, field + ".inner." + p, out);
        }
        validate_function(m.outer, field + ".outer", out);
        std::set<std::string> dag_parents;
        const int vi = dag.index_of(v);
        if (vi >= 0)
            for (int p : dag.parents(vi)) dag_parents.insert(dag.nodes[p]);
        if (vi >= 0 && dag_parents != declared)
            out.push_back({field + ".inner", "parent mismatch", "mechanism parents differ from DAG parents of " + v});
        for (auto& viol : validate_noise(m.noise, field + ".noise")) out.push_back(std::move(viol));
    }
    for (const auto& [name, _] : spec.mechanisms)
        if (!vars.count(name)) out.push_back({"mechanisms." + name, "unknown variable", "mechanism for unknown variable"});

    for (const auto& [v, lag] : spec.self_lag) {
        const std::string field = "self_lag." + v;
        if (!vars.count(v)) {
            out.push_back({field, "unknown variable", "self lag for unknown variable"});
            continue;
        }
        validate_function(lag.function, field + ".function", out);
        if (!std::isfinite(lag.coefficient)) out.push_back({field, "non-finite", "coefficient must be finite"});
        auto mit = spec.mechanisms.find(v);
        if (mit != spec.mechanisms.end() && mit->second.noise.is_gaussian() && mit->second.outer.is_linear() &&
            lag.function.is_linear()) {
            const double eff = lag.coefficient * lag.function.slope() * mit->second.outer.slope();
            if (std::abs(eff) >= 1.0)
                out.push_back({field, "unstable self lag", "linear-Gaussian self lag requires |beta| < 1"});
        }
    }
    for (const auto& [v, noise] : spec.initial) {
        if (!vars.count(v)) {
            out.push_back({"initial." + v, "unknown variable", "initial distribution for unknown variable"});
            continue;
        }
        for (auto& viol : validate_noise(noise, "initial." + v)) out.push_back(std::move(viol));
    }
    return out;
}

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

std::vector<Violation> validate_spec(const VarModelSpec& spec) {
    std::vector<Violation> out;
    if (spec.dimension < 1) out.push_back({"dimension", "dimension", "dimension must be positive"});
    if (spec.B.rows() != spec.dimension || spec.B.cols() != spec.dimension) {
        out.push_back({"B", "dimension", "B must be dimension x dimension"});
        return out;
    }
    if (!spec.B.allFinite()) {
        out.push_back({"B", "non-finite", "B entries must be finite"});
        return out;
    }
    if (spectral_norm(spec.B) >= 1.0) out.push_back({"B", "spectral norm", "spectral norm of B must be < 1"});
    if (static_cast<int>(spec.noise.size()) != spec.dimension)
        out.push_back({"noise", "dimension", "one noise spec per component required"});
    for (std::size_t i = 0; i < spec.noise.size(); ++i)
        for (auto& viol : validate_noise(spec.noise[i], "noise[" + std::to_string(i) + "]")) out.push_back(std::move(viol));
    if (spec.burn_in < 0) out.push_back({"burn_in", "negative", "burn_in must be nonnegative"});
    if (!spec.variables.empty() && static_cast<int>(spec.variables.size()) != spec.dimension)
        out.push_back({"variables", "dimension", "variable names must match dimension"});
    return out;
}

namespace {

std::string violation_code(const Violation& v) {
    std::string code = "SPEC_";
    for (char c : v.code) code.push_back(c == ' ' || c == '-' ? '_' : static_cast<char>(std::toupper(c)));
    return code;
}

void throw_if(const std::vector<Violation>& viols) {
    if (viols.empty()) return;
    std::ostringstream os;
    for (std::size_t i = 0; i < viols.size(); ++i) {
        if (i) os << "; ";
        os << viols[i].field << ": " << viols[i].message;
    }
    throw SpecError(violation_code(viols.front()), os.str());
}

}  // namespace

void require_valid(const AlignedModelSpec& spec) { throw_if(validate_spec(spec)); }
void require_valid(const VarModelSpec& spec) { throw_if(validate_spec(spec)); }

// ---------------------------------------------------------------------------
// Panel

Panel::Panel(int n, int k, std::vector<std::string> names)
    : n_(n), k_(k), names_(std::move(names)), data_(static_cast<std::size_t>(n) * k * names_.size(), 0.0) {}

int Panel::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

void Panel::check_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            const std::size_t v = i % names_.size();
            const std::size_t t = (i / names_.size()) % k_;
            throw NumericalError("NON_FINITE", "panel entry at step " + std::to_string(t + 1) + " variable " +
                                                   names_[v] + " is not finite");
        }
    }
}

Panel simulate_aligned(const AlignedModelSpec& spec, int k, int n, std::uint64_t seed) {
    require_valid(spec);
    if (k < 1 || n < 1) throw SpecError("BAD_ARGUMENT", "simulate_aligned requires k >= 1 and n >= 1");

    const int s = static_cast<int>(spec.variables.size());
    const Dag& dag = spec.instantaneous_dag;
    // Map DAG indices onto the panel's variable order.
    std::vector<int> dag_to_var(dag.size());
    for (int i = 0; i < dag.size(); ++i) {
        dag_to_var[i] = static_cast<int>(
            std::find(spec.variables.begin(), spec.variables.end(), dag.nodes[i]) - spec.variables.begin());
    }
    const std::vector<int> topo = *dag.topological_order();
    std::vector<int> order;
    for (int i : topo) order.push_back(dag_to_var[i]);

    struct Term {
        int parent;
        BasicFunction f;
    };
    struct Plan {
        std::vector<Term> terms;
        const MechanismSpec* mech = nullptr;
        const SelfLag* lag = nullptr;
        const NoiseSpec* initial = nullptr;
        std::uint64_t key = 0;
    };
    std::vector<Plan> plans(s);
    for (int v = 0; v < s; ++v) {
        const std::string& name = spec.variables[v];
        Plan& p = plans[v];
        p.mech = &spec.mechanisms.at(name);
        for (const auto& [parent, f] : p.mech->inner) {
            const int pi = static_cast<int>(std::find(spec.variables.begin(), spec.variables.end(), parent) -
                                            spec.variables.begin());
            p.terms.push_back({pi, f});
        }
        if (auto it = spec.self_lag.find(name); it != spec.self_lag.end()) p.lag = &it->second;
        if (auto it = spec.initial.find(name); it != spec.initial.end()) p.initial = &it->second;
        p.key = name_key(name);
    }

    Panel panel(n, k, spec.variables);
    panel.provenance = {spec_hash(spec), seed};
    std::vector<Rng> streams(s);
    std::vector<double> previous(s);
    for (int r = 0; r < n; ++r) {
        for (int v = 0; v < s; ++v) {
            streams[v] = make_stream(seed, static_cast<std::uint64_t>(r), plans[v].key);
            previous[v] = plans[v].initial ? plans[v].initial->sample(streams[v]) : 0.0;
        }
        for (int t = 0; t < k; ++t) {
            for (int v : order) {
                const Plan& p = plans[v];
                double acc = 0.0;
                for (const auto& term : p.terms) acc += term.f(panel.at(r, t, term.parent));
                if (p.lag) acc += p.lag->coefficient * p.lag->function(previous[v]);
                acc += p.mech->noise.sample(streams[v]);
                const double value = p.mech->outer(acc);
                if (!std::isfinite(value)) {
                    throw NumericalError("NON_FINITE", "non-finite value at step " + std::to_string(t + 1) +
                                                           " for variable " + spec.variables[v]);
                }
                panel.at(r, t, v) = value;
            }
            for (int v = 0; v < s; ++v) previous[v] = panel.at(r, t, v);
        }
    }
    return panel;
}

Eigen::MatrixXd simulate_var(const VarModelSpec& spec, int T, std::uint64_t seed) {
    require_valid(spec);
    if (T < 1) throw SpecError("BAD_ARGUMENT", "simulate_var requires T >= 1");
    const int s = spec.dimension;
    std::vector<Rng> streams;
    for (int i = 0; i < s; ++i) streams.push_back(make_stream(seed, static_cast<std::uint64_t>(i)));
    auto draw = [&] {
        Eigen::VectorXd v(s);
        for (int i = 0; i < s; ++i) v(i) = spec.noise[i].sample(streams[i]);
        return v;
    };
    Eigen::MatrixXd out(T, s);
    Eigen::VectorXd x = draw();
    const int total = spec.burn_in + T;
    for (int step = 0; step < total; ++step) {
        if (step > 0) x = spec.B * x + draw();
        if (step >= spec.burn_in) out.row(step - spec.burn_in) = x.transpose();
    }
    if (!out.allFinite()) throw NumericalError("NON_FINITE", "VAR simulation produced a non-finite value");
    return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const NoiseSpec& noise) {
    return std::visit(
        [](const auto& n) -> nlohmann::json {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GaussianNoise>)
                return {{"kind", "gaussian"}, {"mean", n.mean}, {"variance", n.variance}};
            else if constexpr (std::is_same_v<T, UniformNoise>)
                return {{"kind", "uniform"}, {"lo", n.lo}, {"hi", n.hi}};
            else
                return {{"kind", "discrete"}, {"support", n.support}, {"probs", n.probs}};
        },
        noise.kind);
}

nlohmann::json to_json(const BasicFunction& f) {
    nlohmann::json j{{"tag", f.name()}};
    if (f.tag == FunctionTag::scale) j["c"] = f.c;
    return j;
}

nlohmann::json to_json(const AlignedModelSpec& spec) {
    nlohmann::json j;
    j["type"] = "aligned";
    j["variables"] = spec.variables;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : spec.instantaneous_dag.edges)
        edges.push_back({spec.instantaneous_dag.nodes[a], spec.instantaneous_dag.nodes[b]});
    j["instantaneous_dag"] = {{"nodes", spec.instantaneous_dag.nodes}, {"edges", edges}};
    nlohmann::json mechs = nlohmann::json::object();
    for (const auto& [v, m] : spec.mechanisms) {
        nlohmann::json inner = nlohmann::json::object();
        for (const auto& [p, f] : m.inner) inner[p] = to_json(f);
        mechs[v] = {{"inner", inner}, {"outer", to_json(m.outer)}, {"noise", to_json(m.noise)}};
    }
    j["mechanisms"] = mechs;
    nlohmann::json lags = nlohmann::json::object();
    for (const auto& [v, lag] : spec.self_lag)
        lags[v] = {{"function", to_json(lag.function)}, {"coefficient", lag.coefficient}};
    j["self_lag"] = lags;
    nlohmann::json init = nlohmann::json::object();
    for (const auto& [v, n] : spec.initial) init[v] = to_json(n);
    j["initial"] = init;
    return j;
}

nlohmann::json to_json(const VarModelSpec& spec) {
    nlohmann::json j;
    j["type"] = "var";
    j["dimension"] = spec.dimension;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < spec.B.rows(); ++r) {
        std::vector<double> row(spec.B.cols());
        for (int c = 0; c < spec.B.cols(); ++c) row[c] = spec.B(r, c);
        rows.push_back(row);
    }
    j["B"] = rows;
    j["noise"] = nlohmann::json::array();
    for (const auto& n : spec.noise) j["noise"].push_back(to_json(n));
    j["burn_in"] = spec.burn_in;
    j["variables"] = spec.variables;
    return j;
}

NoiseSpec noise_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind");
        if (kind == "gaussian") return NoiseSpec::gaussian(j.value("mean", 0.0), j.at("variance").get<double>());
        if (kind == "uniform") return NoiseSpec::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
        if (kind == "discrete")
            return NoiseSpec::discrete(j.at("support").get<std::vector<double>>(), j.at("probs").get<std::vector<double>>());
        throw SpecError("SPEC_BAD_NOISE", "unknown noise kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("SPEC_BAD_NOISE", std::string("malformed noise spec: ") + e.what());
    }
}

BasicFunction function_from_json(const nlohmann::json& j) {
    const std::string tag = j.is_string() ? j.get<std::string>() : j.at("tag").get<std::string>();
    if (tag == "identity") return BasicFunction::identity();
    if (tag == "square") return BasicFunction::square();
    if (tag == "cube") return BasicFunction::cube();
    if (tag == "tanh") return BasicFunction::tanh();
    if (tag == "scale") {
        if (!j.is_object() || !j.contains("c")) throw SpecError("SPEC_BAD_FUNCTION", "scale requires coefficient c");
        return BasicFunction::scale(j.at("c").get<double>());
    }
    throw SpecError("SPEC_BAD_FUNCTION", "unknown function tag '" + tag + "'");
}

AlignedModelSpec aligned_from_json(const nlohmann::json& j) {
    try {
        AlignedModelSpec spec;
        spec.variables = j.at("variables").get<std::vector<std::string>>();
        const auto& dj = j.contains("instantaneous_dag") ? j.at("instantaneous_dag") : nlohmann::json::object();
        spec.instantaneous_dag.nodes =
            dj.contains("nodes") ? dj.at("nodes").get<std::vector<std::string>>() : spec.variables;
        if (dj.contains("edges")) {
            for (const auto& e : dj.at("edges")) {
                const int a = spec.instantaneous_dag.index_of(e.at(0).get<std::string>());
                const int b = spec.instantaneous_dag.index_of(e.at(1).get<std::string>());
                if (a < 0 || b < 0) throw SpecError("SPEC_UNKNOWN_VARIABLE", "DAG edge references an unknown variable");
                spec.instantaneous_dag.edges.insert({a, b});
            }
        }
        for (const auto& [v, mj] : j.at("mechanisms").items()) {
            MechanismSpec m;
            if (mj.contains("inner"))
                for (const auto& [p, fj] : mj.at("inner").items()) m.inner[p] = function_from_json(fj);
            if (mj.contains("outer")) m.outer = function_from_json(mj.at("outer"));
            if (mj.contains("noise")) m.noise = noise_from_json(mj.at("noise"));
            spec.mechanisms[v] = m;
        }
        if (j.contains("self_lag")) {
            for (const auto& [v, lj] : j.at("self_lag").items()) {
                SelfLag lag;
                if (lj.contains("function")) lag.function = function_from_json(lj.at("function"));
                lag.coefficient = lj.at("coefficient").get<double>();
                spec.self_lag[v] = lag;
            }
        }
        if (j.contains("initial"))
            for (const auto& [v, nj] : j.at("initial").items()) spec.initial[v] = noise_from_json(nj);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("SPEC_MALFORMED", std::string("malformed aligned model spec: ") + e.what());
    }
}

VarModelSpec var_from_json(const nlohmann::json& j) {
    try {
        VarModelSpec spec;
        const auto rows = j.at("B").get<std::vector<std::vector<double>>>();
        spec.dimension = j.value("dimension", static_cast<int>(rows.size()));
        spec.B = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != static_cast<std::size_t>(spec.B.cols()))
                throw SpecError("SPEC_DIMENSION", "B rows differ in length");
            for (std::size_t c = 0; c < rows[r].size(); ++c) spec.B(r, c) = rows[r][c];
        }
        const auto& nj = j.at("noise");
        if (nj.is_array()) {
            for (const auto& n : nj) spec.noise.push_back(noise_from_json(n));
        } else {
            spec.noise.assign(spec.dimension, noise_from_json(nj));
        }
        spec.burn_in = j.value("burn_in", 0);
        if (j.contains("variables")) spec.variables = j.at("variables").get<std::vector<std::string>>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("SPEC_MALFORMED", std::string("malformed VAR spec: ") + e.what());
    }
}

ModelSpec model_from_json(const nlohmann::json& j) {
    if (j.value("type", std::string("aligned")) == "var") return var_from_json(j);
    return aligned_from_json(j);
}

std::string spec_hash(const AlignedModelSpec& spec) { return sha256_hex(to_json(spec).dump()); }
std::string spec_hash(const VarModelSpec& spec) { return sha256_hex(to_json(spec).dump()); }

std::string panel_to_csv(const Panel& panel) {
    std::ostringstream os;
    os << "rep,t";
    for (const auto& name : panel.names()) os << ',' << name;
    os << '\n';
    for (int r = 0; r < panel.n(); ++r) {
        for (int t = 0; t < panel.k(); ++t) {
            os << (r + 1) << ',' << (t + 1);
            for (int v = 0; v < panel.s(); ++v) os << ',' << format_double(panel.at(r, t, v));
            os << '\n';
        }
    }
    return os.str();
}

Panel panel_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SpecError("BAD_CSV", "empty panel CSV");
    auto header = split(trim(line), ',');
    if (header.size() < 3 || header[0] != "rep" || header[1] != "t")
        throw SpecError("BAD_CSV", "panel CSV header must start with rep,t");
    std::vector<std::string> names(header.begin() + 2, header.end());
    struct Row {
        int rep, t;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    int max_rep = 0, max_t = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != header.size()) throw SpecError("BAD_CSV", "row has wrong number of columns");
        Row row{std::stoi(cells[0]), std::stoi(cells[1]), {}};
        for (std::size_t c = 2; c < cells.size(); ++c) row.values.push_back(std::stod(cells[c]));
        max_rep = std::max(max_rep, row.rep);
        max_t = std::max(max_t, row.t);
        rows.push_back(std::move(row));
    }
    if (rows.size() != static_cast<std::size_t>(max_rep) * max_t)
        throw SpecError("BAD_CSV", "panel CSV is not a complete rep x t grid");
    Panel panel(max_rep, max_t, names);
    for (const auto& row : rows) {
        if (row.rep < 1 || row.t < 1) throw SpecError("BAD_CSV", "rep and t are 1-based");
        for (std::size_t v = 0; v < names.size(); ++v) panel.at(row.rep - 1, row.t - 1, static_cast<int>(v)) = row.values[v];
    }
    panel.check_finite();
    return panel;
}

// ---------------------------------------------------------------------------
// Model library

namespace models {

MechanismSpec root(NoiseSpec noise) {
    MechanismSpec m;
    m.noise = std::move(noise);
    return m;
}

MechanismSpec linear(const std::map<std::string, double>& coefs, NoiseSpec noise) {
    MechanismSpec m;
    for (const auto& [p, c] : coefs) m.inner[p] = c == 1.0 ? BasicFunction::identity() : BasicFunction::scale(c);
    m.noise = std::move(noise);
    return m;
}

AlignedModelSpec make_aligned(std::vector<std::string> variables, std::map<std::string, MechanismSpec> mechanisms) {
    AlignedModelSpec spec;
    spec.variables = variables;
    spec.instantaneous_dag.nodes = variables;
    for (const auto& [child, m] : mechanisms) {
        const int c = spec.instantaneous_dag.index_of(child);
        for (const auto& [parent, _] : m.inner) {
            const int p = spec.instantaneous_dag.index_of(parent);
            if (p >= 0 && c >= 0) spec.instantaneous_dag.edges.insert({p, c});
        }
    }
    spec.mechanisms = std::move(mechanisms);
    return spec;
}

AlignedModelSpec bivariate_linear(double slope, NoiseSpec nx, NoiseSpec ny) {
    return make_aligned({"X", "Y"}, {{"X", root(std::move(nx))}, {"Y", linear({{"X", slope}}, std::move(ny))}});
}

AlignedModelSpec bivariate_additive(BasicFunction f, NoiseSpec nx, NoiseSpec ny) {
    MechanismSpec my;
    my.inner["X"] = f;
    my.noise = std::move(ny);
    return make_aligned({"X", "Y"}, {{"X", root(std::move(nx))}, {"Y", my}});
}

AlignedModelSpec fork(MechanismSpec x_from_y, MechanismSpec z_from_y, NoiseSpec ny) {
    return make_aligned({"X", "Y", "Z"}, {{"X", std::move(x_from_y)}, {"Y", root(std::move(ny))}, {"Z", std::move(z_from_y)}});
}

AlignedModelSpec chain(MechanismSpec y_from_x, MechanismSpec z_from_y, NoiseSpec nx) {
    return make_aligned({"X", "Y", "Z"}, {{"X", root(std::move(nx))}, {"Y", std::move(y_from_x)}, {"Z", std::move(z_from_y)}});
}

AlignedModelSpec collider(MechanismSpec y_from_xz, NoiseSpec nx, NoiseSpec nz) {
    return make_aligned({"X", "Y", "Z"}, {{"X", root(std::move(nx))}, {"Y", std::move(y_from_xz)}, {"Z", root(std::move(nz))}});
}

AlignedModelSpec four_variable(bool nonlinear, double var_nx, double var_nz) {
    const BasicFunction f = nonlinear ? BasicFunction::square() : BasicFunction::identity();
    MechanismSpec z;
    z.inner = {{"X", f}, {"Y", f}};
    z.noise = NoiseSpec::gaussian(0.0, var_nz);
    MechanismSpec h;
    h.inner = {{"Z", f}};
    h.noise = NoiseSpec::gaussian(0.0, 1.0);
    return make_aligned({"X", "Y", "Z", "H"}, {{"X", root(NoiseSpec::gaussian(0.0, var_nx))},
                                               {"Y", root(NoiseSpec::gaussian(0.0, 1.0))},
                                               {"Z", z},
                                               {"H", h}});
}

}  // namespace models

}  // namespace aggcausal
