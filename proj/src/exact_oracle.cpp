#include "aggcausal/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "aggcausal/error.hpp"
#include "aggcausal/io.hpp"

namespace aggcausal {

namespace {

using Key = std::vector<std::int64_t>;
using Dist = std::map<Key, double>;

constexpr double kCiTolerance = 1e-10;

struct Atom {
    std::vector<int> columns;
    bool sum = false;
};

int variable_index(const JointTable& joint, const std::string& name, const std::string& term) {
    auto it = std::find(joint.variables.begin(), joint.variables.end(), name);
    if (it == joint.variables.end()) throw SpecError("UNKNOWN_TERM", "unknown variable in term '" + term + "'");
    return static_cast<int>(it - joint.variables.begin());
}

int parse_step(const std::string& s, int k, const std::string& term) {
    if (s == "k") return k;
    try {
        std::size_t used = 0;
        const int t = std::stoi(s, &used);
        if (used == s.size() && t >= 1 && t <= k) return t;
    } catch (const std::exception&) {
    }
    throw SpecError("UNKNOWN_TERM", "bad step in term '" + term + "'");
}

Atom parse_term(const JointTable& joint, const std::string& term) {
    Atom atom;
    const int k = joint.k;
    if (term.rfind("S_", 0) == 0) {
        const int v = variable_index(joint, term.substr(2), term);
        for (int t = 0; t < k; ++t) atom.columns.push_back(v * k + t);
        atom.sum = true;
        return atom;
    }
    const auto us = term.rfind('_');
    if (us == std::string::npos) throw SpecError("UNKNOWN_TERM", "cannot parse term '" + term + "'");
    const int v = variable_index(joint, term.substr(0, us), term);
    const std::string steps = term.substr(us + 1);
    const auto colon = steps.find(':');
    int lo = 0, hi = 0;
    if (colon == std::string::npos) {
        lo = hi = parse_step(steps, k, term);
    } else {
        lo = parse_step(steps.substr(0, colon), k, term);
        hi = parse_step(steps.substr(colon + 1), k, term);
        if (lo > hi) throw SpecError("UNKNOWN_TERM", "empty step range in term '" + term + "'");
    }
    for (int t = lo; t <= hi; ++t) atom.columns.push_back(v * k + t - 1);
    return atom;
}

void project(const Key& row, const std::vector<Atom>& atoms, Key& out) {
    out.clear();
    for (const Atom& a : atoms) {
        if (a.sum) {
            std::int64_t s = 0;
            for (int c : a.columns) s += row[c];
            out.push_back(s);
        } else {
            for (int c : a.columns) out.push_back(row[c]);
        }
    }
}

std::vector<Atom> parse_terms(const JointTable& joint, const TermList& terms) {
    std::vector<Atom> atoms;
    for (const auto& t : terms) atoms.push_back(parse_term(joint, t));
    return atoms;
}

const std::vector<double>& discrete_support(const NoiseSpec& n) { return std::get<DiscreteNoise>(n.kind).support; }
const std::vector<double>& discrete_probs(const NoiseSpec& n) { return std::get<DiscreteNoise>(n.kind).probs; }

struct State {
    Key values;
    std::vector<double> previous;  // exact previous values, one per variable
    double p = 1.0;
};

Key concat(const Key& a, const Key& b) {
    Key out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

double lookup(const Dist& d, const Key& key) {
    auto it = d.find(key);
    return it == d.end() ? 0.0 : it->second;
}

}  // namespace

std::int64_t lattice_key(double v) { return std::llround(v / kLatticeResolution); }
double lattice_value(std::int64_t key) { return static_cast<double>(key) * kLatticeResolution; }

std::vector<std::string> JointTable::column_names() const {
    std::vector<std::string> out;
    for (const auto& v : variables)
        for (int t = 1; t <= k; ++t) out.push_back(v + "_" + std::to_string(t));
    return out;
}

double JointTable::total() const {
    double s = 0.0;
    for (const auto& [_, p] : probs) s += p;
    return s;
}

double state_space_size(const AlignedModelSpec& spec, int k) {
    double size = 1.0;
    for (const auto& v : spec.variables) {
        auto m = spec.mechanisms.find(v);
        if (m == spec.mechanisms.end() || !m->second.noise.is_discrete()) return HUGE_VAL;
        size *= std::pow(static_cast<double>(discrete_support(m->second.noise).size()), k);
        if (spec.self_lag.count(v)) {
            auto init = spec.initial.find(v);
            if (init != spec.initial.end()) {
                if (!init->second.is_discrete()) return HUGE_VAL;
                size *= static_cast<double>(discrete_support(init->second).size());
            }
        }
    }
    return size;
}

JointTable build_joint_table(const AlignedModelSpec& spec, int k) {
    require_valid(spec);
    if (k < 1) throw SpecError("BAD_K", "k must be positive");
    for (const auto& v : spec.variables) {
        if (!spec.mechanisms.at(v).noise.is_discrete())
            throw SpecError("NON_DISCRETE_NOISE", "noise of " + v + " is not discrete");
        auto init = spec.initial.find(v);
        if (spec.self_lag.count(v) && init != spec.initial.end() && !init->second.is_discrete())
            throw SpecError("NON_DISCRETE_NOISE", "initial value of " + v + " is not discrete");
    }
    const double size = state_space_size(spec, k);
    if (size > kStateSpaceLimit) {
        std::ostringstream msg;
        msg << std::fixed << std::setprecision(0) << "state space of " << size << " assignments exceeds the limit of "
            << kStateSpaceLimit;
        throw SpecError("STATE_SPACE_TOO_LARGE", msg.str());
    }

    const int s = static_cast<int>(spec.variables.size());
    const Dag& dag = spec.instantaneous_dag;
    const std::vector<int> topo = *dag.topological_order();
    // Map dag node index to variable index.
    std::vector<int> var_of(dag.size());
    for (int i = 0; i < dag.size(); ++i) {
        auto it = std::find(spec.variables.begin(), spec.variables.end(), dag.nodes[i]);
        var_of[i] = static_cast<int>(it - spec.variables.begin());
    }

    std::vector<State> states(1);
    states[0].values.assign(static_cast<std::size_t>(s) * k, 0);
    states[0].previous.assign(s, 0.0);
    for (int v = 0; v < s; ++v) {
        const auto& name = spec.variables[v];
        auto init = spec.initial.find(name);
        if (!spec.self_lag.count(name) || init == spec.initial.end()) continue;
        const auto& sup = discrete_support(init->second);
        const auto& pr = discrete_probs(init->second);
        std::vector<State> next;
        for (const State& st : states)
            for (std::size_t j = 0; j < sup.size(); ++j) {
                if (pr[j] <= 0.0) continue;
                State ns = st;
                ns.previous[v] = sup[j];
                ns.p *= pr[j];
                next.push_back(std::move(ns));
            }
        states = std::move(next);
    }

    // Exact current values per state are kept alongside the lattice keys.
    std::vector<std::vector<double>> current(states.size(), std::vector<double>(s, 0.0));
    for (int t = 0; t < k; ++t) {
        for (int node : topo) {
            const int v = var_of[node];
            const auto& name = spec.variables[v];
            const MechanismSpec& mech = spec.mechanisms.at(name);
            auto lag = spec.self_lag.find(name);
            const auto& sup = discrete_support(mech.noise);
            const auto& pr = discrete_probs(mech.noise);
            std::vector<State> next;
            std::vector<std::vector<double>> next_current;
            next.reserve(states.size() * sup.size());
            for (std::size_t i = 0; i < states.size(); ++i) {
                double base = 0.0;
                for (const auto& [parent, f] : mech.inner) {
                    const auto pit = std::find(spec.variables.begin(), spec.variables.end(), parent);
                    base += f(current[i][pit - spec.variables.begin()]);
                }
                if (lag != spec.self_lag.end())
                    base += lag->second.coefficient * lag->second.function(states[i].previous[v]);
                for (std::size_t j = 0; j < sup.size(); ++j) {
                    if (pr[j] <= 0.0) continue;
                    const double value = mech.outer(base + sup[j]);
                    if (!std::isfinite(value))
                        throw NumericalError("NON_FINITE", "non-finite value of " + name + " at step " + std::to_string(t + 1));
                    State ns = states[i];
                    ns.values[static_cast<std::size_t>(v) * k + t] = lattice_key(value);
                    ns.p *= pr[j];
                    std::vector<double> cur = current[i];
                    cur[v] = value;
                    next.push_back(std::move(ns));
                    next_current.push_back(std::move(cur));
                }
            }
            states = std::move(next);
            current = std::move(next_current);
        }
        for (std::size_t i = 0; i < states.size(); ++i) states[i].previous = current[i];
    }

    JointTable joint;
    joint.variables = spec.variables;
    joint.k = k;
    for (const State& st : states) joint.probs[st.values] += st.p;
    return joint;
}

Dist marginal(const JointTable& joint, const TermList& terms) {
    const auto atoms = parse_terms(joint, terms);
    Dist out;
    Key key;
    for (const auto& [row, p] : joint.probs) {
        project(row, atoms, key);
        out[key] += p;
    }
    return out;
}

CiResult check_ci_exact(const JointTable& joint, const TermList& a, const TermList& b, const TermList& c) {
    const auto aa = parse_terms(joint, a);
    const auto bb = parse_terms(joint, b);
    const auto cc = parse_terms(joint, c);
    // Joint over (c, a, b) grouped by c.
    std::map<Key, Dist> pabc, pac, pbc;
    Dist pc;
    Key ka, kb, kc;
    for (const auto& [row, p] : joint.probs) {
        project(row, aa, ka);
        project(row, bb, kb);
        project(row, cc, kc);
        pabc[kc][concat(ka, kb)] += p;
        pac[kc][ka] += p;
        pbc[kc][kb] += p;
        pc[kc] += p;
    }
    CiResult r;
    for (const auto& [c_key, pcv] : pc) {
        if (pcv <= 0.0) continue;
        const Dist& joint_ab = pabc[c_key];
        for (const auto& [a_key, pa] : pac[c_key])
            for (const auto& [b_key, pb] : pbc[c_key]) {
                const double dev = std::abs(lookup(joint_ab, concat(a_key, b_key)) - pa * pb / pcv);
                r.max_deviation = std::max(r.max_deviation, dev);
            }
    }
    r.holds = r.max_deviation < kCiTolerance;
    return r;
}

namespace {

// max over (s_other, s_Y, s_Z) of |sum_y alpha(s_Z | s_Y, y) (beta(y | s_Y, s_other) - gamma(y | s_Y))|.
double condition_residual(const JointTable& joint, const std::string& other, const std::string& target,
                          const std::string& middle) {
    const std::string ys = "S_" + middle;
    const std::string yblock = middle + "_1:k";
    const Dist p_y_block = marginal(joint, {ys, yblock});                  // (s_Y, y)
    const Dist p_t_y_block = marginal(joint, {ys, yblock, "S_" + target});   // (s_Y, y, s_T)
    const Dist p_o_y_block = marginal(joint, {ys, yblock, "S_" + other});    // (s_Y, y, s_O)
    const Dist p_y_o = marginal(joint, {ys, "S_" + other});                 // (s_Y, s_O)
    const Dist p_y_t = marginal(joint, {ys, "S_" + target});                // (s_Y, s_T)
    const Dist p_y = marginal(joint, {ys});

    // Group the y-blocks and target values by s_Y.
    std::map<std::int64_t, std::vector<Key>> blocks_by_sy;
    for (const auto& [key, p] : p_y_block)
        if (p > 0.0) blocks_by_sy[key[0]].push_back(Key(key.begin() + 1, key.end()));
    std::map<std::int64_t, std::vector<std::int64_t>> others_by_sy, targets_by_sy;
    for (const auto& [key, p] : p_y_o)
        if (p > 0.0) others_by_sy[key[0]].push_back(key[1]);
    for (const auto& [key, p] : p_y_t)
        if (p > 0.0) targets_by_sy[key[0]].push_back(key[1]);

    double worst = 0.0;
    for (const auto& [sy_key, psy] : p_y) {
        const std::int64_t sy = sy_key[0];
        if (psy <= 0.0) continue;
        for (std::int64_t so : others_by_sy[sy]) {
            const double pyo = lookup(p_y_o, {sy, so});
            for (std::int64_t st : targets_by_sy[sy]) {
                double acc = 0.0;
                for (const Key& y : blocks_by_sy[sy]) {
                    Key base{sy};
                    base.insert(base.end(), y.begin(), y.end());
                    const double pyb = lookup(p_y_block, base);
                    Key with_t = base;
                    with_t.push_back(st);
                    Key with_o = base;
                    with_o.push_back(so);
                    const double alpha = lookup(p_t_y_block, with_t) / pyb;
                    const double beta = lookup(p_o_y_block, with_o) / pyo;
                    const double gamma = pyb / psy;
                    acc += alpha * (beta - gamma);
                }
                worst = std::max(worst, std::abs(acc));
            }
        }
    }
    return worst;
}

void require_trivariate(const JointTable& joint) {
    for (const char* v : {"X", "Y", "Z"})
        if (std::find(joint.variables.begin(), joint.variables.end(), v) == joint.variables.end())
            throw SpecError("NOT_TRIVARIATE", std::string("joint table has no variable ") + v);
    if (joint.k < 2) throw SpecError("BAD_K", "condition check needs k >= 2");
}

}  // namespace

ConditionReport check_integral_condition(const JointTable& joint) {
    require_trivariate(joint);
    ConditionReport r;
    const CiResult ci = check_ci_exact(joint, {"S_X"}, {"S_Z"}, {"S_Y"});
    r.ci_holds = ci.holds;
    r.ci_deviation = ci.max_deviation;
    r.condition_ii_residual = condition_residual(joint, "X", "Z", "Y");
    r.condition_iii_residual = condition_residual(joint, "Z", "X", "Y");
    const bool conditions = r.condition_ii_residual < kCiTolerance && r.condition_iii_residual < kCiTolerance;
    r.equivalence_ok = conditions == r.ci_holds;
    return r;
}

SufficientConditionReport check_sufficient_conditions(const JointTable& joint) {
    require_trivariate(joint);
    SufficientConditionReport r;
    r.a_holds = check_ci_exact(joint, {"S_X"}, {"Y_1:k"}, {"S_Y"}).holds;
    r.b_holds = check_ci_exact(joint, {"S_Z"}, {"Y_1:k"}, {"S_Y"}).holds;
    r.vi_holds = check_ci_exact(joint, {"S_X"}, {"S_Z"}, {"S_Y"}).holds;
    r.implication_ok = !(r.a_holds || r.b_holds) || r.vi_holds;
    return r;
}

std::string joint_to_csv(const JointTable& joint) {
    std::ostringstream out;
    for (const auto& c : joint.column_names()) out << c << ',';
    out << "probability\n";
    for (const auto& [row, p] : joint.probs) {
        for (std::int64_t v : row) out << format_double(lattice_value(v)) << ',';
        out << format_double(p) << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const ConditionReport& r) {
    return {{"ci_holds", r.ci_holds},
            {"ci_deviation", r.ci_deviation},
            {"condition_ii_residual", r.condition_ii_residual},
            {"condition_iii_residual", r.condition_iii_residual},
            {"equivalence_ok", r.equivalence_ok}};
}

nlohmann::json to_json(const SufficientConditionReport& r) {
    return {{"a_holds", r.a_holds}, {"b_holds", r.b_holds}, {"vi_holds", r.vi_holds}, {"implication_ok", r.implication_ok}};
}

namespace {

BasicFunction random_function(Rng& rng) {
    static const double scales[] = {-2.0, -1.0, 2.0, 3.0};
    std::uniform_int_distribution<int> pick(0, 4);
    switch (pick(rng)) {
        case 0: return BasicFunction::identity();
        case 1: return BasicFunction::square();
        case 2: return BasicFunction::cube();
        case 3: return BasicFunction::tanh();
        default: return BasicFunction::scale(scales[std::uniform_int_distribution<int>(0, 3)(rng)]);
    }
}

NoiseSpec random_ternary(Rng& rng) {
    std::vector<double> pool{-2, -1, 0, 1, 2};
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<double> support(pool.begin(), pool.begin() + 3);
    std::sort(support.begin(), support.end());
    std::uniform_int_distribution<int> weight(1, 4);
    std::vector<double> probs(3);
    double total = 0.0;
    for (double& p : probs) total += (p = weight(rng));
    for (double& p : probs) p /= total;
    return NoiseSpec::discrete(std::move(support), std::move(probs));
}

MechanismSpec random_child(Rng& rng, const std::string& parent) {
    MechanismSpec m;
    m.inner[parent] = random_function(rng);
    m.noise = random_ternary(rng);
    if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) m.outer = random_function(rng);
    return m;
}

}  // namespace

AlignedModelSpec random_discrete_spec(Rng& rng, TrivariateShape shape) {
    if (shape == TrivariateShape::fork) {
        MechanismSpec x = random_child(rng, "Y");
        MechanismSpec z = random_child(rng, "Y");
        return models::fork(std::move(x), std::move(z), random_ternary(rng));
    }
    NoiseSpec nx = random_ternary(rng);
    MechanismSpec y = random_child(rng, "X");
    MechanismSpec z = random_child(rng, "Y");
    return models::chain(std::move(y), std::move(z), std::move(nx));
}

namespace fixtures {

AlignedModelSpec nonlinear_fork() {
    const NoiseSpec ternary = NoiseSpec::discrete({-1.0, 0.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const NoiseSpec binary = NoiseSpec::discrete({0.0, 1.0}, {0.5, 0.5});
    MechanismSpec x, z;
    x.inner["Y"] = BasicFunction::square();
    x.noise = binary;
    z.inner["Y"] = BasicFunction::square();
    z.noise = binary;
    return models::fork(x, z, ternary);
}

AlignedModelSpec partial_linear_fork() {
    const NoiseSpec ternary = NoiseSpec::discrete({-1.0, 0.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const NoiseSpec binary = NoiseSpec::discrete({0.0, 1.0}, {0.5, 0.5});
    MechanismSpec x, z;
    x.inner["Y"] = BasicFunction::square();
    x.noise = binary;
    z.inner["Y"] = BasicFunction::scale(2.0);
    z.noise = binary;
    return models::fork(x, z, ternary);
}

}  // namespace fixtures

}  // namespace aggcausal
