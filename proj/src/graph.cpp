#include "aggcausal/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <sstream>

#include "aggcausal/error.hpp"

namespace aggcausal {

int Dag::index_of(const std::string& name) const {
    auto it = std::find(nodes.begin(), nodes.end(), name);
    return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

std::vector<int> Dag::parents(int v) const {
    std::vector<int> out;
    for (const auto& [from, to] : edges)
        if (to == v) out.push_back(from);
    return out;
}

std::optional<std::vector<int>> Dag::topological_order() const {
    const int n = size();
    std::vector<int> indeg(n, 0);
    for (const auto& e : edges) ++indeg[e.second];
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.push(v);
    std::vector<int> order;
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (const auto& [from, to] : edges) {
            if (from == v && --indeg[to] == 0) ready.push(to);
        }
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

bool Dag::is_acyclic() const {
    for (const auto& e : edges)
        if (e.first == e.second) return false;
    return topological_order().has_value();
}

bool Cpdag::adjacent(int a, int b) const {
    return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
}

bool Cpdag::has_undirected(int a, int b) const { return undirected.count(unordered(a, b)) > 0; }

void Cpdag::add_undirected(int a, int b) { undirected.insert(unordered(a, b)); }

void Cpdag::remove_undirected(int a, int b) { undirected.erase(unordered(a, b)); }

void Cpdag::orient(int from, int to) {
    remove_undirected(from, to);
    directed.insert({from, to});
}

std::set<Edge> Cpdag::skeleton() const {
    std::set<Edge> out = undirected;
    for (const auto& [a, b] : directed) out.insert(unordered(a, b));
    return out;
}

namespace {

// One pass over the undirected edges; returns true if anything was oriented.
bool meek_pass(Cpdag& g) {
    const int n = g.size();
    const std::vector<Edge> candidates(g.undirected.begin(), g.undirected.end());
    for (const auto& [u, v] : candidates) {
        for (const auto& [x, y] : {Edge{u, v}, Edge{v, u}}) {
            if (!g.has_undirected(x, y)) break;
            // R1: a->x, x--y, a and y non-adjacent => x->y
            for (int a = 0; a < n; ++a) {
                if (g.has_directed(a, x) && a != y && !g.adjacent(a, y)) {
                    g.orient(x, y);
                    return true;
                }
            }
            // R2: x->c->y, x--y => x->y
            for (int c = 0; c < n; ++c) {
                if (g.has_directed(x, c) && g.has_directed(c, y)) {
                    g.orient(x, y);
                    return true;
                }
            }
            // R3: x--c, x--d, c->y, d->y, c and d non-adjacent => x->y
            for (int c = 0; c < n; ++c) {
                if (!g.has_undirected(x, c) || !g.has_directed(c, y)) continue;
                for (int d = c + 1; d < n; ++d) {
                    if (g.has_undirected(x, d) && g.has_directed(d, y) && !g.adjacent(c, d)) {
                        g.orient(x, y);
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

}  // namespace

void apply_meek_rules(Cpdag& g) {
    while (meek_pass(g)) {
    }
}

Cpdag dag_to_cpdag(const Dag& dag) {
    Cpdag g;
    g.nodes = dag.nodes;
    for (const auto& [a, b] : dag.edges) g.add_undirected(a, b);
    const int n = dag.size();
    for (int c = 0; c < n; ++c) {
        const auto pa = dag.parents(c);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            for (std::size_t j = i + 1; j < pa.size(); ++j) {
                if (!dag.has_edge(pa[i], pa[j]) && !dag.has_edge(pa[j], pa[i])) {
                    g.orient(pa[i], c);
                    g.orient(pa[j], c);
                }
            }
        }
    }
    apply_meek_rules(g);
    return g;
}

bool same_mec(const Cpdag& a, const Cpdag& b) {
    if (a.nodes != b.nodes) throw SpecError("NODE_MISMATCH", "same_mec: node sets differ");
    return a.directed == b.directed && a.undirected == b.undirected;
}

std::vector<std::tuple<int, int, int>> v_structures(const Cpdag& g) {
    std::vector<std::tuple<int, int, int>> out;
    const int n = g.size();
    for (int c = 0; c < n; ++c) {
        for (int a = 0; a < n; ++a) {
            if (!g.has_directed(a, c)) continue;
            for (int b = a + 1; b < n; ++b) {
                if (g.has_directed(b, c) && !g.adjacent(a, b)) out.emplace_back(a, c, b);
            }
        }
    }
    return out;
}

double skeleton_f1(const Cpdag& estimate, const Cpdag& truth) {
    const auto est = estimate.skeleton();
    const auto tru = truth.skeleton();
    if (est.empty() && tru.empty()) return 1.0;
    std::size_t tp = 0;
    for (const auto& e : est) tp += tru.count(e);
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(est.size());
    const double recall = static_cast<double>(tp) / static_cast<double>(tru.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<Dag> enumerate_dags(const std::vector<std::string>& nodes) {
    const int n = static_cast<int>(nodes.size());
    std::vector<Dag> out;
    if (n == 0) {
        out.push_back(Dag{nodes, {}});
        return out;
    }
    // Parent sets are bitmasks over the other n-1 nodes.
    const int per_node = 1 << (n - 1);
    std::vector<int> choice(n, 0);
    while (true) {
        Dag d{nodes, {}};
        for (int v = 0; v < n; ++v) {
            for (int bit = 0; bit < n - 1; ++bit) {
                if (choice[v] & (1 << bit)) {
                    const int parent = bit < v ? bit : bit + 1;
                    d.edges.insert({parent, v});
                }
            }
        }
        if (d.is_acyclic()) out.push_back(std::move(d));
        int pos = n - 1;
        while (pos >= 0 && ++choice[pos] == per_node) {
            choice[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

nlohmann::json to_json(const Cpdag& g) {
    nlohmann::json j;
    j["nodes"] = g.nodes;
    j["directed"] = nlohmann::json::array();
    j["undirected"] = nlohmann::json::array();
    for (const auto& [a, b] : g.directed) j["directed"].push_back({g.nodes[a], g.nodes[b]});
    for (const auto& [a, b] : g.undirected) j["undirected"].push_back({g.nodes[a], g.nodes[b]});
    return j;
}

Cpdag cpdag_from_json(const nlohmann::json& j) {
    Cpdag g;
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    auto idx = [&](const std::string& name) {
        auto it = std::find(g.nodes.begin(), g.nodes.end(), name);
        if (it == g.nodes.end()) throw SpecError("BAD_GRAPH", "unknown node '" + name + "'");
        return static_cast<int>(it - g.nodes.begin());
    };
    for (const auto& e : j.at("directed")) g.directed.insert({idx(e.at(0)), idx(e.at(1))});
    for (const auto& e : j.at("undirected")) g.add_undirected(idx(e.at(0)), idx(e.at(1)));
    return g;
}

std::string to_edge_list(const Cpdag& g) {
    std::ostringstream os;
    bool first = true;
    auto sep = [&] {
        if (!first) os << "; ";
        first = false;
    };
    for (const auto& [a, b] : g.directed) {
        sep();
        os << g.nodes[a] << "->" << g.nodes[b];
    }
    for (const auto& [a, b] : g.undirected) {
        sep();
        os << g.nodes[a] << "--" << g.nodes[b];
    }
    return os.str();
}

}  // namespace aggcausal
