#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

namespace aggcausal {

using Edge = std::pair<int, int>;

/// Directed graph over named nodes. Acyclicity is checked by `is_acyclic`, not
/// enforced on mutation, so validators can report cycles instead of throwing.
struct Dag {
    std::vector<std::string> nodes;
    std::set<Edge> edges;  // (from, to)

    int size() const { return static_cast<int>(nodes.size()); }
    int index_of(const std::string& name) const;  // -1 when absent
    std::vector<int> parents(int v) const;
    bool has_edge(int from, int to) const { return edges.count({from, to}) > 0; }
    bool is_acyclic() const;
    // Kahn order with ties broken by node index; nullopt on a cycle.
    std::optional<std::vector<int>> topological_order() const;
};

/// Partially directed graph representing a Markov equivalence class.
/// Undirected edges are stored with first < second.
struct Cpdag {
    std::vector<std::string> nodes;
    std::set<Edge> directed;
    std::set<Edge> undirected;

    int size() const { return static_cast<int>(nodes.size()); }
    bool adjacent(int a, int b) const;
    bool has_directed(int from, int to) const { return directed.count({from, to}) > 0; }
    bool has_undirected(int a, int b) const;
    void add_undirected(int a, int b);
    void remove_undirected(int a, int b);
    // Replaces an undirected a--b (if present) by a->b.
    void orient(int from, int to);
    std::set<Edge> skeleton() const;  // unordered pairs, first < second
};

inline Edge unordered(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Completes orientations with Meek rules R1-R3 until a fixed point.
void apply_meek_rules(Cpdag& g);

Cpdag dag_to_cpdag(const Dag& dag);

// Exact match of directed and undirected edge sets. Throws SpecError when the
// node sets differ.
bool same_mec(const Cpdag& a, const Cpdag& b);

// Unshielded colliders a->c<-b with a, b non-adjacent, as (a, c, b) with a < b.
std::vector<std::tuple<int, int, int>> v_structures(const Cpdag& g);

// Skeleton F1 of `estimate` against `truth` (1 when both are empty).
double skeleton_f1(const Cpdag& estimate, const Cpdag& truth);

// Every DAG on n labelled nodes, in a deterministic order.
std::vector<Dag> enumerate_dags(const std::vector<std::string>& nodes);

nlohmann::json to_json(const Cpdag& g);
Cpdag cpdag_from_json(const nlohmann::json& j);
// One-line form `X->Y; A--B` (directed first, both sorted by node index).
std::string to_edge_list(const Cpdag& g);

}  // namespace aggcausal
