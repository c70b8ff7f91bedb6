#include "aggcausal/discovery.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "aggcausal/error.hpp"
#include "aggcausal/rng.hpp"

namespace aggcausal {

CiTestKind parse_ci_test(const std::string& name) {
    if (name == "fisher_z" || name == "fisherz") return CiTestKind::fisher_z;
    if (name == "kci") return CiTestKind::kci;
    throw SpecError("SPEC_BAD_TEST", "unknown CI test '" + name + "'");
}

std::string ci_test_name(CiTestKind kind) { return kind == CiTestKind::kci ? "kci" : "fisher_z"; }

namespace {

void for_each_subset(const std::vector<int>& pool, int size, const std::function<bool(const std::vector<int>&)>& fn) {
    const int m = static_cast<int>(pool.size());
    if (size > m) return;
    std::vector<int> idx(size);
    for (int i = 0; i < size; ++i) idx[i] = i;
    std::vector<int> subset(size);
    while (true) {
        for (int i = 0; i < size; ++i) subset[i] = pool[idx[i]];
        if (!fn(subset)) return;
        int pos = size - 1;
        while (pos >= 0 && idx[pos] == m - size + pos) --pos;
        if (pos < 0) return;
        ++idx[pos];
        for (int i = pos + 1; i < size; ++i) idx[i] = idx[i - 1] + 1;
    }
}

std::vector<int> without(const std::set<int>& s, int drop) {
    std::vector<int> out;
    for (int v : s)
        if (v != drop) out.push_back(v);
    return out;
}

}  // namespace

Cpdag pc_discover(const Eigen::MatrixXd& data, const std::vector<std::string>& names, const PcOptions& opts) {
    const int s = static_cast<int>(names.size());
    if (s < 2) throw SpecError("BAD_ARGUMENT", "PC needs at least two variables");
    if (data.cols() != s) throw SpecError("BAD_ARGUMENT", "names do not match data columns");

    KciOptions kci = opts.kci;
    if (kci.column_keys.empty())
        for (const auto& n : names) kci.column_keys.push_back(name_key(n));

    auto independent = [&](int a, int b, const std::vector<int>& cond) {
        try {
            const TestResult r = opts.test == CiTestKind::kci ? kci_test(data, a, b, cond, opts.alpha, kci)
                                                              : fisher_z_test(data, a, b, cond, opts.alpha);
            return !r.reject;
        } catch (const NumericalError& e) {
            throw NumericalError(e.code(), "CI test " + names[a] + " vs " + names[b] + ": " + e.what());
        } catch (const SpecError& e) {
            throw SpecError(e.code(), "CI test " + names[a] + " vs " + names[b] + ": " + e.what());
        }
    };

    std::vector<std::set<int>> adj(s);
    std::map<Edge, std::vector<std::vector<int>>> sepsets;

    if (!opts.skeleton_prior) {
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b)
                if (a != b) adj[a].insert(b);
        for (int level = 0; opts.max_cond < 0 || level <= opts.max_cond; ++level) {
            const auto snapshot = adj;
            std::vector<Edge> removals;
            bool any_candidate = false;
            for (int a = 0; a < s; ++a) {
                for (int b = a + 1; b < s; ++b) {
                    const auto& view = opts.stable ? snapshot : adj;
                    if (!adj[a].count(b)) continue;
                    const std::vector<int> pools[2] = {without(view[a], b), without(view[b], a)};
                    if (static_cast<int>(pools[0].size()) < level && static_cast<int>(pools[1].size()) < level)
                        continue;
                    any_candidate = true;
                    std::set<std::vector<int>> tried;
                    std::vector<std::vector<int>> accepted;
                    for (const auto& pool : pools) {
                        for_each_subset(pool, level, [&](const std::vector<int>& cond) {
                            std::vector<int> key = cond;
                            std::sort(key.begin(), key.end());
                            if (!tried.insert(key).second) return true;
                            if (independent(a, b, cond)) {
                                accepted.push_back(key);
                                return opts.stable;
                            }
                            return true;
                        });
                        if (!opts.stable && !accepted.empty()) break;
                    }
                    if (accepted.empty()) continue;
                    sepsets[{a, b}] = accepted;
                    if (opts.stable) {
                        removals.push_back({a, b});
                    } else {
                        adj[a].erase(b);
                        adj[b].erase(a);
                    }
                }
            }
            for (const auto& [a, b] : removals) {
                adj[a].erase(b);
                adj[b].erase(a);
            }
            if (!any_candidate) break;
        }
    } else {
        for (const auto& [a, b] : *opts.skeleton_prior) {
            if (a < 0 || b < 0 || a >= s || b >= s || a == b) throw SpecError("BAD_PRIOR", "skeleton prior edge out of range");
            adj[a].insert(b);
            adj[b].insert(a);
        }
        for (int a = 0; a < s; ++a) {
            for (int b = a + 1; b < s; ++b) {
                if (adj[a].count(b)) continue;
                std::set<int> pool_set(adj[a].begin(), adj[a].end());
                pool_set.insert(adj[b].begin(), adj[b].end());
                pool_set.erase(a);
                pool_set.erase(b);
                const std::vector<int> pool(pool_set.begin(), pool_set.end());
                const int limit = opts.max_cond < 0 ? static_cast<int>(pool.size())
                                                    : std::min<int>(opts.max_cond, static_cast<int>(pool.size()));
                for (int size = 0; size <= limit; ++size) {
                    std::vector<std::vector<int>> accepted;
                    for_each_subset(pool, size, [&](const std::vector<int>& cond) {
                        if (independent(a, b, cond)) accepted.push_back(cond);
                        return true;
                    });
                    if (!accepted.empty()) {
                        sepsets[{a, b}] = accepted;
                        break;
                    }
                }
            }
        }
    }

    Cpdag g;
    g.nodes = names;
    for (int a = 0; a < s; ++a)
        for (int b : adj[a])
            if (a < b) g.add_undirected(a, b);

    std::set<Edge> arrows;
    for (int c = 0; c < s; ++c) {
        const std::vector<int> nb(adj[c].begin(), adj[c].end());
        for (std::size_t p = 0; p < nb.size(); ++p) {
            for (std::size_t q = p + 1; q < nb.size(); ++q) {
                const int a = nb[p], b = nb[q];
                if (adj[a].count(b)) continue;
                auto it = sepsets.find(unordered(a, b));
                if (it == sepsets.end()) continue;
                const bool in_some = std::any_of(it->second.begin(), it->second.end(), [c](const std::vector<int>& set) {
                    return std::find(set.begin(), set.end(), c) != set.end();
                });
                if (!in_some) {
                    arrows.insert({a, c});
                    arrows.insert({b, c});
                }
            }
        }
    }
    for (const auto& [u, v] : arrows)
        if (!arrows.count({v, u})) g.orient(u, v);
    apply_meek_rules(g);
    return g;
}

Cpdag pc_discover(const AggregatedDataset& data, const PcOptions& opts) {
    return pc_discover(data.data, data.names, opts);
}

// ---------------------------------------------------------------------------
// Score search

double local_bic(const Eigen::MatrixXd& data, int node, const std::vector<int>& parents) {
    const Eigen::Index n = data.rows();
    const Eigen::Index p = static_cast<Eigen::Index>(parents.size());
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (Eigen::Index c = 0; c < p; ++c) design.col(c + 1) = data.col(parents[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd y = data.col(node);
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
    const double rss = (y - design * beta).squaredNorm();
    const double total = (y.array() - y.mean()).square().sum();
    const double nd = static_cast<double>(n);
    const double sigma2 = std::max(rss / nd, 1e-12 * std::max(total / nd, 1e-300));
    if (!std::isfinite(sigma2)) throw NumericalError("NON_FINITE", "non-finite residual variance in BIC");
    return -0.5 * nd * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) -
           0.5 * static_cast<double>(p + 2) * std::log(nd);
}

double bic_score(const Eigen::MatrixXd& data, const Dag& dag) {
    double total = 0.0;
    for (int v = 0; v < dag.size(); ++v) total += local_bic(data, v, dag.parents(v));
    return total;
}

namespace {

const std::vector<Dag>& dag_catalogue(int s) {
    static std::mutex mu;
    static std::map<int, std::vector<Dag>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(s);
    if (it == cache.end()) {
        std::vector<std::string> names;
        for (int i = 0; i < s; ++i) names.push_back(std::to_string(i));
        it = cache.emplace(s, enumerate_dags(names)).first;
    }
    return it->second;
}

}  // namespace

ScoreSearchResult score_search_full(const Eigen::MatrixXd& data, const std::vector<std::string>& names, int max_vars) {
    const int s = static_cast<int>(names.size());
    if (max_vars > 5) throw SpecError("BAD_ARGUMENT", "max_vars must be at most 5");
    if (s > max_vars) throw SpecError("EXHAUSTIVE_LIMIT", "exhaustive search limit: " + std::to_string(s) + " variables");
    if (data.cols() != s) throw SpecError("BAD_ARGUMENT", "names do not match data columns");
    if (data.rows() <= s + 2) throw NumericalError("TOO_FEW_SAMPLES", "score search needs n > s + 2");

    std::vector<std::vector<double>> cache(s, std::vector<double>(std::size_t{1} << s, std::nan("")));
    auto local = [&](int v, const std::vector<int>& parents) {
        unsigned mask = 0;
        for (int p : parents) mask |= 1u << p;
        double& slot = cache[v][mask];
        if (std::isnan(slot)) slot = local_bic(data, v, parents);
        return slot;
    };

    const Dag* best = nullptr;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<Edge> best_edges;
    for (const Dag& dag : dag_catalogue(s)) {
        double score = 0.0;
        for (int v = 0; v < s; ++v) score += local(v, dag.parents(v));
        const std::vector<Edge> edges(dag.edges.begin(), dag.edges.end());
        bool take = false;
        if (!best) {
            take = true;
        } else {
            const double tol = 1e-8 * std::max(1.0, std::abs(best_score));
            if (score > best_score + tol) take = true;
            else if (score >= best_score - tol)
                take = edges.size() < best_edges.size() || (edges.size() == best_edges.size() && edges < best_edges);
        }
        if (take) {
            best = &dag;
            best_score = score;
            best_edges = edges;
        }
    }

    ScoreSearchResult out;
    out.best.nodes = names;
    out.best.edges = best->edges;
    out.score = best_score;
    out.cpdag = dag_to_cpdag(out.best);
    return out;
}

Cpdag score_search(const Eigen::MatrixXd& data, const std::vector<std::string>& names, int max_vars) {
    return score_search_full(data, names, max_vars).cpdag;
}

Cpdag score_search(const AggregatedDataset& data, int max_vars) { return score_search(data.data, data.names, max_vars); }

// ---------------------------------------------------------------------------
// Bivariate direction

std::string direction_name(Direction d) {
    switch (d) {
        case Direction::x_to_y: return "x_to_y";
        case Direction::y_to_x: return "y_to_x";
        case Direction::undecided: return "undecided";
    }
    return "undecided";
}

nlohmann::json to_json(const DirectionVerdict& v) {
    return {{"direction", direction_name(v.direction)}, {"confidence", v.confidence}, {"details", v.details}};
}

namespace {

Eigen::VectorXd standardized(const Eigen::VectorXd& v, const char* what) {
    if (v.size() < 10) throw NumericalError("TOO_FEW_SAMPLES", std::string(what) + " has too few samples");
    return standardize(v);
}

// n * ||Cov(phi(a), psi(r))||_F^2 with random Fourier features.
double rff_contrast(const Eigen::VectorXd& a, const Eigen::VectorXd& r, int features, std::uint64_t seed) {
    Eigen::MatrixXd joint(a.size(), 2);
    joint.col(0) = a;
    joint.col(1) = r;
    KciOptions opts;
    opts.num_features_xy = features;
    opts.seed = seed;
    opts.column_keys = {1, 2};
    return kci_test(joint, 0, 1, {}, 0.05, opts).statistic;
}

DirectionVerdict decide(double score_xy, double score_yx, bool smaller_wins, double confidence, double threshold) {
    DirectionVerdict v;
    v.confidence = confidence;
    if (score_xy == score_yx || confidence < threshold) {
        v.direction = Direction::undecided;
    } else {
        const bool xy = smaller_wins ? score_xy < score_yx : score_xy > score_yx;
        v.direction = xy ? Direction::x_to_y : Direction::y_to_x;
    }
    return v;
}

}  // namespace

DirectionVerdict direct_lingam_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LingamOptions& opts) {
    if (x.size() != y.size()) throw SpecError("BAD_ARGUMENT", "x and y differ in length");
    const Eigen::VectorXd xs = standardized(x, "x");
    const Eigen::VectorXd ys = standardized(y, "y");
    const double rho = xs.dot(ys) / static_cast<double>(xs.size() - 1);
    if (!(std::abs(rho) < 1.0 - 1e-12)) throw NumericalError("DEGENERATE_CORRELATION", "x and y are collinear");
    const Eigen::VectorXd ry = ys - rho * xs;
    const Eigen::VectorXd rx = xs - rho * ys;
    const double stat_xy = rff_contrast(xs, ry, opts.num_features, opts.seed);
    const double stat_yx = rff_contrast(ys, rx, opts.num_features, opts.seed);
    DirectionVerdict v = decide(stat_xy, stat_yx, true, std::abs(stat_xy - stat_yx), opts.threshold);
    v.details = {{"statistic_x_to_y", stat_xy}, {"statistic_y_to_x", stat_yx}, {"correlation", rho}};
    return v;
}

Eigen::VectorXd kernel_ridge_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double ridge,
                                 double bandwidth_multiplier) {
    if (!(bandwidth_multiplier > 0.0)) throw SpecError("BAD_OPTION", "bandwidth multiplier must be positive");
    const Eigen::Index n = x.size();
    const double sigma = bandwidth_multiplier * median_distance(x);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        k(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double d = x(a) - x(b);
            k(a, b) = k(b, a) = std::exp(-d * d * inv);
        }
    }
    Eigen::MatrixXd system = k;
    system.diagonal().array() += ridge;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13))
        throw NumericalError("SINGULAR_RIDGE", "kernel ridge system is singular; increase the ridge");
    const Eigen::VectorXd fitted = k * llt.solve(y);
    if (!fitted.allFinite()) throw NumericalError("NON_FINITE", "kernel ridge fit is not finite");
    return fitted;
}

DirectionVerdict anm_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AnmOptions& opts) {
    if (x.size() != y.size()) throw SpecError("BAD_ARGUMENT", "x and y differ in length");
    const Eigen::VectorXd xs = standardized(x, "x");
    const Eigen::VectorXd ys = standardized(y, "y");
    const double ridge = opts.ridge < 0.0 ? 1e-3 * static_cast<double>(xs.size()) : opts.ridge;
    const Eigen::VectorXd ry = ys - kernel_ridge_fit(xs, ys, ridge, opts.bandwidth);
    const Eigen::VectorXd rx = xs - kernel_ridge_fit(ys, xs, ridge, opts.bandwidth);
    const TestResult t_xy = hsic_test(xs, ry, 0.05, opts.hsic);
    const TestResult t_yx = hsic_test(ys, rx, 0.05, opts.hsic);
    const double p_xy = std::max(t_xy.p_value, DBL_MIN);
    const double p_yx = std::max(t_yx.p_value, DBL_MIN);
    const double confidence = std::abs(std::log(p_xy) - std::log(p_yx));
    DirectionVerdict v = p_xy == p_yx ? decide(t_xy.statistic, t_yx.statistic, true, confidence, opts.threshold)
                                      : decide(p_xy, p_yx, false, confidence, opts.threshold);
    v.details = {{"p_x_to_y", t_xy.p_value}, {"p_y_to_x", t_yx.p_value}, {"ridge", ridge},
                 {"statistic_x_to_y", t_xy.statistic}, {"statistic_y_to_x", t_yx.statistic}};
    return v;
}

}  // namespace aggcausal
