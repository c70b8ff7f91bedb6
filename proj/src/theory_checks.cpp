#include "aggcausal/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "aggcausal/error.hpp"
#include "aggcausal/io.hpp"
#include "aggcausal/rng.hpp"

namespace aggcausal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    return out;
}

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw SpecError("BAD_GRID", "grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw SpecError("BAD_GRID", "grid must be strictly ascending");
}

double sd_of(const Eigen::VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

std::optional<double> FhatEstimate::at(double t) const {
    std::size_t lo = grid.size(), hi = grid.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (missing(g)) continue;
        if (grid[g] <= t) lo = g;
        if (grid[g] >= t && hi == grid.size()) hi = g;
    }
    if (lo == grid.size() || hi == grid.size()) return std::nullopt;
    if (lo == hi) return values[lo];
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw NumericalError("EMPTY", "quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

double silverman_bandwidth(const Eigen::VectorXd& v) {
    if (v.size() < 2) throw NumericalError("TOO_FEW_SAMPLES", "bandwidth needs at least two samples");
    const std::vector<double> data(v.data(), v.data() + v.size());
    const double iqr = quantile(data, 0.75) - quantile(data, 0.25);
    const double sd = sd_of(v);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd;
    if (!(spread > 0.0)) throw NumericalError("ZERO_VARIANCE", "bandwidth of a constant sample");
    return 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mechanism_sums(const Panel& panel, const MechanismSpec& f) {
    if (f.inner.size() != 1) throw SpecError("BAD_MECHANISM", "theory checks need a single-parent mechanism");
    const auto& [cause, inner] = *f.inner.begin();
    const int c = panel.index_of(cause);
    if (c < 0) throw SpecError("UNKNOWN_VARIABLE", "panel has no variable '" + cause + "'");
    Eigen::VectorXd sums(panel.n()), agg(panel.n());
    for (int r = 0; r < panel.n(); ++r) {
        double s = 0.0, a = 0.0;
        for (int t = 0; t < panel.k(); ++t) {
            const double x = panel.at(r, t, c);
            s += f.outer(inner(x));
            a += x;
        }
        sums(r) = s;
        agg(r) = a;
    }
    return {sums, agg};
}

FhatEstimate nadaraya_watson(const Eigen::VectorXd& t, const Eigen::VectorXd& s, const std::vector<double>& grid,
                             double bandwidth, int min_support) {
    check_grid(grid);
    if (!(bandwidth > 0.0)) throw SpecError("BAD_BANDWIDTH", "bandwidth must be positive");
    FhatEstimate est;
    est.grid = grid;
    est.bandwidth = bandwidth;
    est.n_used = static_cast<int>(t.size());
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for (double g : grid) {
        double num = 0.0, den = 0.0;
        int support = 0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double d = t(i) - g;
            if (std::abs(d) <= bandwidth) ++support;
            const double w = std::exp(-d * d * inv);
            num += w * s(i);
            den += w;
        }
        est.support.push_back(support);
        est.values.push_back(support >= min_support && den > 0.0 ? num / den : kNaN);
    }
    return est;
}

FhatEstimate local_linear_smoother(const Eigen::VectorXd& t, const Eigen::VectorXd& s, const std::vector<double>& grid,
                                   double bandwidth, int min_support) {
    check_grid(grid);
    if (!(bandwidth > 0.0)) throw SpecError("BAD_BANDWIDTH", "bandwidth must be positive");
    FhatEstimate est;
    est.grid = grid;
    est.bandwidth = bandwidth;
    est.n_used = static_cast<int>(t.size());
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for (double g : grid) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, r0 = 0.0, r1 = 0.0;
        int support = 0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double d = t(i) - g;
            if (std::abs(d) <= bandwidth) ++support;
            const double w = std::exp(-d * d * inv);
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            r0 += w * s(i);
            r1 += w * d * s(i);
        }
        const double det = s0 * s2 - s1 * s1;
        est.support.push_back(support);
        est.values.push_back(support >= min_support && det > 0.0 ? (s2 * r0 - s1 * r1) / det : kNaN);
    }
    return est;
}

FhatEstimate estimate_fhat(const Panel& panel, const MechanismSpec& f, const FhatOptions& opts) {
    const auto [sums, agg] = mechanism_sums(panel, f);
    const double h = opts.bandwidth ? *opts.bandwidth : silverman_bandwidth(agg);
    std::vector<double> grid;
    if (opts.grid) {
        grid = *opts.grid;
    } else {
        const std::vector<double> data(agg.data(), agg.data() + agg.size());
        grid = linspace(quantile(data, opts.lower_quantile), quantile(data, opts.upper_quantile), opts.grid_points);
    }
    if (opts.smoother == Smoother::local_linear) return local_linear_smoother(agg, sums, grid, h, opts.min_support);
    return nadaraya_watson(agg, sums, grid, h, opts.min_support);
}

double fhat_slope(const FhatEstimate& est) {
    double mx = 0.0, my = 0.0;
    int m = 0;
    for (std::size_t g = 0; g < est.grid.size(); ++g) {
        if (est.missing(g)) continue;
        mx += est.grid[g];
        my += est.values[g];
        ++m;
    }
    if (m < 2) throw NumericalError("TOO_FEW_POINTS", "slope needs two supported grid points");
    mx /= m;
    my /= m;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t g = 0; g < est.grid.size(); ++g) {
        if (est.missing(g)) continue;
        sxy += (est.grid[g] - mx) * (est.values[g] - my);
        sxx += (est.grid[g] - mx) * (est.grid[g] - mx);
    }
    return sxy / sxx;
}

namespace {

struct LocalFit {
    double intercept = kNaN;
    double slope = kNaN;
    double residual_variance = kNaN;
    int support = 0;
};

LocalFit local_linear(const Eigen::VectorXd& t, const Eigen::VectorXd& s, double at, double h) {
    LocalFit fit;
    double sx = 0.0, sy = 0.0;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (std::abs(t(i) - at) <= h) {
            idx.push_back(i);
            sx += t(i) - at;
            sy += s(i);
        }
    }
    fit.support = static_cast<int>(idx.size());
    if (idx.size() < 3) return fit;
    const double m = static_cast<double>(idx.size());
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (auto i : idx) {
        const double dx = t(i) - at - mx;
        sxx += dx * dx;
        sxy += dx * (s(i) - my);
    }
    if (!(sxx > 0.0)) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (auto i : idx) {
        const double e = s(i) - fit.intercept - fit.slope * (t(i) - at);
        rss += e * e;
    }
    fit.residual_variance = rss / (m - 2.0);
    return fit;
}

}  // namespace

double local_linear_slope(const Eigen::VectorXd& t, const Eigen::VectorXd& s, double at, double h) {
    return local_linear(t, s, at, h).slope;
}

std::vector<ProfilePoint> conditional_variance_profile(const Panel& panel, const MechanismSpec& f,
                                                       const std::vector<double>& grid, double bandwidth,
                                                       int min_support) {
    check_grid(grid);
    if (!(bandwidth > 0.0)) throw SpecError("BAD_BANDWIDTH", "bandwidth must be positive");
    const auto [sums, agg] = mechanism_sums(panel, f);
    std::vector<ProfilePoint> out;
    for (double g : grid) {
        const LocalFit fit = local_linear(agg, sums, g, bandwidth);
        ProfilePoint p;
        p.t = g;
        p.support = fit.support;
        p.variance = fit.support >= min_support ? std::max(0.0, fit.residual_variance) : kNaN;
        out.push_back(p);
    }
    return out;
}

ResidualDiagnostics residual_independence_check(const Panel& panel, const FhatEstimate& fhat, const MechanismSpec& f,
                                                const std::string& effect, double alpha, const HsicOptions& hsic) {
    const int e = panel.index_of(effect);
    if (e < 0) throw SpecError("UNKNOWN_VARIABLE", "panel has no variable '" + effect + "'");
    const auto [sums, agg] = mechanism_sums(panel, f);
    std::vector<double> residuals, causes;
    for (int r = 0; r < panel.n(); ++r) {
        const auto value = fhat.at(agg(r));
        if (!value) continue;
        double y = 0.0;
        for (int t = 0; t < panel.k(); ++t) y += panel.at(r, t, e);
        residuals.push_back(y - *value);
        causes.push_back(agg(r));
    }
    ResidualDiagnostics out;
    out.coverage = static_cast<double>(residuals.size()) / static_cast<double>(panel.n());
    if (out.coverage < 0.95)
        throw NumericalError("INSUFFICIENT_COVERAGE", "estimate covers only " + std::to_string(out.coverage) +
                                                          " of the aggregated cause");
    const Eigen::Map<const Eigen::VectorXd> res(residuals.data(), static_cast<Eigen::Index>(residuals.size()));
    const Eigen::Map<const Eigen::VectorXd> cau(causes.data(), static_cast<Eigen::Index>(causes.size()));
    out.residuals = residuals;
    out.residual_mean = res.mean();
    out.residual_stderr = sd_of(res) / std::sqrt(static_cast<double>(res.size()));
    const Eigen::VectorXd rc = res.array() - res.mean();
    const Eigen::VectorXd cc = cau.array() - cau.mean();
    out.residual_correlation = rc.dot(cc) / std::sqrt(rc.squaredNorm() * cc.squaredNorm());
    out.independence = hsic_test(res, cau, alpha, hsic);
    out.variance_profile = conditional_variance_profile(panel, f, fhat.grid, fhat.bandwidth);
    return out;
}

RegionReport region_consistency_check(const AlignedModelSpec& spec_a, const AlignedModelSpec& spec_b, int k, int n,
                                      std::uint64_t seed, const RegionOptions& opts) {
    auto mech_a = spec_a.mechanisms.find(opts.effect);
    auto mech_b = spec_b.mechanisms.find(opts.effect);
    if (mech_a == spec_a.mechanisms.end() || mech_b == spec_b.mechanisms.end())
        throw SpecError("UNKNOWN_VARIABLE", "both regions need a mechanism for " + opts.effect);
    if (to_json(mech_a->second.outer) != to_json(mech_b->second.outer) ||
        mech_a->second.inner.size() != mech_b->second.inner.size())
        throw SpecError("MECHANISM_MISMATCH", "regions must share the mechanism");
    for (const auto& [p, fn] : mech_a->second.inner) {
        auto it = mech_b->second.inner.find(p);
        if (it == mech_b->second.inner.end() || to_json(it->second) != to_json(fn))
            throw SpecError("MECHANISM_MISMATCH", "regions must share the mechanism");
    }
    const MechanismSpec& f = mech_a->second;

    const Panel pa = simulate_aligned(spec_a, k, n, derive_seed(seed, 1));
    const Panel pb = simulate_aligned(spec_b, k, n, derive_seed(seed, 2));
    const auto [sa, ta] = mechanism_sums(pa, f);
    const auto [sb, tb] = mechanism_sums(pb, f);
    const std::vector<double> va(ta.data(), ta.data() + ta.size());
    const std::vector<double> vb(tb.data(), tb.data() + tb.size());
    const double lo = std::max(quantile(va, opts.lower_quantile), quantile(vb, opts.lower_quantile));
    const double hi = std::min(quantile(va, opts.upper_quantile), quantile(vb, opts.upper_quantile));
    if (!(hi > lo)) throw SpecError("DISJOINT_SUPPORT", "regions have disjoint supports");
    const std::vector<double> grid = linspace(lo, hi, opts.grid_points);

    RegionReport rep;
    const double ha = silverman_bandwidth(ta), hb = silverman_bandwidth(tb);
    rep.fhat_a = nadaraya_watson(ta, sa, grid, ha);
    rep.fhat_b = nadaraya_watson(tb, sb, grid, hb);

    auto bootstrap_se = [&](const Eigen::VectorXd& t, const Eigen::VectorXd& s, double h, std::uint64_t stream) {
        Rng rng(derive_seed(seed, 3, stream));
        std::uniform_int_distribution<Eigen::Index> pick(0, t.size() - 1);
        std::vector<double> sum(grid.size(), 0.0), sum2(grid.size(), 0.0);
        std::vector<int> count(grid.size(), 0);
        Eigen::VectorXd bt(t.size()), bs(s.size());
        for (int b = 0; b < opts.bootstrap; ++b) {
            for (Eigen::Index i = 0; i < t.size(); ++i) {
                const Eigen::Index j = pick(rng);
                bt(i) = t(j);
                bs(i) = s(j);
            }
            const FhatEstimate e = nadaraya_watson(bt, bs, grid, h);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                if (e.missing(g)) continue;
                sum[g] += e.values[g];
                sum2[g] += e.values[g] * e.values[g];
                ++count[g];
            }
        }
        std::vector<double> se(grid.size(), kNaN);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (count[g] < 2) continue;
            const double m = sum[g] / count[g];
            se[g] = std::sqrt(std::max(0.0, (sum2[g] - count[g] * m * m) / (count[g] - 1)));
        }
        return se;
    };
    rep.se_a = bootstrap_se(ta, sa, ha, 1);
    rep.se_b = bootstrap_se(tb, sb, hb, 2);

    const boost::math::normal_distribution<double> normal;
    rep.critical = boost::math::quantile(normal, 1.0 - opts.alpha / (2.0 * static_cast<double>(grid.size())));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (rep.fhat_a.missing(g) || rep.fhat_b.missing(g) || std::isnan(rep.se_a[g]) || std::isnan(rep.se_b[g]))
            continue;
        const double gap = std::abs(rep.fhat_a.values[g] - rep.fhat_b.values[g]);
        rep.max_gap = std::max(rep.max_gap, gap);
        const double se = std::sqrt(rep.se_a[g] * rep.se_a[g] + rep.se_b[g] * rep.se_b[g]);
        if (gap > rep.critical * se) rep.gap_significant = true;
    }
    rep.slope_at_zero_a = local_linear_slope(ta, sa, 0.0, 2.0 * ha);
    rep.slope_at_zero_b = local_linear_slope(tb, sb, 0.0, 2.0 * hb);
    return rep;
}

// ---------------------------------------------------------------------------

std::vector<AsymptoticPoint> asymptotic_equivalence_check(const VarModelSpec& spec, NormalizationSpec norm,
                                                          const std::vector<int>& ks, int reps, std::uint64_t seed) {
    require_valid(spec);
    if (reps < 2) throw SpecError("BAD_ARGUMENT", "need at least two repetitions");
    const int s = spec.dimension;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(s, s);
    const Eigen::MatrixXd inv = (eye - spec.B).inverse();
    const double b = spectral_norm(spec.B);

    std::vector<AsymptoticPoint> out;
    for (int k : ks) {
        if (k < 1) throw SpecError("BAD_ARGUMENT", "k must be positive");
        const double g = norm.g(k);
        std::vector<double> diffs, bounds, noise_norms;
        int dominated = 0;
        for (int r = 0; r < reps; ++r) {
            std::vector<Rng> streams;
            for (int c = 0; c < s; ++c)
                streams.push_back(make_stream(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r),
                                              static_cast<std::uint64_t>(c)));
            auto draw = [&] {
                Eigen::VectorXd v(s);
                for (int c = 0; c < s; ++c) v(c) = spec.noise[c].sample(streams[c]);
                return v;
            };
            const Eigen::VectorXd n0 = draw();
            Eigen::VectorXd x = n0, sum_x = Eigen::VectorXd::Zero(s), sum_y = Eigen::VectorXd::Zero(s);
            double tail = 0.0;  // sum_t b^(k-t+1) |N_t|
            for (int t = 1; t <= k; ++t) {
                const Eigen::VectorXd nt = draw();
                x = spec.B * x + nt;
                sum_x += x;
                sum_y += inv * nt;
                const double nn = nt.norm();
                tail += std::pow(b, k - t + 1) * nn;
                noise_norms.push_back(nn);
            }
            noise_norms.push_back(n0.norm());
            const double diff = (sum_y - sum_x).norm() / g;
            const double bound = (tail + (b - std::pow(b, k + 1)) * n0.norm()) / ((1.0 - b) * g);
            diffs.push_back(diff);
            bounds.push_back(bound);
            if (diff <= bound * (1.0 + 1e-12) + 1e-300) ++dominated;
        }
        AsymptoticPoint p;
        p.k = k;
        p.reps = reps;
        const double m = std::accumulate(diffs.begin(), diffs.end(), 0.0) / reps;
        double v = 0.0;
        for (double d : diffs) v += (d - m) * (d - m);
        v /= reps - 1;
        p.mean = m;
        p.variance = v;
        p.stderr_mean = std::sqrt(v / reps);
        p.bound_mean = std::accumulate(bounds.begin(), bounds.end(), 0.0) / reps;
        const double mu = std::accumulate(noise_norms.begin(), noise_norms.end(), 0.0) / noise_norms.size();
        const double geo = b - std::pow(b, k + 1);
        p.expected_bound = b > 0.0 ? (geo / (1.0 - b) * mu + geo * mu) / ((1.0 - b) * g) : 0.0;
        p.dominated = dominated;
        out.push_back(p);
    }
    return out;
}

double excess_kurtosis(const Eigen::VectorXd& v) {
    const double m = v.mean();
    const Eigen::ArrayXd c = v.array() - m;
    const double m2 = c.square().mean();
    const double m4 = c.square().square().mean();
    if (!(m2 > 0.0)) throw NumericalError("ZERO_VARIANCE", "kurtosis of a constant sample");
    return m4 / (m2 * m2) - 3.0;
}

double noise_excess_kurtosis(const NoiseSpec& noise) {
    return std::visit(
        [](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                return -1.2;
            } else {
                double mean = 0.0;
                for (std::size_t i = 0; i < n.support.size(); ++i) mean += n.probs[i] * n.support[i];
                double m2 = 0.0, m4 = 0.0;
                for (std::size_t i = 0; i < n.support.size(); ++i) {
                    const double d = n.support[i] - mean;
                    m2 += n.probs[i] * d * d;
                    m4 += n.probs[i] * d * d * d * d;
                }
                return m4 / (m2 * m2) - 3.0;
            }
        },
        noise.kind);
}

std::vector<KurtosisPoint> nongaussianity_curve(const NoiseSpec& noise, const std::vector<int>& ks, int n,
                                                std::uint64_t seed) {
    for (auto& v : validate_noise(noise, "noise")) {
        std::string code = "SPEC_";
        for (char c : v.code) code.push_back(c == ' ' ? '_' : static_cast<char>(std::toupper(c)));
        throw SpecError(code, v.message);
    }
    if (n < 4) throw SpecError("BAD_ARGUMENT", "n must be at least 4");
    const double base = noise_excess_kurtosis(noise);
    std::vector<KurtosisPoint> out;
    for (int k : ks) {
        if (k < 1) throw SpecError("BAD_ARGUMENT", "k must be positive");
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
        Eigen::VectorXd sums(n);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += noise.sample(rng);
            sums(i) = acc;
        }
        out.push_back({k, excess_kurtosis(sums), base / k});
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

nlohmann::json nullable(const std::vector<double>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : v) out.push_back(nullable(x));
    return out;
}

}  // namespace

nlohmann::json to_json(const FhatEstimate& f) {
    return {{"grid", f.grid},
            {"values", nullable(f.values)},
            {"support", f.support},
            {"bandwidth", f.bandwidth},
            {"n_used", f.n_used}};
}

nlohmann::json to_json(const std::vector<ProfilePoint>& pts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : pts) out.push_back({{"t", p.t}, {"variance", nullable(p.variance)}, {"support", p.support}});
    return out;
}

nlohmann::json to_json(const ResidualDiagnostics& d) {
    return {{"n_residuals", d.residuals.size()},
            {"coverage", d.coverage},
            {"residual_mean", d.residual_mean},
            {"residual_stderr", d.residual_stderr},
            {"residual_correlation", d.residual_correlation},
            {"independence", to_json(d.independence)},
            {"variance_profile", to_json(d.variance_profile)}};
}

nlohmann::json to_json(const RegionReport& r) {
    return {{"fhat_a", to_json(r.fhat_a)},
            {"fhat_b", to_json(r.fhat_b)},
            {"se_a", nullable(r.se_a)},
            {"se_b", nullable(r.se_b)},
            {"max_gap", r.max_gap},
            {"critical", r.critical},
            {"gap_significant", r.gap_significant},
            {"slope_at_zero_a", nullable(r.slope_at_zero_a)},
            {"slope_at_zero_b", nullable(r.slope_at_zero_b)}};
}

nlohmann::json to_json(const std::vector<AsymptoticPoint>& pts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : pts)
        out.push_back({{"k", p.k},
                       {"mean", p.mean},
                       {"variance", p.variance},
                       {"stderr_mean", p.stderr_mean},
                       {"bound_mean", p.bound_mean},
                       {"expected_bound", p.expected_bound},
                       {"dominated", p.dominated},
                       {"reps", p.reps}});
    return out;
}

nlohmann::json to_json(const std::vector<KurtosisPoint>& pts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : pts)
        out.push_back({{"k", p.k}, {"excess_kurtosis", p.excess_kurtosis}, {"expected", p.expected}});
    return out;
}

std::string fhat_to_csv(const FhatEstimate& f) {
    std::ostringstream os;
    os << "grid,value\n";
    for (std::size_t g = 0; g < f.grid.size(); ++g) {
        os << format_double(f.grid[g]) << ',';
        if (!f.missing(g)) os << format_double(f.values[g]);
        os << '\n';
    }
    return os.str();
}

}  // namespace aggcausal
