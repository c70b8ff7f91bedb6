#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aggcausal/graph.hpp"
#include "aggcausal/rng.hpp"

namespace aggcausal {

// ---------------------------------------------------------------------------
// Noise distributions

struct GaussianNoise {
    double mean = 0.0;
    double variance = 1.0;
};

struct UniformNoise {
    double lo = 0.0;
    double hi = 1.0;
};

struct DiscreteNoise {
    std::vector<double> support;
    std::vector<double> probs;
};

struct NoiseSpec {
    std::variant<GaussianNoise, UniformNoise, DiscreteNoise> kind;

    static NoiseSpec gaussian(double mean, double variance) { return {GaussianNoise{mean, variance}}; }
    static NoiseSpec uniform(double lo, double hi) { return {UniformNoise{lo, hi}}; }
    static NoiseSpec discrete(std::vector<double> support, std::vector<double> probs) {
        return {DiscreteNoise{std::move(support), std::move(probs)}};
    }

    bool is_discrete() const { return std::holds_alternative<DiscreteNoise>(kind); }
    bool is_gaussian() const { return std::holds_alternative<GaussianNoise>(kind); }
    double sample(Rng& rng) const;
};

// ---------------------------------------------------------------------------
// Elementwise transforms

enum class FunctionTag { identity, square, cube, tanh, scale };

struct BasicFunction {
    FunctionTag tag = FunctionTag::identity;
    double c = 1.0;  // only meaningful for scale

    static BasicFunction identity() { return {}; }
    static BasicFunction square() { return {FunctionTag::square, 1.0}; }
    static BasicFunction cube() { return {FunctionTag::cube, 1.0}; }
    static BasicFunction tanh() { return {FunctionTag::tanh, 1.0}; }
    static BasicFunction scale(double c) { return {FunctionTag::scale, c}; }

    double operator()(double x) const;
    // identity and scale; these keep a mechanism linear.
    bool is_linear() const { return tag == FunctionTag::identity || tag == FunctionTag::scale; }
    double slope() const { return tag == FunctionTag::scale ? c : 1.0; }
    std::string name() const;
};

/// value = outer( sum_p inner[p](parent_p) + noise )
struct MechanismSpec {
    std::map<std::string, BasicFunction> inner;
    BasicFunction outer;
    NoiseSpec noise = NoiseSpec::gaussian(0.0, 1.0);
};

struct SelfLag {
    BasicFunction function;
    double coefficient = 0.0;
};

/// Instantaneous structural model replicated over k steps. A configured self
/// lag adds `coefficient * function(previous value)` to the pre-outer sum.
struct AlignedModelSpec {
    std::vector<std::string> variables;
    Dag instantaneous_dag;
    std::map<std::string, MechanismSpec> mechanisms;
    std::map<std::string, SelfLag> self_lag;
    std::map<std::string, NoiseSpec> initial;  // value at t=0; 0 when absent
};

/// Linear VAR(1): X_t = B X_{t-1} + N_t.
struct VarModelSpec {
    int dimension = 0;
    Eigen::MatrixXd B;
    std::vector<NoiseSpec> noise;
    int burn_in = 0;
    std::vector<std::string> variables;  // defaults to V1..Vs
};

using ModelSpec = std::variant<AlignedModelSpec, VarModelSpec>;

struct Violation {
    std::string field;
    std::string code;  // "cycle", "zero variance", ...
    std::string message;
};

std::vector<Violation> validate_spec(const AlignedModelSpec& spec);
std::vector<Violation> validate_spec(const VarModelSpec& spec);
std::vector<Violation> validate_noise(const NoiseSpec& noise, const std::string& field);

// Throws SpecError (code derived from the first violation) when invalid.
void require_valid(const AlignedModelSpec& spec);
void require_valid(const VarModelSpec& spec);

double spectral_norm(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Samples

struct Provenance {
    std::string spec_hash;
    std::uint64_t seed = 0;
};

/// n realizations x k steps x s variables, row-major in that order.
class Panel {
public:
    Panel() = default;
    Panel(int n, int k, std::vector<std::string> names);

    int n() const { return n_; }
    int k() const { return k_; }
    int s() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    int index_of(const std::string& name) const;

    double& at(int rep, int t, int v) { return data_[(static_cast<std::size_t>(rep) * k_ + t) * s() + v]; }
    double at(int rep, int t, int v) const { return data_[(static_cast<std::size_t>(rep) * k_ + t) * s() + v]; }
    const std::vector<double>& raw() const { return data_; }

    Provenance provenance;

    // Throws NumericalError on a non-finite entry.
    void check_finite() const;

private:
    int n_ = 0;
    int k_ = 0;
    std::vector<std::string> names_;
    std::vector<double> data_;
};

/// Draws n independent realizations of k steps. Each (realization, variable)
/// pair owns a stream keyed by the variable's name, so declaration order does
/// not change the draws.
Panel simulate_aligned(const AlignedModelSpec& spec, int k, int n, std::uint64_t seed);

/// Returns T x s after discarding burn_in steps; X_0 is a noise draw.
Eigen::MatrixXd simulate_var(const VarModelSpec& spec, int T, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const NoiseSpec& n);
nlohmann::json to_json(const BasicFunction& f);
nlohmann::json to_json(const AlignedModelSpec& spec);
nlohmann::json to_json(const VarModelSpec& spec);

NoiseSpec noise_from_json(const nlohmann::json& j);
BasicFunction function_from_json(const nlohmann::json& j);
AlignedModelSpec aligned_from_json(const nlohmann::json& j);
VarModelSpec var_from_json(const nlohmann::json& j);
// Dispatches on "type": "aligned" | "var" (aligned when absent).
ModelSpec model_from_json(const nlohmann::json& j);

std::string spec_hash(const AlignedModelSpec& spec);
std::string spec_hash(const VarModelSpec& spec);

// Header `rep,t,<names>`; rep and t are 1-based.
std::string panel_to_csv(const Panel& panel);
Panel panel_from_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Model library used by the experiments and tests

namespace models {

// X_t = N_X, Y_t = N_Y (or per the spec's mechanisms): building blocks.
MechanismSpec root(NoiseSpec noise);
MechanismSpec linear(const std::map<std::string, double>& coefs, NoiseSpec noise);

AlignedModelSpec make_aligned(std::vector<std::string> variables,
                              std::map<std::string, MechanismSpec> mechanisms);

// Y = slope * X + N_Y with X = N_X.
AlignedModelSpec bivariate_linear(double slope, NoiseSpec nx, NoiseSpec ny);
// Y = f(X) + N_Y with X = N_X.
AlignedModelSpec bivariate_additive(BasicFunction f, NoiseSpec nx, NoiseSpec ny);

// Y -> X and Y -> Z with X = fx(Y, N_X), Z = fz(Y, N_Z).
AlignedModelSpec fork(MechanismSpec x_from_y, MechanismSpec z_from_y, NoiseSpec ny);
// X -> Y -> Z.
AlignedModelSpec chain(MechanismSpec y_from_x, MechanismSpec z_from_y, NoiseSpec nx);
// X -> Y <- Z.
AlignedModelSpec collider(MechanismSpec y_from_xz, NoiseSpec nx, NoiseSpec nz);

// Z = X + Y + N_Z, H = Z + N_H (linear) or squares (nonlinear); unit Gaussian
// noises unless overridden.
AlignedModelSpec four_variable(bool nonlinear, double var_nx = 1.0, double var_nz = 1.0);

}  // namespace models

}  // namespace aggcausal
