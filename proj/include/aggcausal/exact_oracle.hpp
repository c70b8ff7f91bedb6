#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aggcausal/rng.hpp"
#include "aggcausal/scm.hpp"

namespace aggcausal {

constexpr double kLatticeResolution = 1e-9;
constexpr double kStateSpaceLimit = 1e7;

std::int64_t lattice_key(double v);
double lattice_value(std::int64_t key);

/// Exact joint distribution of every V_t, keyed by lattice values. Column
/// `v * k + t` holds variable v at step t + 1.
struct JointTable {
    std::vector<std::string> variables;
    int k = 0;
    std::map<std::vector<std::int64_t>, double> probs;

    std::vector<std::string> column_names() const;
    double total() const;
};

// Every noise (and every initial value feeding a self lag) must be discrete.
JointTable build_joint_table(const AlignedModelSpec& spec, int k);
double state_space_size(const AlignedModelSpec& spec, int k);

// Terms: "S_X" (sum over steps), "X_2" (one step, 1-based), "Y_1:k" (block).
using TermList = std::vector<std::string>;

// Marginal over the concatenated terms.
std::map<std::vector<std::int64_t>, double> marginal(const JointTable& joint, const TermList& terms);

struct CiResult {
    bool holds = false;
    double max_deviation = 0.0;
};

// max |p(a,b,c) - p(a,c) p(b,c) / p(c)| over the support; holds below 1e-10.
CiResult check_ci_exact(const JointTable& joint, const TermList& a, const TermList& b, const TermList& c);

struct ConditionReport {
    bool ci_holds = false;
    double ci_deviation = 0.0;
    double condition_ii_residual = 0.0;
    double condition_iii_residual = 0.0;
    bool equivalence_ok = false;  // (both residuals < 1e-10) == ci_holds
};

// Trivariate layout over X, Y, Z with k >= 2.
ConditionReport check_integral_condition(const JointTable& joint);

struct SufficientConditionReport {
    bool a_holds = false;
    bool b_holds = false;
    bool vi_holds = false;
    bool implication_ok = false;
};

SufficientConditionReport check_sufficient_conditions(const JointTable& joint);

// Sorted CSV: one column per V_t then `probability`.
std::string joint_to_csv(const JointTable& joint);

nlohmann::json to_json(const ConditionReport& r);
nlohmann::json to_json(const SufficientConditionReport& r);

enum class TrivariateShape { fork, chain };

// Ternary noises on small integers and mechanisms drawn from the basic set.
AlignedModelSpec random_discrete_spec(Rng& rng, TrivariateShape shape);

namespace fixtures {

// Square mechanisms on both fork edges; aggregated CI fails.
AlignedModelSpec nonlinear_fork();
// Z = 2 Y + N_Z, X = Y^2 + N_X; aggregated CI holds.
AlignedModelSpec partial_linear_fork();

}  // namespace fixtures

}  // namespace aggcausal
