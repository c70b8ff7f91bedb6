#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aggcausal/aggregation.hpp"
#include "aggcausal/discovery.hpp"
#include "aggcausal/error.hpp"
#include "aggcausal/exact_oracle.hpp"
#include "aggcausal/experiments.hpp"
#include "aggcausal/io.hpp"
#include "aggcausal/scm.hpp"
#include "aggcausal/stat_tests.hpp"
#include "aggcausal/theory_checks.hpp"

using namespace aggcausal;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError("BAD_JSON", path + ": " + e.what());
    }
}

void emit(const std::string& out, const std::string& bytes) {
    if (out.empty() || out == "-") {
        std::cout << bytes;
    } else {
        write_file(out, bytes);
    }
}

std::uint64_t require_seed(const CLI::Option* opt, std::uint64_t value) {
    if (opt->count() == 0) throw SpecError("MISSING_SEED", "--seed is required for this subcommand");
    return value;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(trim(part));
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (const auto& part : split_list(s)) {
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw SpecError("BAD_ARGUMENT", "not an integer list: " + s);
        }
    }
    return out;
}

int column_of(const AggregatedDataset& d, const std::string& name) {
    const int idx = d.index_of(name);
    if (idx < 0) throw SpecError("UNKNOWN_VARIABLE", "dataset has no column " + name);
    return idx;
}

AlignedModelSpec aligned_spec(const std::string& path) {
    const ModelSpec spec = model_from_json(read_json(path));
    if (!std::holds_alternative<AlignedModelSpec>(spec)) throw SpecError("WRONG_MODEL_TYPE", path + " is not an aligned model");
    return std::get<AlignedModelSpec>(spec);
}

const MechanismSpec& mechanism_of(const AlignedModelSpec& spec, const std::string& effect) {
    auto it = spec.mechanisms.find(effect);
    if (it == spec.mechanisms.end()) throw SpecError("UNKNOWN_VARIABLE", "spec has no mechanism for " + effect);
    return it->second;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and benchmark harness for causal discovery on temporally aggregated data"};
    app.require_subcommand(1, 1);

    std::string spec_path, panel_path, data_path, config_path, out_path, prior_path;
    std::string norm_name = "one", test_name = "fisher_z", method = "pc", x_name, y_name, given;
    std::string effect = "Y", ks_text, smoother = "nadaraya_watson", spec_b_path;
    std::uint64_t seed = 0;
    int n = 1000, k = 2, length = 1000, window = 0, permutations = 0, parallel = 1, reps = 200, count = 100;
    double alpha = 0.05;

    // generate
    auto* gen = app.add_subcommand("generate", "Simulate a model spec into a panel CSV");
    gen->add_option("--spec", spec_path, "Model spec JSON")->required();
    gen->add_option("--n", n, "Realizations (aligned models)");
    gen->add_option("--k", k, "Steps per realization (aligned models)");
    gen->add_option("--length", length, "Series length (VAR models)");
    auto* gen_seed = gen->add_option("--seed", seed, "Master seed");
    gen->add_option("--out", out_path, "Output CSV (stdout when absent)");

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Aggregate a panel CSV into a dataset CSV");
    agg->add_option("--panel", panel_path, "Panel CSV")->required();
    agg->add_option("--norm", norm_name, "Normalization: one, k or sqrt_k");
    agg->add_option("--window", window, "Aggregate each realization in windows of this length");
    agg->add_option("--out", out_path, "Output CSV (stdout when absent)");

    // citest
    auto* cit = app.add_subcommand("citest", "Run one (conditional) independence test");
    cit->add_option("--data", data_path, "Dataset CSV")->required();
    cit->add_option("--x", x_name, "First variable")->required();
    cit->add_option("--y", y_name, "Second variable")->required();
    cit->add_option("--given", given, "Comma-separated conditioning variables");
    cit->add_option("--test", test_name, "fisher_z, kci or hsic");
    cit->add_option("--alpha", alpha, "Significance level");
    cit->add_option("--permutations", permutations, "Permutation null instead of the gamma approximation");
    auto* cit_seed = cit->add_option("--seed", seed, "Seed for kernel tests");
    cit->add_option("--out", out_path, "Output JSON (stdout when absent)");

    // discover
    auto* disc = app.add_subcommand("discover", "Run a discovery method on a dataset");
    disc->add_option("--data", data_path, "Dataset CSV")->required();
    disc->add_option("--method", method, "pc, score_search, direct_lingam or anm");
    disc->add_option("--test", test_name, "CI test for pc: fisher_z or kci");
    disc->add_option("--alpha", alpha, "Significance level for pc");
    disc->add_option("--prior", prior_path, "Skeleton prior JSON: {\"edges\": [[a, b], ...]}");
    disc->add_option("--x", x_name, "Cause candidate for bivariate methods");
    disc->add_option("--y", y_name, "Effect candidate for bivariate methods");
    auto* disc_seed = disc->add_option("--seed", seed, "Seed for kernel-based methods");
    disc->add_option("--out", out_path, "Output JSON (stdout when absent)");

    // check
    auto* chk = app.add_subcommand("check", "Theory checks and the exact oracle");
    chk->require_subcommand(1, 1);
    auto* chk_oracle = chk->add_subcommand("oracle", "Exact CI conditions on a discrete aligned spec");
    chk_oracle->add_option("--spec", spec_path, "Discrete aligned spec JSON")->required();
    chk_oracle->add_option("--k", k, "Aggregation factor");
    chk_oracle->add_option("--table-out", panel_path, "Write the joint table CSV here");
    chk_oracle->add_option("--out", out_path, "Output JSON (stdout when absent)");
    auto* chk_random = chk->add_subcommand("oracle-random", "Exact checks on random discrete fork/chain specs");
    chk_random->add_option("--count", count, "Number of specs");
    chk_random->add_option("--k", k, "Aggregation factor");
    auto* random_seed = chk_random->add_option("--seed", seed, "Master seed");
    chk_random->add_option("--out", out_path, "Output JSON (stdout when absent)");
    auto* chk_fhat = chk->add_subcommand("fhat", "Estimate the aggregated mechanism");
    chk_fhat->add_option("--spec", spec_path, "Aligned spec JSON")->required();
    chk_fhat->add_option("--effect", effect, "Effect variable whose mechanism is aggregated");
    chk_fhat->add_option("--k", k, "Aggregation factor");
    chk_fhat->add_option("--n", n, "Realizations");
    chk_fhat->add_option("--smoother", smoother, "nadaraya_watson or local_linear");
    auto* fhat_seed = chk_fhat->add_option("--seed", seed, "Master seed");
    chk_fhat->add_option("--out", out_path, "Output CSV (stdout when absent)");
    auto* chk_resid = chk->add_subcommand("residual", "Residual independence of the aggregated mechanism");
    chk_resid->add_option("--spec", spec_path, "Aligned spec JSON")->required();
    chk_resid->add_option("--effect", effect, "Effect variable");
    chk_resid->add_option("--k", k, "Aggregation factor");
    chk_resid->add_option("--n", n, "Realizations");
    chk_resid->add_option("--alpha", alpha, "Significance level");
    chk_resid->add_option("--smoother", smoother, "nadaraya_watson or local_linear");
    auto* resid_seed = chk_resid->add_option("--seed", seed, "Master seed");
    chk_resid->add_option("--out", out_path, "Output JSON (stdout when absent)");
    auto* chk_region = chk->add_subcommand("region", "Compare aggregated mechanisms of two specs");
    chk_region->add_option("--spec", spec_path, "First aligned spec JSON")->required();
    chk_region->add_option("--spec-b", spec_b_path, "Second aligned spec JSON")->required();
    chk_region->add_option("--effect", effect, "Effect variable");
    chk_region->add_option("--k", k, "Aggregation factor");
    chk_region->add_option("--n", n, "Realizations");
    chk_region->add_option("--alpha", alpha, "Significance level");
    auto* region_seed = chk_region->add_option("--seed", seed, "Master seed");
    chk_region->add_option("--out", out_path, "Output JSON (stdout when absent)");
    auto* chk_asym = chk->add_subcommand("asymptotic", "Aggregated VAR vs aligned model across k");
    chk_asym->add_option("--spec", spec_path, "VAR spec JSON")->required();
    chk_asym->add_option("--ks", ks_text, "Comma-separated k values")->required();
    chk_asym->add_option("--reps", reps, "Realizations per k");
    chk_asym->add_option("--norm", norm_name, "Normalization: one, k or sqrt_k");
    auto* asym_seed = chk_asym->add_option("--seed", seed, "Master seed");
    chk_asym->add_option("--out", out_path, "Output JSON (stdout when absent)");
    auto* chk_kurt = chk->add_subcommand("kurtosis", "Excess kurtosis of aggregated noise across k");
    chk_kurt->add_option("--noise", spec_path, "Noise JSON")->required();
    chk_kurt->add_option("--ks", ks_text, "Comma-separated k values")->required();
    chk_kurt->add_option("--n", n, "Samples per k");
    auto* kurt_seed = chk_kurt->add_option("--seed", seed, "Master seed");
    chk_kurt->add_option("--out", out_path, "Output JSON (stdout when absent)");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run an experiment config and write its report");
    exp->add_option("--config", config_path, "Experiment config JSON")->required();
    auto* exp_seed = exp->add_option("--seed", seed, "Master seed (overrides the config)");
    exp->add_option("--out", out_path, "Report directory")->required();
    exp->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("list-experiments", "List experiments with their default parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "error: USAGE: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*gen) {
            const std::uint64_t s = require_seed(gen_seed, seed);
            const ModelSpec spec = model_from_json(read_json(spec_path));
            Panel panel;
            if (const auto* aligned = std::get_if<AlignedModelSpec>(&spec)) {
                require_valid(*aligned);
                panel = simulate_aligned(*aligned, k, n, s);
            } else {
                const auto& var = std::get<VarModelSpec>(spec);
                require_valid(var);
                const Eigen::MatrixXd series = simulate_var(var, length, s);
                std::vector<std::string> names = var.variables;
                if (names.empty())
                    for (int i = 0; i < var.dimension; ++i) names.push_back("V" + std::to_string(i + 1));
                panel = Panel(1, length, names);
                for (int t = 0; t < length; ++t)
                    for (int v = 0; v < var.dimension; ++v) panel.at(0, t, v) = series(t, v);
                panel.provenance = {spec_hash(var), s};
            }
            emit(out_path, panel_to_csv(panel));
            if (!out_path.empty() && out_path != "-")
                write_file(out_path + ".meta.json",
                           json{{"seed", s}, {"spec_hash", panel.provenance.spec_hash}}.dump(2) + "\n");
        } else if (*agg) {
            const Panel panel = panel_from_csv(read_file(panel_path));
            const NormalizationSpec norm = NormalizationSpec::parse(norm_name);
            AggregatedDataset d;
            if (window > 0) {
                if (panel.n() != 1) throw SpecError("BAD_ARGUMENT", "--window needs a single-realization panel");
                Eigen::MatrixXd series(panel.k(), panel.s());
                for (int t = 0; t < panel.k(); ++t)
                    for (int v = 0; v < panel.s(); ++v) series(t, v) = panel.at(0, t, v);
                d = aggregate_series(series, window, norm, panel.names());
            } else {
                d = aggregate_panel(panel, norm);
            }
            emit(out_path, dataset_to_csv(d));
        } else if (*cit) {
            const AggregatedDataset d = dataset_from_csv(read_file(data_path));
            const int i = column_of(d, x_name), j = column_of(d, y_name);
            std::vector<int> cond;
            for (const auto& g : split_list(given)) cond.push_back(column_of(d, g));
            TestResult r;
            json out{{"x", x_name}, {"y", y_name}, {"given", split_list(given)}, {"test", test_name}};
            if (test_name == "fisher_z") {
                r = fisher_z_test(d.data, i, j, cond, alpha);
            } else if (test_name == "kci") {
                KciOptions o;
                o.seed = require_seed(cit_seed, seed);
                o.permutations = permutations;
                for (const auto& name : d.names) o.column_keys.push_back(name_key(name));
                r = kci_test(d.data, i, j, cond, alpha, o);
                out["seed"] = o.seed;
            } else if (test_name == "hsic") {
                if (!cond.empty()) throw SpecError("BAD_ARGUMENT", "hsic does not take --given");
                HsicOptions o;
                o.seed = require_seed(cit_seed, seed);
                o.permutations = permutations;
                r = hsic_test(d.data.col(i), d.data.col(j), alpha, o);
                out["seed"] = o.seed;
            } else {
                throw SpecError("UNKNOWN_TEST", "unknown test '" + test_name + "'");
            }
            out["result"] = to_json(r);
            emit(out_path, out.dump(2) + "\n");
        } else if (*disc) {
            const AggregatedDataset d = dataset_from_csv(read_file(data_path));
            json out;
            if (method == "pc") {
                PcOptions o;
                o.test = parse_ci_test(test_name);
                o.alpha = alpha;
                if (o.test == CiTestKind::kci) o.kci.seed = require_seed(disc_seed, seed);
                if (!prior_path.empty()) {
                    std::set<Edge> prior;
                    for (const auto& e : read_json(prior_path).at("edges"))
                        prior.insert(unordered(column_of(d, e.at(0).get<std::string>()), column_of(d, e.at(1).get<std::string>())));
                    o.skeleton_prior = prior;
                }
                out = to_json(pc_discover(d, o));
                if (o.test == CiTestKind::kci) out["seed"] = o.kci.seed;
            } else if (method == "score_search") {
                out = to_json(score_search(d));
            } else if (method == "direct_lingam" || method == "anm") {
                if (d.s() < 2) throw SpecError("BAD_ARGUMENT", "bivariate methods need two columns");
                const int i = x_name.empty() ? 0 : column_of(d, x_name);
                const int j = y_name.empty() ? 1 : column_of(d, y_name);
                const std::uint64_t s = require_seed(disc_seed, seed);
                DirectionVerdict v;
                if (method == "direct_lingam") {
                    LingamOptions o;
                    o.seed = s;
                    v = direct_lingam_direction(d.data.col(i), d.data.col(j), o);
                } else {
                    AnmOptions o;
                    o.hsic.seed = s;
                    v = anm_direction(d.data.col(i), d.data.col(j), o);
                }
                out = to_json(v);
                out["x"] = d.names[i];
                out["y"] = d.names[j];
                out["seed"] = s;
            } else {
                throw SpecError("UNKNOWN_METHOD", "unknown method '" + method + "'");
            }
            out["method"] = method;
            emit(out_path, out.dump(2) + "\n");
        } else if (*chk) {
            if (*chk_oracle) {
                const JointTable joint = build_joint_table(aligned_spec(spec_path), k);
                if (!panel_path.empty()) write_file(panel_path, joint_to_csv(joint));
                json out{{"k", k}, {"states", joint.probs.size()}, {"sufficient", to_json(check_sufficient_conditions(joint))}};
                if (k >= 2) out["condition"] = to_json(check_integral_condition(joint));
                emit(out_path, out.dump(2) + "\n");
            } else if (*chk_random) {
                const std::uint64_t s = require_seed(random_seed, seed);
                Rng rng(s);
                int counterexamples = 0, implication_failures = 0, ci_holds = 0;
                json specs = json::array();
                for (int i = 0; i < count; ++i) {
                    const AlignedModelSpec spec =
                        random_discrete_spec(rng, i % 2 == 0 ? TrivariateShape::fork : TrivariateShape::chain);
                    const JointTable joint = build_joint_table(spec, k);
                    const ConditionReport c = check_integral_condition(joint);
                    const SufficientConditionReport cor = check_sufficient_conditions(joint);
                    counterexamples += c.equivalence_ok ? 0 : 1;
                    implication_failures += cor.implication_ok ? 0 : 1;
                    ci_holds += c.ci_holds ? 1 : 0;
                    if (!c.equivalence_ok || !cor.implication_ok)
                        specs.push_back({{"spec", to_json(spec)}, {"condition", to_json(c)}, {"sufficient", to_json(cor)}});
                }
                emit(out_path, json{{"seed", s},
                                    {"count", count},
                                    {"k", k},
                                    {"ci_holds", ci_holds},
                                    {"counterexamples", counterexamples},
                                    {"implication_failures", implication_failures},
                                    {"failing_specs", specs}}
                                       .dump(2) +
                                   "\n");
            } else if (*chk_fhat || *chk_resid) {
                const std::uint64_t s = require_seed(*chk_fhat ? fhat_seed : resid_seed, seed);
                const AlignedModelSpec spec = aligned_spec(spec_path);
                const MechanismSpec& mech = mechanism_of(spec, effect);
                const Panel panel = simulate_aligned(spec, k, n, s);
                FhatOptions fo;
                if (smoother == "local_linear") fo.smoother = Smoother::local_linear;
                else if (smoother != "nadaraya_watson") throw SpecError("BAD_ARGUMENT", "unknown smoother '" + smoother + "'");
                const FhatEstimate fhat = estimate_fhat(panel, mech, fo);
                if (*chk_fhat) {
                    emit(out_path, fhat_to_csv(fhat));
                } else {
                    HsicOptions h;
                    h.seed = derive_seed(s, 1);
                    json out = to_json(residual_independence_check(panel, fhat, mech, effect, alpha, h));
                    out["seed"] = s;
                    emit(out_path, out.dump(2) + "\n");
                }
            } else if (*chk_region) {
                const std::uint64_t s = require_seed(region_seed, seed);
                RegionOptions o;
                o.alpha = alpha;
                o.effect = effect;
                json out = to_json(region_consistency_check(aligned_spec(spec_path), aligned_spec(spec_b_path), k, n, s, o));
                out["seed"] = s;
                emit(out_path, out.dump(2) + "\n");
            } else if (*chk_asym) {
                const std::uint64_t s = require_seed(asym_seed, seed);
                const ModelSpec spec = model_from_json(read_json(spec_path));
                if (!std::holds_alternative<VarModelSpec>(spec)) throw SpecError("WRONG_MODEL_TYPE", spec_path + " is not a VAR model");
                const auto pts = asymptotic_equivalence_check(std::get<VarModelSpec>(spec), NormalizationSpec::parse(norm_name),
                                                              parse_ints(ks_text), reps, s);
                emit(out_path, json{{"seed", s}, {"points", to_json(pts)}}.dump(2) + "\n");
            } else if (*chk_kurt) {
                const std::uint64_t s = require_seed(kurt_seed, seed);
                const NoiseSpec noise = noise_from_json(read_json(spec_path));
                emit(out_path, json{{"seed", s}, {"points", to_json(nongaussianity_curve(noise, parse_ints(ks_text), n, s))}}.dump(2) + "\n");
            }
        } else if (*exp) {
            const std::uint64_t s = require_seed(exp_seed, seed);
            ExperimentConfig config = config_from_json(read_json(config_path));
            config.seed = s;
            const ExperimentReport report = run_experiment(config, RunOptions{parallel});
            const auto manifest = write_report(report, out_path);
            json files = json::array();
            for (const auto& e : manifest) files.push_back({{"path", e.path}, {"sha256", e.sha256}});
            std::cout << json{{"experiment", config.name}, {"seed", s}, {"files", files}}.dump(2) << "\n";
            std::cerr << "wall_clock_seconds " << report.wall_clock_seconds << "\n";
        } else if (*list) {
            json out = json::object();
            for (const auto& name : experiment_names()) out[name] = default_params(name);
            std::cout << out.dump(2) << "\n";
        }
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: BAD_JSON: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: INTERNAL: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
