// Command-line front end: select, compare, bench, evolve.
//
// Exit codes: 0 success, 2 parse error, 3 shape error, 4 config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dalex/bench.hpp"
#include "dalex/config.hpp"
#include "dalex/core.hpp"
#include "dalex/errors.hpp"
#include "dalex/evolve.hpp"
#include "dalex/metrics.hpp"
#include "dalex/oracle.hpp"
#include "dalex/selectors.hpp"

namespace fs = std::filesystem;
using namespace dalex;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitShape = 3;
constexpr int kExitConfig = 4;

struct MatrixArgs {
    std::string errors;
    std::string support;
};

std::pair<ErrorMatrix, SupportMatrix> load_matrices(const MatrixArgs& args)
{
    auto errors = read_errors_csv(args.errors);
    auto support = args.support.empty() ? SupportMatrix::full(errors.rows(), errors.cols())
                                        : read_support_csv(args.support);
    check_pair(errors, support);
    return {std::move(errors), std::move(support)};
}

SelectorConfig base_selector(const std::string& config_path)
{
    if (config_path.empty()) {
        return {};
    }
    return load_run_config(config_path).evolution.selector;
}

std::string method_label(const SelectorConfig& cfg)
{
    std::string out(to_string(cfg.method));
    if (cfg.method == Method::Dalex) {
        out += ":pressure=" + format_double(cfg.pressure);
        out += ":distribution=" + std::string(to_string(cfg.distribution));
        if (cfg.relaxed) {
            out += ":relaxed=true";
        }
    } else if (cfg.method == Method::BatchLexicase) {
        out += ":batch_size=" + std::to_string(cfg.batch_size);
        out += ":batch_threshold_mode=" + std::string(to_string(cfg.threshold_mode));
        if (cfg.threshold_mode == ThresholdMode::Absolute) {
            out += ":batch_threshold_value=" + format_double(cfg.threshold_value);
        }
    }
    return out;
}

// ---- select ---------------------------------------------------------------

struct SelectArgs {
    MatrixArgs matrices;
    std::string config;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::optional<Index> count;
    bool distribution = false;
};

int run_select(const SelectArgs& args)
{
    auto cfg = base_selector(args.config);
    if (!args.method.empty()) {
        cfg = parse_method_spec(args.method, cfg);
    }
    if (args.seed) {
        cfg.seed = *args.seed;
    }
    const auto [errors, support] = load_matrices(args.matrices);
    const Index count = args.count.value_or(errors.rows());
    const auto picks = select_individuals(errors, support, count, cfg, RandomSource(cfg.seed));
    if (args.distribution) {
        if (picks.empty()) {
            throw ConfigError("'count' must be at least 1 for a distribution");
        }
        std::cout << empirical_distribution(picks, errors.rows()).to_json().dump() << '\n';
    } else {
        for (Index p : picks) {
            std::cout << p << '\n';
        }
    }
    return 0;
}

// ---- compare --------------------------------------------------------------

struct CompareArgs {
    MatrixArgs matrices;
    std::vector<std::string> methods;
    std::string reference = "lexicase";
    Index samples = 100000;
    std::uint64_t seed = 0;
    bool empirical_fallback = false;
    bool empirical = false;
    std::vector<Index> lineage;
};

int run_compare(const CompareArgs& args)
{
    const auto [errors, support] = load_matrices(args.matrices);
    const auto classing = build_classes(errors, support);
    const auto mode = args.empirical            ? ReferenceMode::Empirical
                      : args.empirical_fallback ? ReferenceMode::ExactOrEmpirical
                                                : ReferenceMode::Exact;
    const RandomSource root(args.seed);
    auto ref_cfg = parse_method_spec(args.reference);
    ref_cfg.seed = args.seed;
    std::vector<SelectorConfig> candidates;
    for (const auto& spec : args.methods) {
        auto cfg = parse_method_spec(spec);
        cfg.seed = args.seed;
        candidates.push_back(cfg);
    }
    for (Index id : args.lineage) {
        if (id >= errors.rows()) {
            throw ShapeError("lineage id " + std::to_string(id) + " out of range");
        }
    }
    std::vector<Index> class_of(errors.rows());
    for (Index c = 0; c < classing.k(); ++c) {
        for (Index i : classing.members[c]) {
            class_of[i] = c;
        }
    }

    const auto reference = method_distribution(classing, ref_cfg, args.samples, mode,
                                               root.derive(0));
    nlohmann::json out;
    out["reference"] = {{"method", method_label(ref_cfg)},
                        {"kind", reference.kind == SelectionDistribution::Kind::Exact
                                     ? "exact"
                                     : "empirical"}};
    out["individuals"] = errors.rows();
    out["classes"] = classing.k();
    out["seed"] = args.seed;
    out["results"] = nlohmann::json::array();
    for (Index c = 0; c < candidates.size(); ++c) {
        const auto& cfg = candidates[c];
        const auto dist = cfg.to_key_values() == ref_cfg.to_key_values()
                              ? reference
                              : method_distribution(classing, cfg, args.samples, mode,
                                                    root.derive(c + 1));
        nlohmann::json row;
        row["method"] = method_label(cfg);
        row["kind"] = dist.kind == SelectionDistribution::Kind::Exact ? "exact" : "empirical";
        if (dist.kind == SelectionDistribution::Kind::Empirical) {
            row["n_samples"] = dist.n_samples;
        }
        row["js_divergence"] = js_divergence(reference.probs, dist.probs);
        if (!args.lineage.empty()) {
            nlohmann::json ratios = nlohmann::json::object();
            for (Index id : args.lineage) {
                const Index cls = class_of[id];
                const auto r = probability_ratio(dist.probs[cls], reference.probs[cls]);
                ratios[std::to_string(id)] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
            }
            row["probability_ratios"] = ratios;
        }
        out["results"].push_back(row);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    std::vector<Index> n{1000};
    std::vector<Index> m{200};
    std::vector<std::string> methods{"dalex:pressure=200", "lexicase"};
    std::vector<std::string> regimes{"continuous_all_distinct"};
    Index repetitions = 5;
    std::uint64_t seed = 0;
    std::string output;
    bool omit_timing = false;
};

int run_bench(const BenchArgs& args)
{
    if (args.n.empty() || args.m.empty() || args.methods.empty() || args.regimes.empty()) {
        throw ConfigError("benchmark grid is empty");
    }
    std::vector<SelectorConfig> methods;
    for (const auto& spec : args.methods) {
        methods.push_back(parse_method_spec(spec));
    }
    std::vector<Regime> regimes;
    for (const auto& r : args.regimes) {
        regimes.push_back(parse_regime(r));
    }
    std::ofstream file;
    if (!args.output.empty()) {
        file.open(args.output);
        if (!file) {
            throw ConfigError("cannot write '" + args.output + "'");
        }
    }
    std::ostream& out = args.output.empty() ? std::cout : file;
    write_bench_header(out, !args.omit_timing);
    for (Regime regime : regimes) {
        for (Index n : args.n) {
            for (Index m : args.m) {
                for (const auto& cfg : methods) {
                    const auto rec = bench_cell(cfg, n, m, regime, args.repetitions, args.seed);
                    write_bench_row(out, rec, !args.omit_timing);
                }
            }
        }
    }
    return 0;
}

// ---- evolve ---------------------------------------------------------------

struct EvolveArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output;
};

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    return out;
}

int run_evolve(const EvolveArgs& args)
{
    auto cfg = load_run_config(args.config);
    if (args.seed) {
        cfg.evolution.seed = *args.seed;
        cfg.evolution.selector.seed = *args.seed;
    }
    std::error_code ec;
    fs::create_directories(args.output, ec);
    if (ec) {
        throw ConfigError("cannot create output directory '" + args.output + "'");
    }
    const fs::path dir(args.output);
    auto generations = open_output(dir / "generations.jsonl");
    auto summary = open_output(dir / "summary.csv");
    summary << "seed,success,generations_to_success";
    if (cfg.record_timing) {
        summary << ",mean_selection_seconds";
    }
    summary << '\n';

    std::ofstream fidelity_lines;
    std::vector<std::vector<FidelityReport>> fidelity_runs;
    if (cfg.fidelity) {
        fidelity_lines = open_output(dir / "fidelity.jsonl");
    }

    for (Index r = 0; r < cfg.runs; ++r) {
        auto ev = cfg.evolution;
        ev.seed = cfg.evolution.seed + r;
        RunResult run;
        if (cfg.fidelity) {
            auto trace = fidelity_trace(ev, *cfg.fidelity);
            for (const auto& report : trace.reports) {
                auto j = report.to_json();
                j["run"] = r;
                fidelity_lines << j.dump() << '\n';
            }
            fidelity_runs.push_back(std::move(trace.reports));
            run = std::move(trace.run);
        } else {
            run = run_evolution(ev);
        }
        for (const auto& rec : run.records) {
            auto j = rec.to_json(cfg.record_timing);
            j["run"] = r;
            generations << j.dump() << '\n';
        }
        summary << ev.seed << ',' << (run.success ? "true" : "false") << ',';
        if (run.success_generation) {
            summary << *run.success_generation;
        }
        if (cfg.record_timing) {
            summary << ',' << format_double(run.mean_selection_seconds());
        }
        summary << '\n';
    }

    if (cfg.fidelity) {
        const auto agg = aggregate_runs(fidelity_runs, cfg.resamples, cfg.evolution.seed);
        auto out = open_output(dir / "fidelity_summary.json");
        out << agg.to_json().dump(2) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"DALex and lexicase-family parent selection toolkit"};
    app.require_subcommand(1);

    SelectArgs select_args;
    auto* select = app.add_subcommand("select", "Select parents from an error matrix");
    select->add_option("--errors", select_args.matrices.errors, "Error matrix CSV")->required();
    select->add_option("--support", select_args.matrices.support, "Support mask CSV");
    select->add_option("--config", select_args.config, "Config file with a [selector] section");
    select->add_option("--method", select_args.method,
                       "Method spec, e.g. dalex:pressure=200 (overrides the config)");
    select->add_option("--seed", select_args.seed, "Random seed");
    select->add_option("--count", select_args.count, "Number of selections (default: rows)");
    select->add_flag("--distribution", select_args.distribution,
                     "Print the empirical distribution as JSON instead of indices");

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "Compare selection distributions");
    compare->add_option("--errors", compare_args.matrices.errors, "Error matrix CSV")->required();
    compare->add_option("--support", compare_args.matrices.support, "Support mask CSV");
    compare->add_option("--method", compare_args.methods, "Candidate method spec (repeatable)")
        ->required();
    compare->add_option("--reference", compare_args.reference, "Reference method spec");
    compare->add_option("--samples", compare_args.samples, "Samples per empirical distribution");
    compare->add_option("--seed", compare_args.seed, "Random seed");
    compare->add_option("--lineage", compare_args.lineage,
                        "Individual ids whose probability ratios are reported");
    compare->add_flag("--empirical-fallback", compare_args.empirical_fallback,
                      "Sample the reference when the instance is too large for the oracle");
    compare->add_flag("--empirical", compare_args.empirical, "Never use the exact oracle");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time batched selection events");
    bench->add_option("--n", bench_args.n, "Population sizes")->delimiter(',');
    bench->add_option("--m", bench_args.m, "Case counts")->delimiter(',');
    bench->add_option("--method", bench_args.methods, "Method specs (repeatable)");
    bench->add_option("--regime", bench_args.regimes,
                      "discrete | continuous_all_distinct | partial_support")
        ->delimiter(',');
    bench->add_option("--repetitions", bench_args.repetitions, "Timed repetitions (>= 3)");
    bench->add_option("--seed", bench_args.seed, "Random seed");
    bench->add_option("--output", bench_args.output, "CSV output path (default: stdout)");
    bench->add_flag("--omit-timing", bench_args.omit_timing,
                    "Leave out timing columns (for reproducibility checks)");

    EvolveArgs evolve_args;
    auto* evolve = app.add_subcommand("evolve", "Run the evolutionary harness");
    evolve->add_option("--config", evolve_args.config, "Config file")->required();
    evolve->add_option("--seed", evolve_args.seed, "Base seed (overrides the config)");
    evolve->add_option("--output", evolve_args.output, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*select) {
            return run_select(select_args);
        }
        if (*compare) {
            return run_compare(compare_args);
        }
        if (*bench) {
            return run_bench(bench_args);
        }
        return run_evolve(evolve_args);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << '\n';
        return kExitShape;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const GuardError& e) {
        std::cerr << "config error: " << e.what()
                  << " (pass --empirical-fallback to sample instead)\n";
        return kExitConfig;
    }
}
