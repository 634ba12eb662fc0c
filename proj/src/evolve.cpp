#include "dalex/evolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "dalex/errors.hpp"

namespace dalex {

namespace {

constexpr double kVectorWorstError = 1000.0;
constexpr double kContinuousStep = 0.5;

// Derivation tags for the per-run random streams.
constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kGenerationTag = 2;
constexpr std::uint64_t kSelectTag = 1;
constexpr std::uint64_t kMutateTag = 2;
constexpr std::uint64_t kDownsampleTag = 3;
constexpr std::uint64_t kReferenceTag = 4;
constexpr std::uint64_t kCandidateTag = 5;

struct Individual {
    IndividualId id = 0;
    IndividualId parent = 0;
    Genome genome;
    Evaluation eval;
};

Index default_initial_length(const SyntheticProblem& problem)
{
    if (problem.spec().kind == ProblemKind::PartialSupport) {
        return problem.spec().features + 1;
    }
    return 2 * problem.train_cases();
}

} // namespace

std::string_view to_string(ProblemKind kind)
{
    switch (kind) {
    case ProblemKind::DiscreteVector: return "discrete_vector";
    case ProblemKind::ContinuousVector: return "continuous_vector";
    case ProblemKind::PartialSupport: return "partial_support";
    }
    return "?";
}

ProblemKind parse_problem_kind(std::string_view text)
{
    for (ProblemKind k : {ProblemKind::DiscreteVector, ProblemKind::ContinuousVector,
                          ProblemKind::PartialSupport}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown value for 'problem': '" + std::string(text) + "'");
}

double Evaluation::total_train_error() const
{
    return std::accumulate(train_errors.begin(), train_errors.end(), 0.0);
}

SyntheticProblem::SyntheticProblem(const ProblemSpec& spec) : spec_(spec)
{
    if (spec_.cases < 1) {
        throw ConfigError("'cases' must be at least 1");
    }
    if (spec_.kind == ProblemKind::PartialSupport && (spec_.features < 2 || spec_.features > 30)) {
        throw ConfigError("'features' must be between 2 and 30");
    }
    if (spec_.max_target < 0) {
        throw ConfigError("'max_target' must be non-negative");
    }
    if (!(spec_.noise >= 0.0)) {
        throw ConfigError("'noise' must be non-negative");
    }
    auto gen = RandomSource(spec_.seed).stream(0, Lane::Harness);
    const Index m = spec_.cases;
    switch (spec_.kind) {
    case ProblemKind::DiscreteVector:
    case ProblemKind::ContinuousVector: {
        std::uniform_int_distribution<int> target(-spec_.max_target, spec_.max_target);
        std::normal_distribution<double> noise(0.0, spec_.noise);
        const double step = spec_.kind == ProblemKind::DiscreteVector ? 1.0 : kContinuousStep;
        std::vector<double> clean(m);
        for (Index j = 0; j < m; ++j) {
            clean[j] = step * target(gen);
        }
        train_targets_ = clean;
        if (spec_.kind == ProblemKind::ContinuousVector && spec_.noise > 0.0) {
            for (double& t : train_targets_) {
                t += noise(gen);
            }
        }
        for (Index j = 0; j < m; ++j) {
            test_targets_.push_back(clean[j] + clean[(j + 1) % m]);
        }
        break;
    }
    case ProblemKind::PartialSupport: {
        const Index f = spec_.features;
        std::uniform_int_distribution<Index> pick_feature(0, f - 1);
        std::bernoulli_distribution bit(0.5);
        const Index a = pick_feature(gen);
        Index b = pick_feature(gen);
        while (b == a) {
            b = pick_feature(gen);
        }
        const int va = bit(gen) ? 1 : 0;
        const int vb = bit(gen) ? 1 : 0;
        auto make = [&](Index count, std::vector<std::vector<int>>& rows, std::vector<int>& labels) {
            for (Index i = 0; i < count; ++i) {
                std::vector<int> row(f);
                for (int& v : row) {
                    v = bit(gen) ? 1 : 0;
                }
                labels.push_back(row[a] == va && row[b] == vb ? 1 : 0);
                rows.push_back(std::move(row));
            }
        };
        make(m, train_features_, train_labels_);
        make(m, test_features_, test_labels_);
        break;
    }
    }
}

Index SyntheticProblem::test_cases() const noexcept
{
    return spec_.cases;
}

Token SyntheticProblem::token_count() const noexcept
{
    if (spec_.kind == ProblemKind::PartialSupport) {
        // set feature to 0 / set to 1 / wildcard, then two label tokens
        return static_cast<Token>(3 * spec_.features + 2);
    }
    return static_cast<Token>(2 * spec_.cases);
}

double SyntheticProblem::worst_error() const noexcept
{
    switch (spec_.kind) {
    case ProblemKind::DiscreteVector: return kVectorWorstError;
    case ProblemKind::ContinuousVector: return kVectorWorstError * kVectorWorstError;
    case ProblemKind::PartialSupport: return 1.0;
    }
    return kVectorWorstError;
}

Evaluation SyntheticProblem::evaluate(const Genome& genome) const
{
    const Index m = spec_.cases;
    if (genome.empty()) {
        Evaluation e;
        e.train_errors.assign(m, worst_error());
        e.train_support.assign(m, 1.0);
        e.test_errors.assign(test_cases(), worst_error());
        return e;
    }
    return spec_.kind == ProblemKind::PartialSupport ? evaluate_rule(genome)
                                                     : evaluate_vector(genome);
}

Evaluation SyntheticProblem::evaluate_vector(const Genome& genome) const
{
    const Index m = spec_.cases;
    const bool discrete = spec_.kind == ProblemKind::DiscreteVector;
    const double step = discrete ? 1.0 : kContinuousStep;
    std::vector<double> out(m, 0.0);
    for (Token t : genome) {
        const auto slot = static_cast<Index>(t / 2);
        out[slot] += (t % 2 == 0) ? step : -step;
    }
    auto loss = [discrete](double d) { return discrete ? std::abs(d) : d * d; };
    Evaluation e;
    e.train_support.assign(m, 1.0);
    for (Index j = 0; j < m; ++j) {
        e.train_errors.push_back(loss(out[j] - train_targets_[j]));
        e.test_errors.push_back(loss(out[j] + out[(j + 1) % m] - test_targets_[j]));
    }
    const bool test_ok = std::all_of(e.test_errors.begin(), e.test_errors.end(),
                                     [](double v) { return v == 0.0; });
    if (discrete) {
        e.solved = test_ok && std::all_of(e.train_errors.begin(), e.train_errors.end(),
                                          [](double v) { return v == 0.0; });
    } else {
        e.solved = test_ok;
    }
    return e;
}

Evaluation SyntheticProblem::evaluate_rule(const Genome& genome) const
{
    const Index f = spec_.features;
    const auto tf = static_cast<Token>(f);
    std::vector<int> condition(f, -1); // -1 = wildcard
    int label = 0;
    for (Token t : genome) {
        if (t < 2 * tf) {
            condition[t / 2] = t % 2;
        } else if (t < 3 * tf) {
            condition[t - 2 * tf] = -1;
        } else {
            label = t - 3 * tf;
        }
    }
    auto matches = [&](const std::vector<int>& row) {
        for (Index i = 0; i < f; ++i) {
            if (condition[i] >= 0 && row[i] != condition[i]) {
                return false;
            }
        }
        return true;
    };

    Evaluation e;
    bool exact = label == 1;
    bool any = false;
    for (Index j = 0; j < spec_.cases; ++j) {
        const bool hit = matches(train_features_[j]);
        any = any || hit;
        e.train_support.push_back(hit ? 1.0 : 0.0);
        e.train_errors.push_back(hit && label != train_labels_[j] ? 1.0 : 0.0);
        exact = exact && hit == (train_labels_[j] == 1);
    }
    for (Index j = 0; j < spec_.cases; ++j) {
        const bool hit = matches(test_features_[j]);
        e.test_errors.push_back(hit && label != test_labels_[j] ? 1.0 : 0.0);
        exact = exact && hit == (test_labels_[j] == 1);
    }
    if (!any) {
        e.train_errors.assign(spec_.cases, worst_error());
        e.train_support.assign(spec_.cases, 1.0);
        exact = false;
    }
    e.solved = exact;
    return e;
}

Genome umad_mutate(const Genome& genome, double rate, Token token_count, Rng& gen)
{
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("mutation rate must be in [0, 1)");
    }
    if (rate == 0.0 || genome.empty()) {
        return genome;
    }
    std::bernoulli_distribution add(rate);
    std::bernoulli_distribution drop(rate / (1.0 + rate));
    std::uniform_int_distribution<Token> token(0, token_count - 1);
    Genome grown;
    grown.reserve(genome.size() * 2);
    for (Token t : genome) {
        if (add(gen)) {
            grown.push_back(token(gen));
        }
        grown.push_back(t);
    }
    Genome out;
    out.reserve(grown.size());
    for (Token t : grown) {
        if (!drop(gen)) {
            out.push_back(t);
        }
    }
    return out;
}

std::vector<Index> downsample_cases(Index m, double rate, Rng& gen)
{
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw ConfigError("'downsample_rate' must be in (0, 1]");
    }
    const auto size = std::max<Index>(1, static_cast<Index>(std::lround(rate * double(m))));
    std::vector<Index> all(m);
    std::iota(all.begin(), all.end(), Index{0});
    if (size >= m) {
        return all;
    }
    std::vector<Index> out;
    out.reserve(size);
    std::sample(all.begin(), all.end(), std::back_inserter(out), size, gen);
    return out;
}

nlohmann::json GenerationRecord::to_json(bool with_timing) const
{
    nlohmann::json j;
    j["generation"] = generation;
    j["best_error"] = best_error;
    j["mean_error"] = mean_error;
    j["classes"] = classes;
    j["parents"] = parents;
    j["cases"] = cases;
    j["ancestor"] = ancestor ? nlohmann::json(*ancestor) : nlohmann::json(nullptr);
    if (with_timing) {
        j["selection_seconds"] = selection_seconds;
    }
    return j;
}

void EvolutionConfig::validate() const
{
    selector.validate();
    if (pop_size < 2) {
        throw ConfigError("'pop_size' must be at least 2");
    }
    if (generations < 1) {
        throw ConfigError("'generations' must be at least 1");
    }
    if (!(downsample_rate > 0.0 && downsample_rate <= 1.0)) {
        throw ConfigError("'downsample_rate' must be in (0, 1]");
    }
    if (!(mutation_rate >= 0.0 && mutation_rate < 1.0)) {
        throw ConfigError("'mutation_rate' must be in [0, 1)");
    }
    if (seed_genomes.size() > pop_size) {
        throw ConfigError("more seed genomes than 'pop_size'");
    }
}

double RunResult::mean_selection_seconds() const
{
    if (records.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& r : records) {
        sum += r.selection_seconds;
    }
    return sum / static_cast<double>(records.size());
}

RunResult run_evolution(const EvolutionConfig& config, const SelectionObserver& observer)
{
    config.validate();
    const SyntheticProblem problem(config.problem);
    const RandomSource root(config.seed);
    const Index n = config.pop_size;
    const Index m = problem.train_cases();
    const Token tokens = problem.token_count();

    IndividualId next_id = 0;
    std::vector<Individual> population(n);
    {
        const auto init = root.derive(kInitTag);
        const Index max_len = config.initial_length > 0 ? config.initial_length
                                                        : default_initial_length(problem);
        for (Index i = 0; i < n; ++i) {
            auto gen = init.stream(i, Lane::Harness);
            std::uniform_int_distribution<Index> length(1, max_len);
            std::uniform_int_distribution<Token> token(0, tokens - 1);
            auto& ind = population[i];
            if (i < config.seed_genomes.size()) {
                ind.genome = config.seed_genomes[i];
            } else {
                ind.genome.resize(length(gen));
                for (Token& t : ind.genome) {
                    t = token(gen);
                }
            }
            ind.id = next_id++;
            ind.parent = ind.id;
            ind.eval = problem.evaluate(ind.genome);
        }
    }

    RunResult result;
    std::unordered_map<IndividualId, IndividualId> parent_of;
    for (Index g = 0; g < config.generations; ++g) {
        const auto gen_rng = root.derive(kGenerationTag).derive(g);

        GenerationRecord record;
        record.generation = g;
        record.best_error = std::numeric_limits<double>::infinity();
        double total = 0.0;
        std::vector<IndividualId> ids;
        std::vector<IndividualId> parents;
        std::optional<Index> solved;
        for (Index i = 0; i < n; ++i) {
            const auto& ind = population[i];
            const double err = ind.eval.total_train_error();
            record.best_error = std::min(record.best_error, err);
            total += err;
            ids.push_back(ind.id);
            parents.push_back(ind.parent);
            parent_of[ind.id] = ind.parent;
            if (!solved && ind.eval.solved) {
                solved = i;
            }
        }
        record.mean_error = total / static_cast<double>(n);

        {
            auto gen = gen_rng.derive(kDownsampleTag).stream(0, Lane::Harness);
            record.cases = downsample_cases(m, config.downsample_rate, gen);
        }
        Matrix errors(n, record.cases.size());
        Matrix support(n, record.cases.size());
        for (Index i = 0; i < n; ++i) {
            for (Index c = 0; c < record.cases.size(); ++c) {
                errors(i, c) = population[i].eval.train_errors[record.cases[c]];
                support(i, c) = population[i].eval.train_support[record.cases[c]];
            }
        }
        // A sampled subset can leave a rule with no defined case; such rows
        // count as worst-error on every sampled case.
        for (Index i = 0; i < n; ++i) {
            if (support.row(i).sum() == 0.0) {
                support.row(i).setOnes();
                errors.row(i).setConstant(problem.worst_error());
            }
        }

        const auto select_rng = gen_rng.derive(kSelectTag);
        const auto start = std::chrono::steady_clock::now();
        const ErrorMatrix error_matrix(std::move(errors));
        const SupportMatrix support_matrix(std::move(support));
        const auto classing = build_classes(error_matrix, support_matrix);
        const auto picks = expand_class_selection(
            classing, select_classes(classing, n, config.selector, select_rng), select_rng);
        const auto stop = std::chrono::steady_clock::now();
        record.selection_seconds = std::chrono::duration<double>(stop - start).count();
        record.classes = classing.k();
        record.parents = picks.size();
        if (observer) {
            observer(g, classing, record.cases);
        }

        result.ids.push_back(std::move(ids));
        result.parent_ids.push_back(std::move(parents));
        result.records.push_back(std::move(record));

        if (solved && !result.success) {
            result.success = true;
            result.success_generation = g;
            result.success_id = population[*solved].id;
            if (config.stop_on_success) {
                break;
            }
        }
        if (g + 1 == config.generations) {
            break;
        }

        const auto mutate_rng = gen_rng.derive(kMutateTag);
        std::vector<Individual> children(n);
        for (Index i = 0; i < n; ++i) {
            const auto& parent = population[picks[i]];
            auto gen = mutate_rng.stream(i, Lane::Harness);
            auto& child = children[i];
            child.genome = umad_mutate(parent.genome, config.mutation_rate, tokens, gen);
            child.id = next_id++;
            child.parent = parent.id;
            child.eval = problem.evaluate(child.genome);
        }
        population = std::move(children);
    }

    if (result.success_id) {
        // Walk the lineage back from the first solution.
        IndividualId id = *result.success_id;
        for (Index g = *result.success_generation + 1; g-- > 0;) {
            result.records[g].ancestor = id;
            id = parent_of.at(id);
        }
    }
    return result;
}

std::string_view to_string(ReferenceMode mode)
{
    switch (mode) {
    case ReferenceMode::Exact: return "exact";
    case ReferenceMode::ExactOrEmpirical: return "exact_or_empirical";
    case ReferenceMode::Empirical: return "empirical";
    }
    return "?";
}

ReferenceMode parse_reference_mode(std::string_view text)
{
    for (ReferenceMode m : {ReferenceMode::Exact, ReferenceMode::ExactOrEmpirical,
                            ReferenceMode::Empirical}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("unknown value for 'mode': '" + std::string(text) + "'");
}

SelectionDistribution method_distribution(const EquivalenceClassing& classing,
                                          const SelectorConfig& cfg, Index samples,
                                          ReferenceMode mode, const RandomSource& rng)
{
    const bool has_oracle = cfg.method == Method::Lexicase
                            || cfg.method == Method::EpsilonLexicase;
    if (has_oracle && mode != ReferenceMode::Empirical) {
        if (within_oracle_guard(classing)) {
            if (cfg.method == Method::Lexicase) {
                return exact_lexicase_probs(classing);
            }
            const auto eps = epsilon_for_cases(classing.class_errors, classing.multiplicities(),
                                               &classing.class_support);
            return exact_epsilon_lexicase_probs(classing, eps);
        }
        if (mode == ReferenceMode::Exact) {
            // Raises the guard error with the instance size.
            return exact_lexicase_probs(classing);
        }
    }
    if (samples < 1) {
        throw ConfigError("'samples' must be at least 1");
    }
    return sample_distribution(classing, cfg, samples, rng);
}

FidelityTrace fidelity_trace(const EvolutionConfig& config, const FidelityOptions& options)
{
    options.candidate.validate();
    const RandomSource root(config.seed);
    std::vector<SelectionDistribution> reference;
    std::vector<SelectionDistribution> candidate;
    // class id of every individual (by position), per generation
    std::vector<std::vector<Index>> class_of;

    auto observer = [&](Index g, const EquivalenceClassing& classing, std::span<const Index>) {
        const auto gen_rng = root.derive(kGenerationTag).derive(g);
        auto ref = method_distribution(classing, config.selector, options.samples, options.mode,
                                       gen_rng.derive(kReferenceTag));
        const bool same = options.candidate.to_key_values() == config.selector.to_key_values();
        if (same && ref.kind == SelectionDistribution::Kind::Exact) {
            candidate.push_back(ref);
        } else {
            candidate.push_back(method_distribution(classing, options.candidate, options.samples,
                                                    options.mode, gen_rng.derive(kCandidateTag)));
        }
        reference.push_back(std::move(ref));
        std::vector<Index> cls(classing.population());
        for (Index c = 0; c < classing.k(); ++c) {
            for (Index i : classing.members[c]) {
                cls[i] = c;
            }
        }
        class_of.push_back(std::move(cls));
    };

    FidelityTrace trace;
    trace.run = run_evolution(config, observer);
    for (Index g = 0; g < trace.run.records.size(); ++g) {
        FidelityReport report;
        report.generation = g;
        report.js_divergence = js_divergence(reference[g].probs, candidate[g].probs);
        if (const auto ancestor = trace.run.records[g].ancestor) {
            const auto& ids = trace.run.ids[g];
            const auto pos = static_cast<Index>(std::find(ids.begin(), ids.end(), *ancestor)
                                                - ids.begin());
            const Index c = class_of[g][pos];
            report.probability_ratio = probability_ratio(candidate[g].probs[c],
                                                         reference[g].probs[c]);
        }
        trace.reports.push_back(report);
    }
    return trace;
}

} // namespace dalex
