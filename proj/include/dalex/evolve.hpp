#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dalex/core.hpp"
#include "dalex/metrics.hpp"
#include "dalex/oracle.hpp"
#include "dalex/selectors.hpp"

namespace dalex {

using Token = std::int32_t;
using Genome = std::vector<Token>;
using IndividualId = std::uint64_t;

enum class ProblemKind { DiscreteVector, ContinuousVector, PartialSupport };

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view text);

struct ProblemSpec {
    ProblemKind kind = ProblemKind::DiscreteVector;
    Index cases = 8;          // training cases
    std::uint64_t seed = 0;   // target generator seed
    double noise = 0.1;       // continuous: target noise std
    Index features = 6;       // partial support: binary features per case
    int max_target = 3;       // discrete/continuous: targets in [-max_target, max_target]
};

struct Evaluation {
    std::vector<double> train_errors;
    std::vector<double> train_support;
    std::vector<double> test_errors;
    bool solved = false;

    [[nodiscard]] double total_train_error() const;
};

/// Synthetic stand-in problems whose cases are solved by disjoint parts of a
/// genome, so that specialists exist.
///
/// * discrete_vector: each token adds +1 or -1 to one of m output slots;
///   training case j is |out_j - target_j|, test case j is the absolute error
///   of out_j + out_{j+1} against the target pair sum.
/// * continuous_vector: tokens move a slot by +-0.5; training targets carry
///   Gaussian noise and use squared error; test targets are noiseless, and a
///   run is solved once every test error is exactly zero.
/// * partial_support: a genome encodes a classification rule (per-feature
///   condition 0/1/wildcard plus a predicted label). It is defined only on the
///   cases it matches, with error 0 for a correct label and 1 otherwise. The
///   target concept is a conjunction of two literals; a rule is solved when it
///   matches exactly the positive cases of both splits and predicts 1.
///
/// Empty genomes, and rules matching no training case, score the worst error
/// on every case with full support.
class SyntheticProblem {
public:
    explicit SyntheticProblem(const ProblemSpec& spec);

    [[nodiscard]] const ProblemSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] Index train_cases() const noexcept { return spec_.cases; }
    [[nodiscard]] Index test_cases() const noexcept;
    [[nodiscard]] Token token_count() const noexcept;
    [[nodiscard]] double worst_error() const noexcept;

    [[nodiscard]] Evaluation evaluate(const Genome& genome) const;

private:
    [[nodiscard]] Evaluation evaluate_vector(const Genome& genome) const;
    [[nodiscard]] Evaluation evaluate_rule(const Genome& genome) const;

    ProblemSpec spec_;
    std::vector<double> train_targets_;
    std::vector<double> test_targets_;
    // partial support: feature rows and labels
    std::vector<std::vector<int>> train_features_;
    std::vector<std::vector<int>> test_features_;
    std::vector<int> train_labels_;
    std::vector<int> test_labels_;
};

/// Uniform mutation by addition and deletion: each position gains a random
/// token before it with probability `rate`, then every position of the
/// grown genome is deleted with probability rate / (1 + rate).
Genome umad_mutate(const Genome& genome, double rate, Token token_count, Rng& gen);

// Uniform subset of max(1, round(rate * m)) case indices, ascending.
std::vector<Index> downsample_cases(Index m, double rate, Rng& gen);

struct GenerationRecord {
    Index generation = 0;
    double best_error = 0.0;
    double mean_error = 0.0;
    Index classes = 0;
    Index parents = 0;
    std::vector<Index> cases;
    std::optional<IndividualId> ancestor;
    double selection_seconds = 0.0;

    [[nodiscard]] nlohmann::json to_json(bool with_timing = true) const;
};

struct EvolutionConfig {
    ProblemSpec problem;
    SelectorConfig selector;
    Index pop_size = 200;
    Index generations = 100;
    double downsample_rate = 1.0;
    double mutation_rate = 0.09;
    Index initial_length = 0; // max initial genome length; 0 picks a per-problem default
    bool stop_on_success = true;
    std::uint64_t seed = 0;
    // Genomes placed at the front of generation 0; the rest are random.
    std::vector<Genome> seed_genomes;

    void validate() const;
};

struct RunResult {
    std::vector<GenerationRecord> records;
    bool success = false;
    std::optional<Index> success_generation;
    std::optional<IndividualId> success_id;
    // Per generation, the ids of the population and of their parents.
    std::vector<std::vector<IndividualId>> ids;
    std::vector<std::vector<IndividualId>> parent_ids;

    [[nodiscard]] double mean_selection_seconds() const;
};

/// Called once per generation with the classing handed to the selector and
/// the training case ids its columns refer to.
using SelectionObserver = std::function<void(Index generation, const EquivalenceClassing&,
                                             std::span<const Index> cases)>;

RunResult run_evolution(const EvolutionConfig& config, const SelectionObserver& observer = {});

enum class ReferenceMode {
    Exact,             // oracle only; GuardError when an instance is too large
    ExactOrEmpirical,  // oracle when it fits, sampling otherwise
    Empirical,
};

std::string_view to_string(ReferenceMode mode);
ReferenceMode parse_reference_mode(std::string_view text);

struct FidelityOptions {
    SelectorConfig candidate;
    Index samples = 50000;
    ReferenceMode mode = ReferenceMode::ExactOrEmpirical;
};

struct FidelityTrace {
    RunResult run;
    std::vector<FidelityReport> reports;
};

/// Evolves with `config.selector` as the reference method and, every
/// generation, compares the reference and candidate selection distributions
/// on that generation's population. Probability ratios are filled in for the
/// successful lineage when the run succeeds.
FidelityTrace fidelity_trace(const EvolutionConfig& config, const FidelityOptions& options);

// Distribution of `cfg` on `classing`: exact when the method has an oracle,
// `mode` permits it and the instance fits; sampled otherwise.
SelectionDistribution method_distribution(const EquivalenceClassing& classing,
                                          const SelectorConfig& cfg, Index samples,
                                          ReferenceMode mode, const RandomSource& rng);

} // namespace dalex
