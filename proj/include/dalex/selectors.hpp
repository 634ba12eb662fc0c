#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dalex/core.hpp"

namespace dalex {

enum class Method { Dalex, Lexicase, EpsilonLexicase, BatchLexicase };
enum class Distribution { Normal, Uniform, ShuffledRange };
enum class ThresholdMode { Mad, Absolute };

std::string_view to_string(Method method);
std::string_view to_string(Distribution distribution);
std::string_view to_string(ThresholdMode mode);
Method parse_method(std::string_view text);
Distribution parse_distribution(std::string_view text);
ThresholdMode parse_threshold_mode(std::string_view text);

struct SelectorConfig {
    Method method = Method::Dalex;
    // Standard deviation of the importance scores.
    double pressure = 20.0;
    Distribution distribution = Distribution::Normal;
    bool relaxed = false;
    Index batch_size = 1;
    ThresholdMode threshold_mode = ThresholdMode::Mad;
    double threshold_value = 0.0;
    std::uint64_t seed = 0;

    void validate() const;

    // Flat key/value form: method, pressure, distribution, relaxed,
    // batch_size, batch_threshold_mode, batch_threshold_value, seed.
    [[nodiscard]] std::map<std::string, std::string> to_key_values() const;
    // Keys not present keep their defaults. Unknown keys and malformed values
    // raise ConfigError naming the key.
    static SelectorConfig from_key_values(const std::map<std::string, std::string>& kv);
    static bool is_key(std::string_view key);
};

/// Raw per-case importance scores, one row per selection event.
struct ImportanceMatrix {
    Matrix scores;
};

/// Softmax of the importance scores; rows are positive and sum to 1.
struct WeightMatrix {
    Matrix weights;
};

/// Row r is drawn from `rng.stream(first_event + r)` so any row can be
/// regenerated on its own.
ImportanceMatrix sample_importance(Index n, Index m, const SelectorConfig& cfg,
                                   const RandomSource& rng, std::uint64_t first_event = 0);

// Max-shifted so no entry overflows. Entries that would be subnormal are
// stored as 0.
WeightMatrix softmax_rows(const ImportanceMatrix& scores);

/// Support-normalized weighted error, (E W^T) / (S W^T), shape k x events.
Matrix dalex_fitness(const ErrorMatrix& errors, const SupportMatrix& support,
                     const WeightMatrix& weights);

// Column-wise argmin of `fitness`; exact ties broken uniformly with the
// tie-break lane of event `first_event + column`.
std::vector<Index> argmin_columns(const Matrix& fitness, const RandomSource& rng,
                                  std::uint64_t first_event = 0);

// The selectors below return class indices. Ties left at the end of an event
// go to a uniformly chosen individual, so tied classes win in proportion to
// their size and class-then-expand matches selecting on the raw population.
std::vector<Index> dalex_select(const EquivalenceClassing& classing, Index n_events,
                                const SelectorConfig& cfg, const RandomSource& rng,
                                std::uint64_t first_event = 0);

std::vector<Index> lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                   const RandomSource& rng, std::uint64_t first_event = 0);

/// Median absolute deviation from the median, per case, over the defined
/// entries of each column with rows weighted by `multiplicities` (empty =
/// all ones). Even counts use the mean of the two middle values.
std::vector<double> epsilon_for_cases(const ErrorMatrix& errors,
                                      std::span<const double> multiplicities = {},
                                      const SupportMatrix* support = nullptr);

std::vector<Index> epsilon_lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                           const RandomSource& rng, std::uint64_t first_event = 0);

std::vector<Index> batch_lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                         const SelectorConfig& cfg, const RandomSource& rng,
                                         std::uint64_t first_event = 0);

// Dispatches on cfg.method.
std::vector<Index> select_classes(const EquivalenceClassing& classing, Index n_events,
                                  const SelectorConfig& cfg, const RandomSource& rng,
                                  std::uint64_t first_event = 0);

/// Full batched selection event: group, select classes, expand to
/// individual indices.
std::vector<Index> select_individuals(const ErrorMatrix& errors, const SupportMatrix& support,
                                      Index n_events, const SelectorConfig& cfg,
                                      const RandomSource& rng);

/// Candidates that survive filtering `candidates` through the cases in
/// `order`. A case with no defined candidate is skipped; otherwise undefined
/// candidates are dropped and defined ones are kept when their error is at
/// most the remaining minimum plus epsilons[case] (empty = zero). Stops as
/// soon as one candidate is left.
std::vector<Index> lexicase_survivors(const EquivalenceClassing& classing,
                                      std::span<const Index> order,
                                      std::span<const double> epsilons = {},
                                      std::vector<Index> candidates = {});

/// Smallest log-spacing of evenly spaced importance scores that makes every
/// weight row act as a strict lexicographic case ordering on `errors`:
/// ln(1 + (max - min) / smallest nonzero within-case gap). Zero when no case
/// discriminates.
double lexicase_exact_spacing(const ErrorMatrix& errors);

// Pressure (population std) of m evenly spaced scores with the given spacing.
double pressure_for_spacing(double spacing, Index m);

} // namespace dalex
