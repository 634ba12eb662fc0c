#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalex/core.hpp"
#include "dalex/selectors.hpp"

namespace dalex {

/// Probability vector over classes (or individuals).
struct SelectionDistribution {
    enum class Kind { Exact, Empirical };

    std::vector<double> probs;
    Kind kind = Kind::Exact;
    Index n_samples = 0; // empirical only

    // Throws ShapeError unless entries are >= 0 and sum to 1 within `tol`.
    void validate(double tol = 1e-9) const;

    // Spread class probabilities evenly over each class's members.
    [[nodiscard]] SelectionDistribution expand(const EquivalenceClassing& classing) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static SelectionDistribution from_json(const nlohmann::json& j);
};

inline constexpr Index kOracleMaxCases = 12;
inline constexpr Index kOracleMaxClasses = 64;

/// Exact lexicase selection probabilities by recursion over (remaining
/// candidates, remaining cases):
///   P(C, T) = point mass        if |C| = 1
///           = C weighted by size  if T is empty
///           = mean_{t in T} P(filter(C, t), T \ {t})
/// Terms are summed in ascending case order. Refuses (GuardError) instances
/// with more than kOracleMaxCases cases or kOracleMaxClasses classes.
SelectionDistribution exact_lexicase_probs(const EquivalenceClassing& classing,
                                           bool memoize = true);

// Same recursion with the keep rule e <= min + epsilons[case].
SelectionDistribution exact_epsilon_lexicase_probs(const EquivalenceClassing& classing,
                                                   std::span<const double> epsilons,
                                                   bool memoize = true);

[[nodiscard]] bool within_oracle_guard(const EquivalenceClassing& classing) noexcept;

// Frequencies of `selections` over k outcomes.
SelectionDistribution empirical_distribution(std::span<const Index> selections, Index k);

// Runs one batched event of n_samples selections and tabulates it by class.
SelectionDistribution sample_distribution(const EquivalenceClassing& classing,
                                          const SelectorConfig& cfg, Index n_samples,
                                          const RandomSource& rng);

} // namespace dalex
