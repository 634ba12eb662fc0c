#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dalex/core.hpp"

namespace dalex {

/// Jensen-Shannon divergence in nats, with 0 log 0 = 0. Bounded by ln 2.
/// Throws ShapeError on length mismatch or inputs not summing to 1 (1e-6).
double js_divergence(std::span<const double> p, std::span<const double> q);

// q / p; nullopt when the reference probability is 0.
std::optional<double> probability_ratio(double q_prob, double p_prob);

struct FidelityReport {
    Index generation = 0;
    double js_divergence = 0.0;
    std::optional<double> probability_ratio;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct MeanInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Mean with a percentile-bootstrap confidence interval (linear
/// interpolation between order statistics of the resampled means).
MeanInterval bootstrap_mean_ci(std::span<const double> values, Index resamples = 10000,
                               std::uint64_t seed = 0, double level = 0.95);

struct FidelitySummary {
    MeanInterval js_divergence;
    std::optional<MeanInterval> probability_ratio;
    Index count = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

// Over the reports of one run. Throws ShapeError on empty input.
FidelitySummary aggregate_fidelity(std::span<const FidelityReport> reports,
                                   Index resamples = 10000, std::uint64_t seed = 0);

// Each run is averaged first; the interval is over the per-run means.
FidelitySummary aggregate_runs(std::span<const std::vector<FidelityReport>> runs,
                               Index resamples = 10000, std::uint64_t seed = 0);

} // namespace dalex
