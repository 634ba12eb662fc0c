#include "dalex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dalex/errors.hpp"
#include "dalex/random.hpp"

namespace dalex {

namespace {

void check_normalized(std::span<const double> p, const char* name)
{
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) {
            throw ShapeError(std::string(name) + " has a negative or NaN entry");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ShapeError(std::string(name) + " does not sum to 1 (sum = " + format_double(sum)
                         + ")");
    }
}

double mean_of(std::span<const double> values)
{
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double quantile_sorted(const std::vector<double>& sorted, double q)
{
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

double js_divergence(std::span<const double> p, std::span<const double> q)
{
    if (p.size() != q.size()) {
        throw ShapeError("distributions have different lengths (" + std::to_string(p.size())
                         + " vs " + std::to_string(q.size()) + ")");
    }
    check_normalized(p, "p");
    check_normalized(q, "q");
    double left = 0.0;
    double right = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double mid = p[i] + q[i];
        if (p[i] > 0.0) {
            left += p[i] * std::log(2.0 * p[i] / mid);
        }
        if (q[i] > 0.0) {
            right += q[i] * std::log(2.0 * q[i] / mid);
        }
    }
    // Rounding can leave tiny negative values or overshoot the bound.
    return std::clamp(0.5 * (left + right), 0.0, std::log(2.0));
}

std::optional<double> probability_ratio(double q_prob, double p_prob)
{
    if (!(p_prob > 0.0)) {
        return std::nullopt;
    }
    return q_prob / p_prob;
}

nlohmann::json FidelityReport::to_json() const
{
    nlohmann::json j;
    j["generation"] = generation;
    j["js_divergence"] = js_divergence;
    j["probability_ratio"] = probability_ratio ? nlohmann::json(*probability_ratio)
                                               : nlohmann::json(nullptr);
    return j;
}

nlohmann::json MeanInterval::to_json() const
{
    return {{"mean", mean}, {"ci_lower", lower}, {"ci_upper", upper}};
}

MeanInterval bootstrap_mean_ci(std::span<const double> values, Index resamples,
                               std::uint64_t seed, double level)
{
    if (values.empty()) {
        throw ShapeError("bootstrap needs at least one value");
    }
    if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
        throw ConfigError("bootstrap needs resamples >= 1 and 0 < level < 1");
    }
    const double mean = mean_of(values);
    const Index n = values.size();
    auto gen = RandomSource(seed).stream(0, Lane::Harness);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<double> means(resamples);
    for (double& m : means) {
        double sum = 0.0;
        for (Index i = 0; i < n; ++i) {
            sum += values[pick(gen)];
        }
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    MeanInterval out{mean, quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
    // Constant inputs: keep the interval exactly degenerate.
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        out.lower = out.upper = out.mean = values[0];
    }
    return out;
}

nlohmann::json FidelitySummary::to_json() const
{
    nlohmann::json j;
    j["count"] = count;
    j["js_divergence"] = js_divergence.to_json();
    j["probability_ratio"] = probability_ratio ? probability_ratio->to_json()
                                               : nlohmann::json(nullptr);
    return j;
}

FidelitySummary aggregate_fidelity(std::span<const FidelityReport> reports, Index resamples,
                                   std::uint64_t seed)
{
    if (reports.empty()) {
        throw ShapeError("no fidelity reports to aggregate");
    }
    std::vector<double> js;
    std::vector<double> ratios;
    for (const auto& r : reports) {
        js.push_back(r.js_divergence);
        if (r.probability_ratio) {
            ratios.push_back(*r.probability_ratio);
        }
    }
    FidelitySummary out;
    out.count = reports.size();
    out.js_divergence = bootstrap_mean_ci(js, resamples, seed);
    if (!ratios.empty()) {
        out.probability_ratio = bootstrap_mean_ci(ratios, resamples, seed + 1);
    }
    return out;
}

FidelitySummary aggregate_runs(std::span<const std::vector<FidelityReport>> runs,
                               Index resamples, std::uint64_t seed)
{
    std::vector<FidelityReport> per_run;
    for (const auto& run : runs) {
        if (run.empty()) {
            continue;
        }
        const auto s = aggregate_fidelity(run, 1, seed);
        FidelityReport r;
        r.generation = per_run.size();
        r.js_divergence = s.js_divergence.mean;
        if (s.probability_ratio) {
            r.probability_ratio = s.probability_ratio->mean;
        }
        per_run.push_back(r);
    }
    return aggregate_fidelity(per_run, resamples, seed);
}

} // namespace dalex
