#include "dalex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace dalex {

double weighted_median(std::vector<WeightedValue> values)
{
    if (values.empty()) {
        throw std::invalid_argument("median of an empty set");
    }
    std::sort(values.begin(), values.end(),
              [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; });
    std::uint64_t total = 0;
    for (const auto& v : values) {
        const auto count = std::llround(v.weight);
        if (count < 1) {
            throw std::invalid_argument("multiplicities must be positive counts");
        }
        total += static_cast<std::uint64_t>(count);
    }
    const std::uint64_t lo_rank = (total - 1) / 2;
    const std::uint64_t hi_rank = total / 2;
    double lo = 0.0;
    double hi = 0.0;
    std::uint64_t seen = 0;
    for (const auto& v : values) {
        const auto next = seen + static_cast<std::uint64_t>(std::llround(v.weight));
        if (lo_rank >= seen && lo_rank < next) {
            lo = v.value;
        }
        if (hi_rank >= seen && hi_rank < next) {
            hi = v.value;
            break;
        }
        seen = next;
    }
    return lo == hi ? lo : (lo + hi) / 2.0;
}

double median_absolute_deviation(std::span<const WeightedValue> values)
{
    const double med = weighted_median({values.begin(), values.end()});
    std::vector<WeightedValue> dev;
    dev.reserve(values.size());
    for (const auto& v : values) {
        dev.push_back({std::abs(v.value - med), v.weight});
    }
    return weighted_median(std::move(dev));
}

} // namespace dalex
