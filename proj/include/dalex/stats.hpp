#pragma once

#include <span>
#include <vector>

namespace dalex {

// A value with an integral multiplicity (class member count).
struct WeightedValue {
    double value;
    double weight;
};

/// Median of the multiset in which each value appears `weight` times
/// (weights are rounded to whole counts). Even totals average the two
/// middle elements.
double weighted_median(std::vector<WeightedValue> values);

/// Median of |x - median(x)| over the same multiset.
double median_absolute_deviation(std::span<const WeightedValue> values);

} // namespace dalex
