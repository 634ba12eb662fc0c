#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <utility>

#include "dalex/core.hpp"
#include "dalex/selectors.hpp"

namespace dalex {

enum class Regime { Discrete, ContinuousAllDistinct, PartialSupport };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);

/// Random n x m population in the given regime:
/// * discrete: integer errors 0..4
/// * continuous_all_distinct: every case column is a permutation of n
///   distinct reals, so no two individuals tie on any case
/// * partial_support: discrete errors on a ~30% random support
std::pair<ErrorMatrix, SupportMatrix> bench_population(Index n, Index m, Regime regime,
                                                       std::uint64_t seed);

struct BenchRecord {
    SelectorConfig selector;
    Index n = 0;
    Index m = 0;
    Regime regime = Regime::Discrete;
    Index repetitions = 0;
    double median_seconds = 0.0;
    double iqr_seconds = 0.0;
    Index threads = 1;
};

/// Times one batched selection event (population -> n parent indices,
/// including grouping and expansion) `repetitions` times after one warm-up.
BenchRecord bench_cell(const SelectorConfig& selector, Index n, Index m, Regime regime,
                       Index repetitions, std::uint64_t seed);

void write_bench_header(std::ostream& out, bool with_timing = true);
void write_bench_row(std::ostream& out, const BenchRecord& record, bool with_timing = true);

} // namespace dalex
