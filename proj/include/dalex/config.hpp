#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "dalex/evolve.hpp"
#include "dalex/selectors.hpp"

namespace dalex {

/// Contents of an `evolve` config file.
///
///     [selector]      method, pressure, distribution, relaxed, batch_size,
///                     batch_threshold_mode, batch_threshold_value, seed
///     [evolution]     problem, cases, problem_seed, noise, features,
///                     max_target, pop_size, generations, downsample_rate,
///                     mutation_rate, initial_length, stop_on_success, runs,
///                     record_timing
///     [fidelity]      enabled, samples, mode, resamples
///     [candidate]     selector keys for the method compared in fidelity runs
///
/// `selector.seed` is the base seed; run r uses seed + r. A `--seed` flag
/// on the command line replaces it.
struct RunConfig {
    EvolutionConfig evolution;
    Index runs = 1;
    bool record_timing = true;
    std::optional<FidelityOptions> fidelity;
    Index resamples = 10000;
};

// Throws ParseError for INI syntax errors and ConfigError (naming the
// section.key) for unknown keys or invalid values.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

/// Parses `name[:key=value[:key=value...]]`, e.g. `dalex:pressure=200`,
/// starting from `base` for keys not given.
SelectorConfig parse_method_spec(std::string_view spec, const SelectorConfig& base = {});

} // namespace dalex
