#include "dalex/bench.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>

#include "dalex/errors.hpp"

namespace dalex {

namespace {

double quantile(std::vector<double> xs, double q)
{
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

} // namespace

std::string_view to_string(Regime regime)
{
    switch (regime) {
    case Regime::Discrete: return "discrete";
    case Regime::ContinuousAllDistinct: return "continuous_all_distinct";
    case Regime::PartialSupport: return "partial_support";
    }
    return "?";
}

Regime parse_regime(std::string_view text)
{
    for (Regime r : {Regime::Discrete, Regime::ContinuousAllDistinct, Regime::PartialSupport}) {
        if (text == to_string(r)) {
            return r;
        }
    }
    throw ConfigError("unknown value for 'regime': '" + std::string(text) + "'");
}

std::pair<ErrorMatrix, SupportMatrix> bench_population(Index n, Index m, Regime regime,
                                                       std::uint64_t seed)
{
    if (n < 1 || m < 1) {
        throw ConfigError("bench cells need n >= 1 and m >= 1");
    }
    auto gen = RandomSource(seed).stream(0, Lane::Harness);
    Matrix errors(n, m);
    Matrix support = Matrix::Ones(n, m);
    switch (regime) {
    case Regime::Discrete: {
        std::uniform_int_distribution<int> value(0, 4);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < m; ++j) {
                errors(i, j) = value(gen);
            }
        }
        break;
    }
    case Regime::ContinuousAllDistinct: {
        std::uniform_real_distribution<double> jitter(0.0, 1.0);
        std::vector<double> column(n);
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < n; ++i) {
                column[i] = double(i) + 0.5 * jitter(gen);
            }
            std::shuffle(column.begin(), column.end(), gen);
            for (Index i = 0; i < n; ++i) {
                errors(i, j) = column[i];
            }
        }
        break;
    }
    case Regime::PartialSupport: {
        std::uniform_int_distribution<int> value(0, 4);
        std::bernoulli_distribution covered(0.3);
        std::uniform_int_distribution<Index> any_case(0, m - 1);
        for (Index i = 0; i < n; ++i) {
            bool any = false;
            for (Index j = 0; j < m; ++j) {
                const bool on = covered(gen);
                support(i, j) = on ? 1.0 : 0.0;
                errors(i, j) = on ? value(gen) : 0.0;
                any = any || on;
            }
            if (!any) {
                const Index j = any_case(gen);
                support(i, j) = 1.0;
                errors(i, j) = value(gen);
            }
        }
        break;
    }
    }
    return {ErrorMatrix(std::move(errors)), SupportMatrix(std::move(support))};
}

BenchRecord bench_cell(const SelectorConfig& selector, Index n, Index m, Regime regime,
                       Index repetitions, std::uint64_t seed)
{
    if (repetitions < 3) {
        throw ConfigError("'repetitions' must be at least 3");
    }
    const auto [errors, support] = bench_population(n, m, regime, seed);
    std::vector<double> times;
    for (Index r = 0; r <= repetitions; ++r) {
        const RandomSource rng(RandomSource::mix(seed + r));
        const auto start = std::chrono::steady_clock::now();
        const auto picks = select_individuals(errors, support, n, selector, rng);
        const auto stop = std::chrono::steady_clock::now();
        if (picks.size() != n) {
            throw ShapeError("selector returned the wrong number of parents");
        }
        if (r > 0) { // r == 0 is the warm-up
            times.push_back(std::chrono::duration<double>(stop - start).count());
        }
    }
    BenchRecord rec;
    rec.selector = selector;
    rec.n = n;
    rec.m = m;
    rec.regime = regime;
    rec.repetitions = repetitions;
    rec.median_seconds = quantile(times, 0.5);
    rec.iqr_seconds = quantile(times, 0.75) - quantile(times, 0.25);
    rec.threads = static_cast<Index>(Eigen::nbThreads());
    return rec;
}

void write_bench_header(std::ostream& out, bool with_timing)
{
    out << "method,pressure,distribution,relaxed,n,m,regime,repetitions";
    if (with_timing) {
        out << ",median_seconds,iqr_seconds";
    }
    out << ",threads\n";
}

void write_bench_row(std::ostream& out, const BenchRecord& r, bool with_timing)
{
    out << to_string(r.selector.method) << ',' << format_double(r.selector.pressure) << ','
        << to_string(r.selector.distribution) << ',' << (r.selector.relaxed ? "true" : "false")
        << ',' << r.n << ',' << r.m << ',' << to_string(r.regime) << ',' << r.repetitions;
    if (with_timing) {
        out << ',' << format_double(r.median_seconds) << ',' << format_double(r.iqr_seconds);
    }
    out << ',' << r.threads << '\n';
}

} // namespace dalex
