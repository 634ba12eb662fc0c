#include "dalex/selectors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <boost/random/normal_distribution.hpp>

#include "dalex/errors.hpp"
#include "dalex/stats.hpp"

namespace dalex {

namespace {

constexpr std::string_view kKeys[] = {"method",     "pressure",
                                      "distribution", "relaxed",
                                      "batch_size", "batch_threshold_mode",
                                      "batch_threshold_value", "seed"};

double parse_real(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ConfigError("invalid value for '" + key + "': '" + text + "'");
    }
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text)
{
    std::uint64_t v = 0;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), last, v);
    if (text.empty() || ec != std::errc{} || ptr != last) {
        throw ConfigError("invalid value for '" + key + "': '" + text + "'");
    }
    return v;
}

bool parse_flag(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError("invalid value for '" + key + "': '" + text + "'");
}

// Incremental Fisher-Yates: yields a uniformly random permutation of the
// cases one element at a time, so early-terminating selectors only pay for
// the cases they inspect.
class LazyShuffle {
public:
    LazyShuffle(std::vector<Index>& scratch, Index m, Rng& gen) : order_(scratch), gen_(gen)
    {
        order_.resize(m);
        std::iota(order_.begin(), order_.end(), Index{0});
    }

    [[nodiscard]] bool done() const noexcept { return next_ == order_.size(); }

    Index next()
    {
        std::uniform_int_distribution<Index> pick(next_, order_.size() - 1);
        std::swap(order_[next_], order_[pick(gen_)]);
        return order_[next_++];
    }

private:
    std::vector<Index>& order_;
    Rng& gen_;
    Index next_ = 0;
};

// One filtering step of (epsilon-)lexicase on a single case.
void filter_case(const EquivalenceClassing& classing, Index c, double eps,
                 std::vector<Index>& candidates)
{
    const auto& errors = classing.class_errors;
    const auto& support = classing.class_support;
    const bool full = support.is_full();
    double best = std::numeric_limits<double>::infinity();
    for (Index i : candidates) {
        if (full || support.defined(i, c)) {
            best = std::min(best, errors(i, c));
        }
    }
    if (best == std::numeric_limits<double>::infinity()) {
        return; // nobody left is defined on this case
    }
    const double limit = best + eps;
    std::erase_if(candidates, [&](Index i) {
        return !(full || support.defined(i, c)) || errors(i, c) > limit;
    });
}

// Uniform over the individuals behind the surviving classes, so that a
// class's chance is proportional to its size.
// Without a classing every survivor counts once.
Index resolve(std::vector<Index>& survivors, const EquivalenceClassing* classing,
              const RandomSource& rng, std::uint64_t event)
{
    if (survivors.size() == 1) {
        return survivors.front();
    }
    auto size_of = [&](Index s) { return classing ? classing->members[s].size() : Index{1}; };
    Index total = 0;
    for (Index s : survivors) {
        total += size_of(s);
    }
    auto gen = rng.stream(event, Lane::TieBreak);
    std::uniform_int_distribution<Index> pick(0, total - 1);
    Index slot = pick(gen);
    for (Index s : survivors) {
        const Index size = size_of(s);
        if (slot < size) {
            return s;
        }
        slot -= size;
    }
    return survivors.back();
}

std::vector<Index> iterative_lexicase(const EquivalenceClassing& classing, Index n_events,
                                      std::span<const double> eps, const RandomSource& rng,
                                      std::uint64_t first_event)
{
    const Index k = classing.k();
    const Index m = classing.class_errors.cols();
    std::vector<Index> out;
    out.reserve(n_events);
    std::vector<Index> candidates;
    std::vector<Index> order;
    for (Index e = 0; e < n_events; ++e) {
        const std::uint64_t event = first_event + e;
        if (k == 1) {
            out.push_back(0);
            continue;
        }
        candidates.resize(k);
        std::iota(candidates.begin(), candidates.end(), Index{0});
        auto gen = rng.stream(event, Lane::Shuffle);
        LazyShuffle shuffle(order, m, gen);
        while (candidates.size() > 1 && !shuffle.done()) {
            const Index c = shuffle.next();
            filter_case(classing, c, eps.empty() ? 0.0 : eps[c], candidates);
        }
        out.push_back(resolve(candidates, &classing, rng, event));
    }
    return out;
}

} // namespace

std::string_view to_string(Method method)
{
    switch (method) {
    case Method::Dalex: return "dalex";
    case Method::Lexicase: return "lexicase";
    case Method::EpsilonLexicase: return "epsilon_lexicase";
    case Method::BatchLexicase: return "batch_lexicase";
    }
    return "?";
}

std::string_view to_string(Distribution distribution)
{
    switch (distribution) {
    case Distribution::Normal: return "normal";
    case Distribution::Uniform: return "uniform";
    case Distribution::ShuffledRange: return "shuffled_range";
    }
    return "?";
}

std::string_view to_string(ThresholdMode mode)
{
    return mode == ThresholdMode::Mad ? "mad" : "absolute";
}

Method parse_method(std::string_view text)
{
    for (Method m : {Method::Dalex, Method::Lexicase, Method::EpsilonLexicase,
                     Method::BatchLexicase}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("unknown value for 'method': '" + std::string(text) + "'");
}

Distribution parse_distribution(std::string_view text)
{
    for (Distribution d : {Distribution::Normal, Distribution::Uniform,
                           Distribution::ShuffledRange}) {
        if (text == to_string(d)) {
            return d;
        }
    }
    throw ConfigError("unknown value for 'distribution': '" + std::string(text) + "'");
}

ThresholdMode parse_threshold_mode(std::string_view text)
{
    if (text == "mad") {
        return ThresholdMode::Mad;
    }
    if (text == "absolute") {
        return ThresholdMode::Absolute;
    }
    throw ConfigError("unknown value for 'batch_threshold_mode': '" + std::string(text) + "'");
}

void SelectorConfig::validate() const
{
    if (!(pressure >= 0.0) || !std::isfinite(pressure)) {
        throw ConfigError("'pressure' must be a finite non-negative number");
    }
    if (batch_size < 1) {
        throw ConfigError("'batch_size' must be at least 1");
    }
    if (!(threshold_value >= 0.0) || !std::isfinite(threshold_value)) {
        throw ConfigError("'batch_threshold_value' must be a finite non-negative number");
    }
}

std::map<std::string, std::string> SelectorConfig::to_key_values() const
{
    return {
        {"method", std::string(to_string(method))},
        {"pressure", format_double(pressure)},
        {"distribution", std::string(to_string(distribution))},
        {"relaxed", relaxed ? "true" : "false"},
        {"batch_size", std::to_string(batch_size)},
        {"batch_threshold_mode", std::string(to_string(threshold_mode))},
        {"batch_threshold_value", format_double(threshold_value)},
        {"seed", std::to_string(seed)},
    };
}

bool SelectorConfig::is_key(std::string_view key)
{
    return std::find(std::begin(kKeys), std::end(kKeys), key) != std::end(kKeys);
}

SelectorConfig SelectorConfig::from_key_values(const std::map<std::string, std::string>& kv)
{
    SelectorConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key == "method") {
            cfg.method = parse_method(value);
        } else if (key == "pressure") {
            cfg.pressure = parse_real(key, value);
        } else if (key == "distribution") {
            cfg.distribution = parse_distribution(value);
        } else if (key == "relaxed") {
            cfg.relaxed = parse_flag(key, value);
        } else if (key == "batch_size") {
            cfg.batch_size = parse_count(key, value);
        } else if (key == "batch_threshold_mode") {
            cfg.threshold_mode = parse_threshold_mode(value);
        } else if (key == "batch_threshold_value") {
            cfg.threshold_value = parse_real(key, value);
        } else if (key == "seed") {
            cfg.seed = parse_count(key, value);
        } else {
            throw ConfigError("unknown selector key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ImportanceMatrix sample_importance(Index n, Index m, const SelectorConfig& cfg,
                                   const RandomSource& rng, std::uint64_t first_event)
{
    if (n < 1 || m < 1) {
        throw ShapeError("importance matrix needs n >= 1 and m >= 1");
    }
    cfg.validate();
    Matrix scores = Matrix::Zero(n, m);
    if (cfg.pressure == 0.0) {
        return {std::move(scores)};
    }
    const double p = cfg.pressure;
    std::vector<double> grid;
    if (cfg.distribution == Distribution::ShuffledRange) {
        const double spacing = m > 1 ? p / std::sqrt((double(m) * double(m) - 1.0) / 12.0) : 0.0;
        const double center = (double(m) - 1.0) / 2.0;
        for (Index j = 0; j < m; ++j) {
            grid.push_back((double(j) - center) * spacing);
        }
    }
    for (Index r = 0; r < n; ++r) {
        auto gen = rng.stream(first_event + r, Lane::Importance);
        double* row = scores.data() + r * m;
        switch (cfg.distribution) {
        case Distribution::Normal: {
            boost::random::normal_distribution<double> dist(0.0, p);
            for (Index j = 0; j < m; ++j) {
                row[j] = dist(gen);
            }
            break;
        }
        case Distribution::Uniform: {
            const double half = p * std::sqrt(3.0);
            std::uniform_real_distribution<double> dist(-half, half);
            for (Index j = 0; j < m; ++j) {
                row[j] = dist(gen);
            }
            break;
        }
        case Distribution::ShuffledRange: {
            std::copy(grid.begin(), grid.end(), row);
            std::shuffle(row, row + m, gen);
            break;
        }
        }
    }
    return {std::move(scores)};
}

WeightMatrix softmax_rows(const ImportanceMatrix& scores)
{
    if (!scores.scores.allFinite()) {
        throw ShapeError("importance scores must be finite");
    }
    const Eigen::VectorXd max = scores.scores.rowwise().maxCoeff();
    Matrix w = (scores.scores.colwise() - max).array().exp();
    w.array().colwise() /= w.rowwise().sum().array();
    // Subnormal weights change no sum but make the product below ~100x slower.
    w = (w.array() < std::numeric_limits<double>::min()).select(0.0, w);
    return {std::move(w)};
}

namespace {

// Column-major copy of the errors: each case's column is contiguous.
using CaseMajor = Eigen::MatrixXd;

template <class Errors>
Matrix weighted_fitness(const Matrix& weights, const Errors& errors, const SupportMatrix& support,
                        Matrix* norm_out = nullptr)
{
    Matrix fitness = weights * errors.transpose();
    if (support.is_full()) {
        return fitness;
    }
    Matrix norm = weights * support.mask().transpose();
    // A zero denominator only happens when every supported weight underflowed.
    fitness = (norm.array() > 0.0)
                  .select(fitness.array() / norm.array(),
                          std::numeric_limits<double>::infinity());
    if (norm_out != nullptr) {
        *norm_out = std::move(norm);
    }
    return fitness;
}

// Denominators below this lost weights to underflow; such entries are
// recomputed from the scores.
constexpr double kThinSupport = 0x1p-900;

// Fitness laid out event-major (events x classes) so each event's argmin
// scans contiguous memory.
Matrix fitness_by_event(const ErrorMatrix& errors, const SupportMatrix& support,
                        const WeightMatrix& weights)
{
    check_pair(errors, support);
    if (static_cast<Index>(weights.weights.cols()) != errors.cols()) {
        throw ShapeError("weight rows have " + std::to_string(weights.weights.cols())
                         + " cases, error matrix has " + std::to_string(errors.cols()));
    }
    return weighted_fitness(weights.weights, errors.values(), support);
}

Index argmin_row(const double* row, Index k, const EquivalenceClassing* classing,
                 const RandomSource& rng, std::uint64_t event, std::vector<Index>& ties)
{
    double best = row[0];
    Index arg = 0;
    Index count = 1;
    for (Index i = 1; i < k; ++i) {
        const double v = row[i];
        if (v < best) {
            best = v;
            arg = i;
            count = 1;
        } else if (v == best) {
            ++count;
        }
    }
    if (count > 1) {
        ties.clear();
        for (Index i = 0; i < k; ++i) {
            if (row[i] == best) {
                ties.push_back(i);
            }
        }
        arg = resolve(ties, classing, rng, event);
    }
    return arg;
}

// The aggregated sum loses a case whose weight is below the rounding error of
// the larger terms, so classes that differ only there come out tied. Classes
// within rounding distance of the minimum are compared again with extended
// precision weights exp(s_j - max s), which do not underflow at any practical
// pressure.
class NearTieRefiner {
public:
    using Wide = long double;

    // `resolution` (empty or one per case) marks errors that count as equal.
    NearTieRefiner(const CaseMajor& errors, const SupportMatrix& support,
                   std::vector<double> resolution)
        : errors_(errors), support_(support), full_(support.is_full()), group_(errors.rows(), 0),
          resolution_(std::move(resolution))
    {
        if (resolution_.empty()) {
            resolution_.assign(errors.cols(), 0.0);
        }
        widest_ = *std::max_element(resolution_.begin(), resolution_.end());
        const auto m = static_cast<Index>(errors.cols());
        gamma_ = 4.0 * static_cast<double>(m + 4) * std::numeric_limits<double>::epsilon();
        // Rounding is relative to |F| when no term is negative.
        floor_ = errors.minCoeff() < 0.0 ? errors.cwiseAbs().maxCoeff() : 0.0;
        max_error_ = errors.maxCoeff();
        if (!full_) {
            std::map<std::vector<double>, Index> ids;
            for (Index i = 0; i < group_.size(); ++i) {
                const auto r = support.row(i);
                group_[i] = ids.try_emplace({r.begin(), r.end()}, ids.size()).first->second;
            }
        }
    }

    // F for one class with weights taken relative to its own largest defined
    // weight, so it stays exact when the shared softmax underflows.
    [[nodiscard]] double rescaled_fitness(std::span<const double> scores, Index c) const
    {
        const Index m = scores.size();
        double top = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < m; ++j) {
            if (support_.defined(c, j)) {
                top = std::max(top, scores[j]);
            }
        }
        Wide num = 0;
        Wide den = 0;
        for (Index j = 0; j < m; ++j) {
            if (support_.defined(c, j)) {
                const Wide w = std::exp(static_cast<Wide>(scores[j]) - static_cast<Wide>(top));
                num += w * static_cast<Wide>(errors_(c, j));
                den += w;
            }
        }
        return static_cast<double>(num / den);
    }

    // Largest fitness that may still be the true minimum.
    [[nodiscard]] double limit(double best, double slack) const
    {
        return best + slack + widest_ + gamma_ * std::max(std::abs(best) + slack, floor_);
    }

    // `slack` bounds how far the given fitness may sit below the true value.
    void near_minimum(const double* fitness, Index k, std::vector<Index>& out,
                      double slack = 0.0) const
    {
        const Eigen::Map<const Eigen::RowVectorXd> row(fitness, k);
        const double best = row.minCoeff();
        const double limit = this->limit(best, slack);
        out.clear();
        if ((row.array() <= limit).count() == 1) {
            out.push_back(static_cast<Index>(
                std::find_if(fitness, fitness + k, [&](double v) { return v <= limit; })
                - fitness));
            return;
        }
        for (Index i = 0; i < k; ++i) {
            if (fitness[i] <= limit) {
                out.push_back(i);
            }
        }
    }

    // Leaves in `ties` the classes that stay tied for the minimum.
    void refine(std::span<const double> scores, std::vector<Index>& ties)
    {
        if (full_) {
            scan(scores, ties);
        } else {
            pairwise(scores, ties);
        }
    }

private:
    // Full support, errors >= 0: add cases in descending weight order and drop
    // a candidate once the cases left cannot close its gap to the leader.
    void scan(std::span<const double> scores, std::vector<Index>& alive)
    {
        const Index m = scores.size();
        heap_.clear();
        for (Index j = 0; j < m; ++j) {
            heap_.emplace_back(scores[j], j);
        }
        std::make_heap(heap_.begin(), heap_.end());
        const double top = heap_.front().first;
        partial_.assign(alive.size(), 0.0L);
        const Wide margin = 64 * static_cast<Wide>(m) * std::numeric_limits<Wide>::epsilon();
        for (Index left = m; left > 0 && alive.size() > 1; --left) {
            std::pop_heap(heap_.begin(), heap_.end());
            const auto [score, j] = heap_.back();
            heap_.pop_back();
            const Wide u = std::exp(static_cast<Wide>(score) - static_cast<Wide>(top));
            Wide best = std::numeric_limits<Wide>::infinity();
            for (Index a = 0; a < alive.size(); ++a) {
                partial_[a] += u * static_cast<Wide>(errors_(alive[a], j));
                best = std::min(best, partial_[a]);
            }
            // Track gaps to the leader so that shared terms cancel exactly and
            // later small terms are not absorbed. Every remaining case weighs
            // at most u.
            const Wide rest = static_cast<Wide>(max_error_) * u * static_cast<Wide>(left - 1);
            const Wide cut = rest * (1 + margin);
            Index w = 0;
            for (Index a = 0; a < alive.size(); ++a) {
                const Wide gap = partial_[a] - best;
                if (gap <= cut) {
                    alive[w] = alive[a];
                    partial_[w] = gap;
                    ++w;
                }
            }
            alive.resize(w);
            partial_.resize(w);
        }
    }

    // Sign of F_a - F_b for different supports. With C the cases both define,
    //   N_a D_b - N_b D_a = D_C sum_{j in C} w_j (e_aj - e_bj)
    //                     + sum over the other defined pairs (j, k) of w_j w_k (e_aj - e_bk),
    // so shared equal errors drop out exactly instead of cancelling in a sum.
    // Each side's weights are scaled by its own largest defined weight, which
    // keeps the leading products near 1.
    [[nodiscard]] Wide cross_difference(std::span<const double> scores, Index a, Index b)
    {
        const Index m = scores.size();
        auto scaled = [&](Index row, std::vector<Wide>& out) {
            double top = -std::numeric_limits<double>::infinity();
            for (Index j = 0; j < m; ++j) {
                if (support_.defined(row, j)) {
                    top = std::max(top, scores[j]);
                }
            }
            out.resize(m);
            for (Index j = 0; j < m; ++j) {
                out[j] = std::exp(static_cast<Wide>(scores[j]) - static_cast<Wide>(top));
            }
        };
        scaled(a, wa_);
        scaled(b, wb_);
        auto equal = [&](Index j, Index k) {
            return std::abs(errors_(a, j) - errors_(b, k)) <= resolution_[j] + resolution_[k];
        };
        Wide shared_weight = 0;
        Wide shared_gap = 0;
        for (Index j = 0; j < m; ++j) {
            if (support_.defined(a, j) && support_.defined(b, j)) {
                shared_weight += wb_[j];
                if (!equal(j, j)) {
                    shared_gap += wa_[j] * (static_cast<Wide>(errors_(a, j))
                                            - static_cast<Wide>(errors_(b, j)));
                }
            }
        }
        Wide sum = shared_weight * shared_gap;
        Wide carry = 0;
        for (Index j = 0; j < m; ++j) {
            if (!support_.defined(a, j)) {
                continue;
            }
            const bool shared_j = support_.defined(b, j);
            for (Index k = 0; k < m; ++k) {
                if (!support_.defined(b, k) || (shared_j && support_.defined(a, k))
                    || equal(j, k)) {
                    continue;
                }
                const Wide term = wa_[j] * wb_[k]
                                  * (static_cast<Wide>(errors_(a, j))
                                     - static_cast<Wide>(errors_(b, k)));
                const Wide next = sum + term;
                carry += std::abs(sum) >= std::abs(term) ? (sum - next) + term
                                                         : (term - next) + sum;
                sum = next;
            }
        }
        return sum + carry;
    }

    // Partial support: equal supports share the denominator, so their order
    // follows the numerator difference; otherwise the cross products decide.
    void pairwise(std::span<const double> scores, std::vector<Index>& ties)
    {
        const Index m = scores.size();
        const double top = *std::max_element(scores.begin(), scores.end());
        weights_.resize(m);
        for (Index j = 0; j < m; ++j) {
            weights_[j] = std::exp(static_cast<Wide>(scores[j]) - static_cast<Wide>(top));
        }
        Index best = ties.front();
        std::vector<Index> kept{best};
        for (Index t = 1; t < ties.size(); ++t) {
            const Index c = ties[t];
            Wide d = 0;
            if (group_[c] == group_[best]) {
                for (Index j = 0; j < m; ++j) {
                    d += weights_[j] * (static_cast<Wide>(errors_(c, j))
                                        - static_cast<Wide>(errors_(best, j)));
                }
            } else {
                d = cross_difference(scores, c, best);
            }
            if (d < 0) {
                best = c;
                kept.assign(1, c);
            } else if (d == 0) {
                kept.push_back(c);
            }
        }
        ties = std::move(kept);
    }

    const CaseMajor& errors_;
    const SupportMatrix& support_;
    bool full_;
    std::vector<Index> group_;
    std::vector<double> resolution_;
    double widest_ = 0.0;
    double gamma_ = 0.0;
    double floor_ = 0.0;
    double max_error_ = 0.0;
    std::vector<std::pair<double, Index>> heap_;
    std::vector<Wide> partial_;
    std::vector<Wide> weights_;
    std::vector<Wide> wa_;
    std::vector<Wide> wb_;
};

// Weights below exp(-kDropLog) of a row's largest are left out of the
// aggregated sum when few cases remain.
constexpr double kDropLog = 30.0 * std::numbers::ln2;

bool mostly_negligible(const Matrix& scores, const Eigen::VectorXd& tops)
{
    const auto kept = ((scores.colwise() - tops).array() >= -kDropLog).count();
    return kept * 8 <= scores.size();
}

} // namespace

Matrix dalex_fitness(const ErrorMatrix& errors, const SupportMatrix& support,
                     const WeightMatrix& weights)
{
    return fitness_by_event(errors, support, weights).transpose();
}

std::vector<Index> argmin_columns(const Matrix& fitness, const RandomSource& rng,
                                  std::uint64_t first_event)
{
    const Matrix by_event = fitness.transpose();
    const Index k = by_event.cols();
    std::vector<Index> out(by_event.rows());
    std::vector<Index> ties;
    for (Index j = 0; j < out.size(); ++j) {
        out[j] = argmin_row(by_event.data() + j * k, k, nullptr, rng, first_event + j, ties);
    }
    return out;
}

std::vector<Index> dalex_select(const EquivalenceClassing& classing, Index n_events,
                                const SelectorConfig& cfg, const RandomSource& rng,
                                std::uint64_t first_event)
{
    cfg.validate();
    if (cfg.method != Method::Dalex) {
        throw ConfigError("dalex_select requires method 'dalex'");
    }
    if (n_events == 0) {
        return {};
    }
    const auto& support = classing.class_support;
    const Index m = classing.class_errors.cols();
    // Relaxed mode: z-scores equal up to input rounding count as equal, so
    // per-case affine changes of the errors keep every decision.
    std::vector<double> resolution;
    CaseMajor errors = cfg.relaxed ? standardize_per_case(classing.class_errors,
                                                          classing.multiplicities(), &support,
                                                          &resolution)
                                         .values()
                                   : classing.class_errors.values();
    if (support.is_full()) {
        // Subtracting each case's minimum leaves the argmin unchanged but keeps
        // the elite terms exactly zero, so low-weight cases still separate
        // candidates that tie on the dominant ones.
        errors.rowwise() -= errors.colwise().minCoeff();
    }
    const auto scores = sample_importance(n_events, m, cfg, rng, first_event);
    NearTieRefiner refiner(errors, support, resolution);
    const Index k = classing.k();
    std::vector<Index> out(n_events);
    std::vector<Index> ties;
    auto finish = [&](Index e, const double* fitness, double slack) {
        const std::span<const double> row{scores.scores.data() + e * m, m};
        refiner.near_minimum(fitness, k, ties, slack);
        if (ties.size() > 1) {
            refiner.refine(row, ties);
        }
        out[e] = resolve(ties, &classing, rng, first_event + e);
    };

    const Eigen::VectorXd tops = scores.scores.rowwise().maxCoeff();
    if (support.is_full() && mostly_negligible(scores.scores, tops)) {
        // Unnormalized weights over the dominant cases only. Scaling a weight
        // row leaves the argmin alone, and dropped cases add at most `slack`.
        const double max_error = errors.maxCoeff();
        const double slack_cap = max_error * double(m) * std::exp(-kDropLog);
        std::vector<std::vector<Index>> near_zero(m);
        std::vector<char> near_zero_ready(m, 0);
        Eigen::VectorXd fitness(k);
        for (Index e = 0; e < n_events; ++e) {
            const double* row = scores.scores.data() + e * m;
            const double top = tops(e);
            // A lone kept case is the top one, with weight exactly 1.
            const double* sum = nullptr;
            double first_weight = 0.0;
            Index dropped = 0;
            for (Index j = 0; j < m; ++j) {
                if (row[j] < top - kDropLog) {
                    ++dropped;
                    continue;
                }
                const double w = std::exp(row[j] - top);
                if (sum == nullptr) {
                    sum = errors.col(j).data();
                    first_weight = w;
                } else {
                    if (sum != fitness.data()) {
                        fitness = first_weight * Eigen::Map<const Eigen::VectorXd>(sum, k);
                        sum = fitness.data();
                    }
                    fitness.noalias() += w * errors.col(j);
                }
            }
            const double slack = max_error * double(dropped) * std::exp(-kDropLog);
            if (sum == fitness.data()) {
                finish(e, sum, slack);
                continue;
            }
            // One case carries the sum: its shifted column has minimum 0, so the
            // classes near it come from a list made once per case.
            const auto lead = static_cast<Index>((sum - errors.data()) / k);
            if (!near_zero_ready[lead]) {
                refiner.near_minimum(sum, k, near_zero[lead], slack_cap);
                near_zero_ready[lead] = 1;
            }
            const double limit = refiner.limit(0.0, slack);
            ties.clear();
            for (Index i : near_zero[lead]) {
                if (sum[i] <= limit) {
                    ties.push_back(i);
                }
            }
            if (ties.size() > 1) {
                refiner.refine({row, m}, ties);
            }
            out[e] = resolve(ties, &classing, rng, first_event + e);
        }
        return out;
    }

    // Softmax flushes weights below the smallest normal double, which moves a
    // fitness by at most `flushed` over its denominator.
    const double flushed = 2.0 * double(m) * std::numeric_limits<double>::min()
                           * errors.cwiseAbs().maxCoeff();
    Matrix norm;
    Matrix fitness = weighted_fitness(softmax_rows(scores).weights, errors, support, &norm);
    for (Index e = 0; e < n_events; ++e) {
        double thinnest = 1.0;
        if (!support.is_full()) {
            const std::span<const double> row{scores.scores.data() + e * m, m};
            for (Index c = 0; c < k; ++c) {
                if (norm(e, c) < kThinSupport) {
                    fitness(e, c) = refiner.rescaled_fitness(row, c);
                } else {
                    thinnest = std::min(thinnest, norm(e, c));
                }
            }
        }
        finish(e, fitness.data() + e * k, flushed / thinnest);
    }
    return out;
}

std::vector<Index> lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                   const RandomSource& rng, std::uint64_t first_event)
{
    return iterative_lexicase(classing, n_events, {}, rng, first_event);
}

std::vector<double> epsilon_for_cases(const ErrorMatrix& errors,
                                      std::span<const double> multiplicities,
                                      const SupportMatrix* support)
{
    const Index n = errors.rows();
    const Index m = errors.cols();
    if (!multiplicities.empty() && multiplicities.size() != n) {
        throw ShapeError("multiplicities length does not match error rows");
    }
    if (support != nullptr && (support->rows() != n || support->cols() != m)) {
        throw ShapeError("support shape does not match error matrix");
    }
    std::vector<double> eps(m, 0.0);
    std::vector<WeightedValue> column;
    for (Index j = 0; j < m; ++j) {
        column.clear();
        for (Index i = 0; i < n; ++i) {
            if (support == nullptr || support->defined(i, j)) {
                column.push_back({errors(i, j), multiplicities.empty() ? 1.0 : multiplicities[i]});
            }
        }
        eps[j] = column.empty() ? 0.0 : median_absolute_deviation(column);
    }
    return eps;
}

std::vector<Index> epsilon_lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                           const RandomSource& rng, std::uint64_t first_event)
{
    const auto eps = epsilon_for_cases(classing.class_errors, classing.multiplicities(),
                                       &classing.class_support);
    return iterative_lexicase(classing, n_events, eps, rng, first_event);
}

std::vector<Index> batch_lexicase_select(const EquivalenceClassing& classing, Index n_events,
                                         const SelectorConfig& cfg, const RandomSource& rng,
                                         std::uint64_t first_event)
{
    cfg.validate();
    const auto& errors = classing.class_errors;
    const auto& support = classing.class_support;
    const Index k = classing.k();
    const Index m = errors.cols();
    const Index batch = std::min(cfg.batch_size, m);
    const auto mult = classing.multiplicities();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<Index> out;
    out.reserve(n_events);
    std::vector<Index> candidates;
    std::vector<Index> order;
    std::vector<Index> cases;
    std::vector<double> means(k);
    std::vector<WeightedValue> pool;

    // Support-normalized mean over the batch; NaN when undefined on all of it.
    auto batch_mean = [&](Index i) {
        double sum = 0.0;
        double count = 0.0;
        for (Index c : cases) {
            if (support.is_full() || support.defined(i, c)) {
                sum += errors(i, c);
                count += 1.0;
            }
        }
        return count > 0.0 ? sum / count : nan;
    };

    for (Index e = 0; e < n_events; ++e) {
        const std::uint64_t event = first_event + e;
        if (k == 1) {
            out.push_back(0);
            continue;
        }
        candidates.resize(k);
        std::iota(candidates.begin(), candidates.end(), Index{0});
        auto gen = rng.stream(event, Lane::Shuffle);
        LazyShuffle shuffle(order, m, gen);
        while (candidates.size() > 1 && !shuffle.done()) {
            cases.clear();
            while (cases.size() < batch && !shuffle.done()) {
                cases.push_back(shuffle.next());
            }
            double threshold = cfg.threshold_value;
            if (cfg.threshold_mode == ThresholdMode::Mad) {
                pool.clear();
                for (Index i = 0; i < k; ++i) {
                    means[i] = batch_mean(i);
                    if (!std::isnan(means[i])) {
                        pool.push_back({means[i], mult[i]});
                    }
                }
                threshold = pool.empty() ? 0.0 : median_absolute_deviation(pool);
            } else {
                for (Index i : candidates) {
                    means[i] = batch_mean(i);
                }
            }
            double best = std::numeric_limits<double>::infinity();
            for (Index i : candidates) {
                if (!std::isnan(means[i])) {
                    best = std::min(best, means[i]);
                }
            }
            if (best == std::numeric_limits<double>::infinity()) {
                continue;
            }
            const double limit = best + threshold;
            std::erase_if(candidates,
                          [&](Index i) { return std::isnan(means[i]) || means[i] > limit; });
        }
        out.push_back(resolve(candidates, &classing, rng, event));
    }
    return out;
}

std::vector<Index> select_classes(const EquivalenceClassing& classing, Index n_events,
                                  const SelectorConfig& cfg, const RandomSource& rng,
                                  std::uint64_t first_event)
{
    switch (cfg.method) {
    case Method::Dalex: return dalex_select(classing, n_events, cfg, rng, first_event);
    case Method::Lexicase: return lexicase_select(classing, n_events, rng, first_event);
    case Method::EpsilonLexicase:
        return epsilon_lexicase_select(classing, n_events, rng, first_event);
    case Method::BatchLexicase:
        return batch_lexicase_select(classing, n_events, cfg, rng, first_event);
    }
    throw ConfigError("unknown selection method");
}

std::vector<Index> select_individuals(const ErrorMatrix& errors, const SupportMatrix& support,
                                      Index n_events, const SelectorConfig& cfg,
                                      const RandomSource& rng)
{
    const auto classing = build_classes(errors, support);
    const auto classes = select_classes(classing, n_events, cfg, rng);
    return expand_class_selection(classing, classes, rng);
}

std::vector<Index> lexicase_survivors(const EquivalenceClassing& classing,
                                      std::span<const Index> order,
                                      std::span<const double> epsilons,
                                      std::vector<Index> candidates)
{
    if (candidates.empty()) {
        candidates.resize(classing.k());
        std::iota(candidates.begin(), candidates.end(), Index{0});
    }
    for (Index c : order) {
        if (candidates.size() <= 1) {
            break;
        }
        if (c >= classing.class_errors.cols()) {
            throw ShapeError("case index " + std::to_string(c) + " out of range");
        }
        filter_case(classing, c, epsilons.empty() ? 0.0 : epsilons[c], candidates);
    }
    return candidates;
}

double lexicase_exact_spacing(const ErrorMatrix& errors)
{
    const Matrix& v = errors.values();
    const double range = v.maxCoeff() - v.minCoeff();
    double gap = std::numeric_limits<double>::infinity();
    std::vector<double> column;
    for (Index j = 0; j < errors.cols(); ++j) {
        column.assign(v.col(j).begin(), v.col(j).end());
        std::sort(column.begin(), column.end());
        for (Index i = 1; i < column.size(); ++i) {
            if (column[i] > column[i - 1]) {
                gap = std::min(gap, column[i] - column[i - 1]);
            }
        }
    }
    if (gap == std::numeric_limits<double>::infinity()) {
        return 0.0;
    }
    return std::log1p(range / gap);
}

double pressure_for_spacing(double spacing, Index m)
{
    return spacing * std::sqrt((double(m) * double(m) - 1.0) / 12.0);
}

} // namespace dalex
