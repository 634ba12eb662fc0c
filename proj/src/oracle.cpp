#include "dalex/oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "dalex/errors.hpp"

namespace dalex {

namespace {

using ClassMask = std::uint64_t;
using CaseMask = std::uint32_t;

struct StateKey {
    ClassMask classes;
    CaseMask cases;
    bool operator==(const StateKey&) const = default;
};

struct StateHash {
    std::size_t operator()(const StateKey& key) const noexcept
    {
        return RandomSource::mix(key.classes ^ (std::uint64_t{key.cases} << 40) ^ key.cases);
    }
};

class LexicaseRecursion {
public:
    LexicaseRecursion(const EquivalenceClassing& classing, std::span<const double> epsilons,
                      bool memoize)
        : classing_(classing), eps_(epsilons), memoize_(memoize), k_(classing.k())
    {
    }

    std::vector<double> solve(ClassMask classes, CaseMask cases)
    {
        if (memoize_) {
            if (auto it = memo_.find({classes, cases}); it != memo_.end()) {
                return it->second;
            }
        }
        std::vector<double> probs(k_, 0.0);
        const int alive = std::popcount(classes);
        if (alive == 1) {
            probs[std::countr_zero(classes)] = 1.0;
        } else if (cases == 0) {
            // survivors are resolved uniformly over individuals
            double members = 0.0;
            for (Index c = 0; c < k_; ++c) {
                if (classes >> c & 1U) {
                    members += static_cast<double>(classing_.members[c].size());
                }
            }
            for (Index c = 0; c < k_; ++c) {
                if (classes >> c & 1U) {
                    probs[c] = static_cast<double>(classing_.members[c].size()) / members;
                }
            }
        } else {
            const int remaining = std::popcount(cases);
            for (Index t = 0; t < classing_.class_errors.cols(); ++t) {
                if (!(cases >> t & 1U)) {
                    continue;
                }
                const auto sub = solve(filter(classes, t), cases & ~(CaseMask{1} << t));
                for (Index c = 0; c < k_; ++c) {
                    probs[c] += sub[c];
                }
            }
            for (double& p : probs) {
                p /= remaining;
            }
        }
        if (memoize_) {
            memo_.emplace(StateKey{classes, cases}, probs);
        }
        return probs;
    }

private:
    ClassMask filter(ClassMask classes, Index t) const
    {
        const auto& errors = classing_.class_errors;
        const auto& support = classing_.class_support;
        double best = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < k_; ++c) {
            if ((classes >> c & 1U) && support.defined(c, t)) {
                best = std::min(best, errors(c, t));
            }
        }
        if (best == std::numeric_limits<double>::infinity()) {
            return classes;
        }
        const double limit = best + (eps_.empty() ? 0.0 : eps_[t]);
        ClassMask kept = 0;
        for (Index c = 0; c < k_; ++c) {
            if ((classes >> c & 1U) && support.defined(c, t) && errors(c, t) <= limit) {
                kept |= ClassMask{1} << c;
            }
        }
        return kept;
    }

    const EquivalenceClassing& classing_;
    std::span<const double> eps_;
    bool memoize_;
    Index k_;
    std::unordered_map<StateKey, std::vector<double>, StateHash> memo_;
};

SelectionDistribution run_oracle(const EquivalenceClassing& classing,
                                 std::span<const double> epsilons, bool memoize)
{
    const Index k = classing.k();
    const Index m = classing.class_errors.cols();
    if (!within_oracle_guard(classing)) {
        throw GuardError("exact oracle supports at most " + std::to_string(kOracleMaxCases)
                         + " cases and " + std::to_string(kOracleMaxClasses)
                         + " classes; instance has " + std::to_string(m) + " cases and "
                         + std::to_string(k) + " classes");
    }
    if (!epsilons.empty() && epsilons.size() != m) {
        throw ShapeError("epsilon vector length does not match case count");
    }
    const ClassMask all_classes = k == 64 ? ~ClassMask{0} : (ClassMask{1} << k) - 1;
    const CaseMask all_cases = (CaseMask{1} << m) - 1;
    LexicaseRecursion recursion(classing, epsilons, memoize);
    return {recursion.solve(all_classes, all_cases), SelectionDistribution::Kind::Exact, 0};
}

} // namespace

void SelectionDistribution::validate(double tol) const
{
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) {
            throw ShapeError("probabilities must be non-negative");
        }
        sum += p;
    }
    if (probs.empty() || std::abs(sum - 1.0) > tol) {
        throw ShapeError("probabilities must sum to 1 (sum = " + format_double(sum) + ")");
    }
}

SelectionDistribution SelectionDistribution::expand(const EquivalenceClassing& classing) const
{
    if (probs.size() != classing.k()) {
        throw ShapeError("distribution length does not match class count");
    }
    SelectionDistribution out{std::vector<double>(classing.population(), 0.0), kind, n_samples};
    for (Index c = 0; c < classing.k(); ++c) {
        const auto& mem = classing.members[c];
        for (Index i : mem) {
            out.probs[i] = probs[c] / static_cast<double>(mem.size());
        }
    }
    return out;
}

nlohmann::json SelectionDistribution::to_json() const
{
    nlohmann::json j;
    j["kind"] = kind == Kind::Exact ? "exact" : "empirical";
    if (kind == Kind::Empirical) {
        j["n_samples"] = n_samples;
    }
    j["probs"] = probs;
    return j;
}

SelectionDistribution SelectionDistribution::from_json(const nlohmann::json& j)
{
    try {
        SelectionDistribution d;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "exact") {
            d.kind = Kind::Exact;
        } else if (kind == "empirical") {
            d.kind = Kind::Empirical;
            d.n_samples = j.at("n_samples").get<Index>();
        } else {
            throw ParseError("unknown distribution kind '" + kind + "'");
        }
        d.probs = j.at("probs").get<std::vector<double>>();
        d.validate(1e-6);
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed distribution: ") + e.what());
    }
}

bool within_oracle_guard(const EquivalenceClassing& classing) noexcept
{
    return classing.class_errors.cols() <= kOracleMaxCases && classing.k() <= kOracleMaxClasses;
}

SelectionDistribution exact_lexicase_probs(const EquivalenceClassing& classing, bool memoize)
{
    return run_oracle(classing, {}, memoize);
}

SelectionDistribution exact_epsilon_lexicase_probs(const EquivalenceClassing& classing,
                                                   std::span<const double> epsilons,
                                                   bool memoize)
{
    if (epsilons.size() != classing.class_errors.cols()) {
        throw ShapeError("epsilon vector length does not match case count");
    }
    return run_oracle(classing, epsilons, memoize);
}

SelectionDistribution empirical_distribution(std::span<const Index> selections, Index k)
{
    if (selections.empty()) {
        throw ShapeError("empirical distribution needs at least one sample");
    }
    std::vector<double> counts(k, 0.0);
    for (Index s : selections) {
        if (s >= k) {
            throw ShapeError("selection index " + std::to_string(s) + " out of range");
        }
        counts[s] += 1.0;
    }
    const double n = static_cast<double>(selections.size());
    for (double& c : counts) {
        c /= n;
    }
    return {std::move(counts), SelectionDistribution::Kind::Empirical, selections.size()};
}

SelectionDistribution sample_distribution(const EquivalenceClassing& classing,
                                          const SelectorConfig& cfg, Index n_samples,
                                          const RandomSource& rng)
{
    const auto picks = select_classes(classing, n_samples, cfg, rng);
    return empirical_distribution(picks, classing.k());
}

} // namespace dalex
