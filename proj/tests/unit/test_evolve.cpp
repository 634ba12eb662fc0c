#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "dalex/errors.hpp"
#include "dalex/evolve.hpp"

using namespace dalex;

namespace {

// Greedy token-by-token descent on training error; the vector problems are
// separable, so this reaches zero error.
Genome solve_by_descent(const SyntheticProblem& problem)
{
    Genome g;
    double err = problem.evaluate(g).total_train_error();
    bool moved = true;
    while (err > 0 && moved) {
        moved = false;
        for (Token t = 0; t < problem.token_count(); ++t) {
            Genome next = g;
            next.push_back(t);
            const double e = problem.evaluate(next).total_train_error();
            if (e < err) {
                g = std::move(next);
                err = e;
                moved = true;
                break;
            }
        }
    }
    return g;
}

EvolutionConfig small_run(ProblemKind kind, Method method)
{
    EvolutionConfig cfg;
    cfg.problem.kind = kind;
    cfg.problem.cases = 6;
    cfg.problem.seed = 3;
    cfg.selector.method = method;
    cfg.pop_size = 40;
    cfg.generations = 15;
    cfg.seed = 11;
    return cfg;
}

} // namespace

TEST_CASE("umad_mutate")
{
    Rng gen(1);
    const Genome g{1, 2, 3, 4, 5};
    CHECK(umad_mutate(g, 0.0, 10, gen) == g);
    CHECK(umad_mutate({}, 0.09, 10, gen).empty());
    CHECK_THROWS_AS(umad_mutate(g, 1.0, 10, gen), ConfigError);

    SUBCASE("length neutral on average")
    {
        const Genome big(100000, 3);
        double total = 0;
        for (int r = 0; r < 20; ++r) {
            total += double(umad_mutate(big, 0.09, 10, gen).size());
        }
        CHECK(std::abs(total / 20 / 100000.0 - 1.0) < 0.01);
    }
    SUBCASE("tokens stay in range")
    {
        for (Token t : umad_mutate(Genome(1000, 0), 0.5, 7, gen)) {
            CHECK(t >= 0);
            CHECK(t < 7);
        }
    }
}

TEST_CASE("downsample_cases")
{
    Rng gen(2);
    std::vector<Index> all(10);
    std::iota(all.begin(), all.end(), Index{0});
    CHECK(downsample_cases(10, 1.0, gen) == all);
    const auto quarter = downsample_cases(100, 0.25, gen);
    CHECK(quarter.size() == 25);
    CHECK(std::set<Index>(quarter.begin(), quarter.end()).size() == 25);
    CHECK(std::is_sorted(quarter.begin(), quarter.end()));
    CHECK(downsample_cases(3, 0.01, gen).size() == 1);
    CHECK_THROWS_AS(downsample_cases(3, 0.0, gen), ConfigError);

    SUBCASE("independent substreams are uniform (chi-square)")
    {
        // 20 cases, 5 drawn per call, 4000 calls from distinct generation streams
        const RandomSource root(4);
        std::vector<double> counts(20, 0.0);
        for (Index g = 0; g < 4000; ++g) {
            auto s = root.derive(g).stream(0, Lane::Harness);
            for (Index c : downsample_cases(20, 0.25, s)) {
                counts[c] += 1;
            }
        }
        const double expected = 4000.0 * 5 / 20;
        double chi2 = 0;
        for (double c : counts) {
            chi2 += (c - expected) * (c - expected) / expected;
        }
        // 19 degrees of freedom; 99.9th percentile is 43.8
        CHECK(chi2 < 43.8);
    }
}

TEST_CASE("synthetic problems")
{
    for (auto kind : {ProblemKind::DiscreteVector, ProblemKind::ContinuousVector,
                      ProblemKind::PartialSupport}) {
        ProblemSpec spec;
        spec.kind = kind;
        spec.seed = 5;
        const SyntheticProblem a(spec);
        const SyntheticProblem b(spec);
        const Genome g{0, 1, 2, 3, 2};
        const auto ea = a.evaluate(g);
        const auto eb = b.evaluate(g);
        CHECK(ea.train_errors == eb.train_errors);
        CHECK(ea.train_support == eb.train_support);
        CHECK(ea.train_errors.size() == a.train_cases());
        CHECK(ea.test_errors.size() == a.test_cases());
        const auto empty = a.evaluate({});
        for (double e : empty.train_errors) {
            CHECK(e == a.worst_error());
        }
        CHECK(std::all_of(empty.train_support.begin(), empty.train_support.end(),
                          [](double s) { return s == 1.0; }));
        CHECK_FALSE(empty.solved);
    }
    SUBCASE("discrete optimum solves train and test")
    {
        ProblemSpec spec;
        spec.cases = 7;
        const SyntheticProblem p(spec);
        const auto e = p.evaluate(solve_by_descent(p));
        CHECK(e.total_train_error() == 0.0);
        CHECK(e.solved);
    }
    SUBCASE("partial support rules cover subsets")
    {
        ProblemSpec spec;
        spec.kind = ProblemKind::PartialSupport;
        spec.cases = 30;
        const SyntheticProblem p(spec);
        // condition on feature 0 being 1
        const auto e = p.evaluate({1});
        const double covered = std::accumulate(e.train_support.begin(), e.train_support.end(), 0.0);
        CHECK(covered > 0);
        CHECK(covered < 30);
        for (Index j = 0; j < 30; ++j) {
            if (e.train_support[j] == 0.0) {
                CHECK(e.train_errors[j] == 0.0);
            }
        }
    }
}

TEST_CASE("run_evolution basics")
{
    auto cfg = small_run(ProblemKind::DiscreteVector, Method::Lexicase);
    SUBCASE("one generation, one record")
    {
        cfg.generations = 1;
        const auto r = run_evolution(cfg);
        CHECK(r.records.size() == 1);
        CHECK(r.records[0].parents == cfg.pop_size);
    }
    SUBCASE("reruns are identical")
    {
        for (auto method : {Method::Dalex, Method::Lexicase, Method::EpsilonLexicase,
                            Method::BatchLexicase}) {
            cfg.selector.method = method;
            cfg.downsample_rate = 0.5;
            const auto a = run_evolution(cfg);
            const auto b = run_evolution(cfg);
            REQUIRE(a.records.size() == b.records.size());
            for (Index g = 0; g < a.records.size(); ++g) {
                CHECK(a.records[g].to_json(false) == b.records[g].to_json(false));
            }
            CHECK(a.parent_ids == b.parent_ids);
        }
    }
    SUBCASE("conservation and lineage")
    {
        cfg.stop_on_success = false;
        const auto r = run_evolution(cfg);
        CHECK(r.records.size() == cfg.generations);
        for (Index g = 0; g < r.records.size(); ++g) {
            CHECK(r.records[g].parents == cfg.pop_size);
            CHECK(r.ids[g].size() == cfg.pop_size);
            CHECK(r.records[g].selection_seconds >= 0.0);
            if (g > 0) {
                const std::set<IndividualId> previous(r.ids[g - 1].begin(), r.ids[g - 1].end());
                for (IndividualId p : r.parent_ids[g]) {
                    CHECK(previous.count(p) == 1);
                }
            }
        }
    }
    SUBCASE("invalid configuration")
    {
        cfg.pop_size = 1;
        CHECK_THROWS_AS(run_evolution(cfg), ConfigError);
    }
}

TEST_CASE("successful lineage reaches generation 0")
{
    auto cfg = small_run(ProblemKind::DiscreteVector, Method::Lexicase);
    cfg.problem.cases = 4;
    cfg.pop_size = 100;
    cfg.generations = 200;
    const auto r = run_evolution(cfg);
    REQUIRE(r.success);
    REQUIRE(r.success_generation.has_value());
    const Index last = *r.success_generation;
    CHECK(std::count(r.ids[last].begin(), r.ids[last].end(), *r.success_id) == 1);
    // walk parent ids back and compare with the recorded ancestors
    std::map<IndividualId, IndividualId> parent;
    for (Index g = 0; g <= last; ++g) {
        for (Index i = 0; i < r.ids[g].size(); ++i) {
            parent[r.ids[g][i]] = r.parent_ids[g][i];
        }
    }
    IndividualId cur = *r.success_id;
    for (Index g = last + 1; g-- > 0;) {
        REQUIRE(r.records[g].ancestor.has_value());
        CHECK(*r.records[g].ancestor == cur);
        CHECK(std::count(r.ids[g].begin(), r.ids[g].end(), cur) == 1);
        cur = parent[cur];
    }
}

TEST_CASE("selectors only see the sampled columns")
{
    auto cfg = small_run(ProblemKind::DiscreteVector, Method::Dalex);
    cfg.problem.cases = 12;
    cfg.downsample_rate = 0.25;
    cfg.stop_on_success = false;
    Index calls = 0;
    const auto r = run_evolution(cfg, [&](Index g, const EquivalenceClassing& c,
                                          std::span<const Index> cases) {
        CHECK(c.class_errors.cols() == 3);
        CHECK(cases.size() == 3);
        ++calls;
        (void)g;
    });
    CHECK(calls == cfg.generations);
    std::set<std::vector<Index>> distinct;
    for (const auto& rec : r.records) {
        distinct.insert(rec.cases);
    }
    CHECK(distinct.size() > 1);
}

TEST_CASE("dominant optimum is selected for every slot")
{
    auto cfg = small_run(ProblemKind::DiscreteVector, Method::Dalex);
    cfg.selector.pressure = 0.0;
    cfg.generations = 2;
    cfg.stop_on_success = false;
    const SyntheticProblem p(cfg.problem);
    cfg.seed_genomes = {solve_by_descent(p)};
    const auto r = run_evolution(cfg);
    REQUIRE(r.success);
    CHECK(r.success_generation == 0u);
    // every generation-1 parent is a zero-error generation-0 individual
    const auto e = p.evaluate(cfg.seed_genomes[0]);
    REQUIRE(e.total_train_error() == 0.0);
    CHECK(r.records[0].best_error == 0.0);
    const IndividualId optimum = r.ids[0][0];
    for (IndividualId parent : r.parent_ids[1]) {
        CHECK(parent == optimum);
    }
}

TEST_CASE("fidelity_trace")
{
    auto cfg = small_run(ProblemKind::DiscreteVector, Method::Lexicase);
    cfg.problem.cases = 4;
    cfg.pop_size = 60;
    cfg.generations = 200;
    SUBCASE("candidate equal to reference: zero divergence, unit ratio")
    {
        FidelityOptions opt;
        opt.candidate = cfg.selector;
        opt.mode = ReferenceMode::Exact;
        const auto t = fidelity_trace(cfg, opt);
        REQUIRE(t.run.success);
        REQUIRE(t.reports.size() == t.run.records.size());
        for (const auto& rep : t.reports) {
            CHECK(rep.js_divergence == 0.0);
            REQUIRE(rep.probability_ratio.has_value());
            CHECK(*rep.probability_ratio == 1.0);
        }
    }
    SUBCASE("high-pressure dalex tracks lexicase")
    {
        FidelityOptions opt;
        opt.candidate.method = Method::Dalex;
        opt.candidate.pressure = 200.0;
        opt.samples = 20000;
        const auto t = fidelity_trace(cfg, opt);
        double total = 0;
        for (const auto& rep : t.reports) {
            total += rep.js_divergence;
        }
        CHECK(total / double(t.reports.size()) < 0.01);
    }
    SUBCASE("exact mode refuses large instances")
    {
        cfg.problem.cases = 20;
        FidelityOptions opt;
        opt.candidate = cfg.selector;
        opt.mode = ReferenceMode::Exact;
        CHECK_THROWS_AS(fidelity_trace(cfg, opt), GuardError);
    }
}

TEST_CASE("method_distribution")
{
    const auto c = build_classes(ErrorMatrix::from_rows({{0, 1}, {1, 0}, {2, 2}}));
    SelectorConfig lex;
    lex.method = Method::Lexicase;
    const auto exact = method_distribution(c, lex, 100, ReferenceMode::ExactOrEmpirical,
                                           RandomSource(1));
    CHECK(exact.kind == SelectionDistribution::Kind::Exact);
    const auto sampled = method_distribution(c, lex, 100, ReferenceMode::Empirical,
                                             RandomSource(1));
    CHECK(sampled.kind == SelectionDistribution::Kind::Empirical);
    CHECK(sampled.n_samples == 100);
    SelectorConfig dx;
    const auto d = method_distribution(c, dx, 1000, ReferenceMode::ExactOrEmpirical,
                                       RandomSource(1));
    CHECK(d.kind == SelectionDistribution::Kind::Empirical);
    // no oracle for dalex: sampled even when exact is requested
    CHECK(method_distribution(c, dx, 1000, ReferenceMode::Exact, RandomSource(1)).kind
          == SelectionDistribution::Kind::Empirical);
}
