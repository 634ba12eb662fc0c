#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "brute_force.hpp"
#include "dalex/errors.hpp"
#include "dalex/metrics.hpp"
#include "dalex/oracle.hpp"

using namespace dalex;

namespace {

brute::Rows random_rows(Index n, Index m, int levels, Rng& gen)
{
    std::uniform_int_distribution<int> v(0, levels - 1);
    brute::Rows rows(n, std::vector<double>(m));
    for (auto& r : rows) {
        for (double& x : r) {
            x = v(gen);
        }
    }
    return rows;
}

// Class probabilities from the enumeration oracle run on individual rows.
std::vector<double> brute_by_class(const brute::Rows& rows, const EquivalenceClassing& c,
                                   const std::vector<double>& eps = {})
{
    const auto per_row = brute::lexicase_probs(rows, {}, eps);
    std::vector<double> out(c.k(), 0.0);
    for (Index cls = 0; cls < c.k(); ++cls) {
        for (Index i : c.members[cls]) {
            out[cls] += per_row[i];
        }
    }
    return out;
}

} // namespace

TEST_CASE("exact_lexicase_probs examples")
{
    CHECK(exact_lexicase_probs(build_classes(ErrorMatrix::from_rows({{0, 1}, {1, 0}}))).probs
          == std::vector<double>{0.5, 0.5});
    CHECK(exact_lexicase_probs(build_classes(ErrorMatrix::from_rows({{0, 0}, {0, 1}, {1, 0}})))
              .probs
          == std::vector<double>{1.0, 0.0, 0.0});
    const auto one = exact_lexicase_probs(build_classes(ErrorMatrix::from_rows({{0, 1}, {0, 1}})));
    CHECK(one.probs == std::vector<double>{1.0});
    CHECK(one.kind == SelectionDistribution::Kind::Exact);
}

TEST_CASE("exact_epsilon_lexicase_probs examples")
{
    const auto c = build_classes(ErrorMatrix::from_rows({{0.0}, {0.5}, {2.0}}));
    const std::vector<double> eps{0.5};
    CHECK(exact_epsilon_lexicase_probs(c, eps).probs == std::vector<double>{0.5, 0.5, 0.0});

    const auto d = build_classes(ErrorMatrix::from_rows({{0, 1, 2}, {1, 0, 0}, {2, 2, 1}}));
    const std::vector<double> zero(3, 0.0);
    CHECK(exact_epsilon_lexicase_probs(d, zero).probs == exact_lexicase_probs(d).probs);

    const std::vector<double> wide(3, 5.0);
    const auto u = exact_epsilon_lexicase_probs(d, wide).probs;
    for (double p : u) {
        CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }
    CHECK_THROWS_AS(exact_epsilon_lexicase_probs(d, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("oracle size guard")
{
    const auto wide = build_classes(ErrorMatrix(Matrix::Zero(2, 13)));
    CHECK_FALSE(within_oracle_guard(wide));
    CHECK_THROWS_AS(exact_lexicase_probs(wide), GuardError);
    Matrix tall(65, 1);
    for (Index i = 0; i < 65; ++i) {
        tall(i, 0) = double(i);
    }
    CHECK_THROWS_AS(exact_lexicase_probs(build_classes(ErrorMatrix(tall))), GuardError);
    CHECK(within_oracle_guard(build_classes(ErrorMatrix(Matrix::Zero(2, 12)))));
}

TEST_CASE("oracle agrees with ordering enumeration (property)")
{
    Rng gen(101);
    for (int t = 0; t < 60; ++t) {
        const Index n = 2 + t % 7;
        const Index m = 1 + t % 5;
        const auto rows = random_rows(n, m, 3, gen);
        const auto c = build_classes(ErrorMatrix::from_rows(rows));
        const auto expected = brute_by_class(rows, c);
        const auto got = exact_lexicase_probs(c);
        got.validate();
        for (Index i = 0; i < c.k(); ++i) {
            CHECK(got.probs[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
        // with epsilons taken over the population
        const auto eps = epsilon_for_cases(ErrorMatrix::from_rows(rows));
        const auto expected_eps = brute_by_class(rows, c, eps);
        const auto got_eps = exact_epsilon_lexicase_probs(c, eps);
        for (Index i = 0; i < c.k(); ++i) {
            CHECK(got_eps.probs[i] == doctest::Approx(expected_eps[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("oracle partial support agrees with enumeration")
{
    const brute::Rows rows{{0, 0, 2, 1}, {1, 0, 0, 0}, {0, 3, 1, 0}, {2, 0, 0, 1}};
    const brute::Rows sup{{1, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 1, 1}, {1, 1, 0, 1}};
    const auto c = build_classes(ErrorMatrix::from_rows(rows), SupportMatrix::from_rows(sup));
    const auto expected = brute::lexicase_probs(rows, sup);
    const auto got = exact_lexicase_probs(c).probs;
    for (Index i = 0; i < 4; ++i) {
        CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("memoized and plain recursions agree bit for bit")
{
    Rng gen(7);
    for (int t = 0; t < 40; ++t) {
        const auto rows = random_rows(2 + t % 6, 1 + t % 4, 3, gen);
        const auto c = build_classes(ErrorMatrix::from_rows(rows));
        CHECK(exact_lexicase_probs(c, true).probs == exact_lexicase_probs(c, false).probs);
        const auto eps = epsilon_for_cases(c.class_errors, c.multiplicities());
        CHECK(exact_epsilon_lexicase_probs(c, eps, true).probs
              == exact_epsilon_lexicase_probs(c, eps, false).probs);
    }
}

TEST_CASE("oracle is permutation-equivariant in classes and cases (property)")
{
    Rng gen(77);
    for (int t = 0; t < 30; ++t) {
        const auto rows = random_rows(5, 4, 4, gen);
        std::vector<Index> row_perm{0, 1, 2, 3, 4};
        std::vector<Index> case_perm{0, 1, 2, 3};
        std::shuffle(row_perm.begin(), row_perm.end(), gen);
        std::shuffle(case_perm.begin(), case_perm.end(), gen);
        brute::Rows permuted(5, std::vector<double>(4));
        for (Index i = 0; i < 5; ++i) {
            for (Index j = 0; j < 4; ++j) {
                permuted[i][j] = rows[row_perm[i]][case_perm[j]];
            }
        }
        // compare per individual so differing class orders do not matter
        const auto a = exact_lexicase_probs(build_classes(ErrorMatrix::from_rows(rows)));
        const auto cb = build_classes(ErrorMatrix::from_rows(permuted));
        const auto ca = build_classes(ErrorMatrix::from_rows(rows));
        const auto ia = a.expand(ca).probs;
        const auto ib = exact_lexicase_probs(cb).expand(cb).probs;
        for (Index i = 0; i < 5; ++i) {
            CHECK(ib[i] == doctest::Approx(ia[row_perm[i]]).epsilon(1e-12));
        }
    }
}

TEST_CASE("ties at exhaustion weigh classes by size")
{
    // median 0.4 and MAD 0.4: classes {0.0} and {0.4, 0.4} survive together
    const auto c = build_classes(ErrorMatrix::from_rows({{0.0}, {0.4}, {0.4}, {1.2}, {1.6}}));
    const auto eps = epsilon_for_cases(c.class_errors, c.multiplicities());
    REQUIRE(eps[0] == doctest::Approx(0.4));
    const auto p = exact_epsilon_lexicase_probs(c, eps).probs;
    CHECK(p[0] == doctest::Approx(1.0 / 3));
    CHECK(p[1] == doctest::Approx(2.0 / 3));
    const auto sampled = epsilon_lexicase_select(c, 60000, RandomSource(3));
    const auto f = empirical_distribution(sampled, c.k());
    CHECK(std::abs(f.probs[1] - 2.0 / 3) <= 0.01);
}

TEST_CASE("empirical_distribution")
{
    const std::vector<Index> same(100, 2);
    const auto point = empirical_distribution(same, 4);
    CHECK(point.probs == std::vector<double>{0, 0, 1, 0});
    CHECK(point.kind == SelectionDistribution::Kind::Empirical);
    CHECK(point.n_samples == 100);

    const auto c = build_classes(ErrorMatrix::from_rows({{0, 1}, {1, 0}}));
    SelectorConfig lex;
    lex.method = Method::Lexicase;
    const auto d = sample_distribution(c, lex, 50000, RandomSource(9));
    CHECK(std::abs(d.probs[0] - 0.5) <= 0.01);
    d.validate();

    Rng gen(1);
    std::uniform_int_distribution<Index> any(0, 6);
    std::vector<Index> picks(777);
    for (Index& p : picks) {
        p = any(gen);
    }
    const auto r = empirical_distribution(picks, 7);
    double total = 0;
    for (double p : r.probs) {
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(empirical_distribution(std::vector<Index>{}, 3));
    CHECK_THROWS(empirical_distribution(std::vector<Index>{3}, 3));
}

TEST_CASE("empirical lexicase converges to the oracle")
{
    Rng gen(55);
    SelectorConfig lex;
    lex.method = Method::Lexicase;
    for (int t = 0; t < 10; ++t) {
        const auto rows = random_rows(10, 6, 3, gen);
        const auto c = build_classes(ErrorMatrix::from_rows(rows));
        const auto exact = exact_lexicase_probs(c);
        const auto sampled = sample_distribution(c, lex, 100000, RandomSource(t));
        CHECK(js_divergence(exact.probs, sampled.probs) < 5e-3);
    }
}

TEST_CASE("SelectionDistribution json and expansion")
{
    SelectionDistribution d{{0.25, 0.75}, SelectionDistribution::Kind::Empirical, 40};
    const auto j = d.to_json();
    CHECK(j["kind"] == "empirical");
    const auto back = SelectionDistribution::from_json(j);
    CHECK(back.probs == d.probs);
    CHECK(back.n_samples == 40);
    CHECK(back.kind == d.kind);

    const auto c = build_classes(ErrorMatrix::from_rows({{1}, {2}, {1}}));
    const auto e = d.expand(c);
    CHECK(e.probs == std::vector<double>{0.125, 0.75, 0.125});

    SelectionDistribution bad{{0.5, 0.6}};
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    SelectionDistribution neg{{1.5, -0.5}};
    CHECK_THROWS_AS(neg.validate(), ShapeError);
}
