#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "dalex/core.hpp"
#include "dalex/errors.hpp"

using namespace dalex;

namespace {

// Definitional grouping: i and j share a class iff their (error, support)
// rows compare equal element by element.
bool same_pair(const ErrorMatrix& e, const SupportMatrix& s, Index a, Index b)
{
    for (Index j = 0; j < e.cols(); ++j) {
        if (e(a, j) != e(b, j) || s.mask()(a, j) != s.mask()(b, j)) {
            return false;
        }
    }
    return true;
}

ErrorMatrix random_integer_matrix(Index n, Index m, int hi, Rng& gen)
{
    std::uniform_int_distribution<int> v(0, hi);
    Matrix x(n, m);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            x(i, j) = v(gen);
        }
    }
    return ErrorMatrix(std::move(x));
}

} // namespace

TEST_CASE("ErrorMatrix rejects non-finite and empty input")
{
    CHECK_THROWS_AS(ErrorMatrix(Matrix(0, 3)), ShapeError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(ErrorMatrix{bad}, ShapeError);
    bad(1, 1) = INFINITY;
    CHECK_THROWS_AS(ErrorMatrix{bad}, ShapeError);
    CHECK_THROWS_AS(ErrorMatrix::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST_CASE("SupportMatrix invariants")
{
    CHECK_THROWS_AS(SupportMatrix::from_rows({{1, 0}, {0, 0}}), ShapeError);
    CHECK_THROWS_AS(SupportMatrix::from_rows({{1, 0.5}}), ShapeError);
    CHECK(SupportMatrix::full(2, 3).is_full());
    CHECK_FALSE(SupportMatrix::from_rows({{1, 0}}).is_full());

    const auto errors = ErrorMatrix::from_rows({{1, 2}});
    CHECK_THROWS_AS(check_pair(errors, SupportMatrix::from_rows({{1, 0}})), ShapeError);
    CHECK_THROWS_AS(check_pair(errors, SupportMatrix::full(2, 2)), ShapeError);
    CHECK_NOTHROW(check_pair(ErrorMatrix::from_rows({{1, 0}}), SupportMatrix::from_rows({{1, 0}})));
}

TEST_CASE("build_classes examples")
{
    SUBCASE("duplicate rows")
    {
        const auto c = build_classes(ErrorMatrix::from_rows({{0, 1}, {0, 1}, {2, 3}}));
        REQUIRE(c.k() == 2);
        CHECK(c.members[0] == std::vector<Index>{0, 1});
        CHECK(c.members[1] == std::vector<Index>{2});
        CHECK(c.class_errors(1, 1) == 3.0);
    }
    SUBCASE("singleton")
    {
        const auto c = build_classes(ErrorMatrix::from_rows({{5}}));
        REQUIRE(c.k() == 1);
        CHECK(c.members[0] == std::vector<Index>{0});
    }
    SUBCASE("support distinguishes equal error rows")
    {
        const auto e = ErrorMatrix::from_rows({{0, 1}, {0, 1}});
        Matrix mask(2, 2);
        mask << 1, 1, 1, 0;
        // second row's undefined case must carry error 0
        const auto e2 = ErrorMatrix::from_rows({{0, 0}, {0, 0}});
        const SupportMatrix s(mask);
        CHECK_FALSE(same_pair(e2, s, 0, 1));
        const auto c = build_classes(e2, s);
        CHECK(c.k() == 2);
        CHECK_THROWS_AS(build_classes(e, s), ShapeError);
    }
    SUBCASE("-0.0 and 0.0 group together")
    {
        const auto c = build_classes(ErrorMatrix::from_rows({{0.0, 1}, {-0.0, 1}}));
        CHECK(c.k() == 1);
    }
}

TEST_CASE("build_classes partitions the population (property)")
{
    Rng gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<Index> dim(1, 8);
        const Index n = dim(gen) * 3;
        const Index m = dim(gen);
        const auto e = random_integer_matrix(n, m, 1, gen);
        Matrix mask = Matrix::Ones(n, m);
        Matrix vals = e.values();
        std::bernoulli_distribution off(0.3);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 1; j < m; ++j) {
                if (off(gen)) {
                    mask(i, j) = 0;
                    vals(i, j) = 0;
                }
            }
        }
        const ErrorMatrix errors(vals);
        const SupportMatrix support(mask);
        const auto c = build_classes(errors, support);
        CHECK(c.k() <= n);
        CHECK(c.population() == n);

        std::vector<Index> all;
        std::vector<Index> class_of(n);
        Index prev_first = 0;
        for (Index k = 0; k < c.k(); ++k) {
            REQUIRE_FALSE(c.members[k].empty());
            if (k > 0) {
                CHECK(c.members[k].front() > prev_first); // first-occurrence order
            }
            prev_first = c.members[k].front();
            for (Index i : c.members[k]) {
                all.push_back(i);
                class_of[i] = k;
                CHECK(same_pair(errors, support, i, c.members[k].front()));
            }
        }
        std::sort(all.begin(), all.end());
        std::vector<Index> expected(n);
        std::iota(expected.begin(), expected.end(), Index{0});
        CHECK(all == expected);
        for (Index a = 0; a < n; ++a) {
            for (Index b = 0; b < n; ++b) {
                CHECK((class_of[a] == class_of[b]) == same_pair(errors, support, a, b));
            }
        }
    }
}

TEST_CASE("expand_class_selection")
{
    const auto c = build_classes(ErrorMatrix::from_rows({{0}, {1}, {1}, {2}, {3}}));
    const RandomSource rng(3);

    SUBCASE("singleton class maps to its member")
    {
        const std::vector<Index> pick{3};
        CHECK(expand_class_selection(c, pick, rng) == std::vector<Index>{4});
    }
    SUBCASE("empty selection")
    {
        CHECK(expand_class_selection(c, {}, rng).empty());
    }
    SUBCASE("out of range class")
    {
        const std::vector<Index> pick{9};
        CHECK_THROWS_AS(expand_class_selection(c, pick, rng), ShapeError);
    }
    SUBCASE("uniform among members")
    {
        // Class 1 = {1, 2}; binomial sd at n=10^4 is 0.005, bound is 4 sd.
        const std::vector<Index> picks(10000, 1);
        const auto out = expand_class_selection(c, picks, rng);
        const auto ones = std::count(out.begin(), out.end(), Index{1});
        const auto twos = std::count(out.begin(), out.end(), Index{2});
        CHECK(ones + twos == 10000);
        CHECK(std::abs(ones / 10000.0 - 0.5) <= 0.02);
    }
    SUBCASE("expanding every class reproduces the partition")
    {
        for (Index k = 0; k < c.k(); ++k) {
            const std::vector<Index> picks(200, k);
            for (Index i : expand_class_selection(c, picks, rng)) {
                CHECK(std::find(c.members[k].begin(), c.members[k].end(), i)
                      != c.members[k].end());
            }
        }
    }
}

TEST_CASE("standardize_per_case")
{
    const std::vector<double> ones2{1, 1};
    const std::vector<double> ones3{1, 1, 1};

    SUBCASE("two values")
    {
        // mean 2, population sd 1
        const auto z = standardize_per_case(ErrorMatrix::from_rows({{1}, {3}}), ones2);
        CHECK(z(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(z(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("constant column")
    {
        const auto z = standardize_per_case(ErrorMatrix::from_rows({{7}, {7}, {7}}), ones3);
        CHECK(z.values().isZero(0.0));
    }
    SUBCASE("idempotent on standardized input")
    {
        const auto e = ErrorMatrix::from_rows({{0.3, 5}, {1.7, -2}, {9.1, 4}});
        const auto z1 = standardize_per_case(e, ones3);
        const auto z2 = standardize_per_case(z1, ones3);
        CHECK((z1.values() - z2.values()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("multiplicity weighting equals expanded rows")
    {
        const auto classes = ErrorMatrix::from_rows({{1, 4}, {2, 0}});
        const std::vector<double> mult{3, 1};
        const auto expanded = ErrorMatrix::from_rows({{1, 4}, {1, 4}, {1, 4}, {2, 0}});
        const std::vector<double> ones4{1, 1, 1, 1};
        const auto a = standardize_per_case(classes, mult);
        const auto b = standardize_per_case(expanded, ones4);
        CHECK(a(0, 0) == doctest::Approx(b(0, 0)));
        CHECK(a(1, 1) == doctest::Approx(b(3, 1)));
        // independent check: column 0 = {1,1,1,2}, mean 1.25, sd sqrt(0.1875)
        CHECK(a(1, 0) == doctest::Approx(0.75 / std::sqrt(0.1875)));
    }
    SUBCASE("positive affine invariance (property)")
    {
        Rng gen(11);
        std::uniform_real_distribution<double> u(-5, 5);
        std::uniform_real_distribution<double> scale(0.1, 10);
        for (int t = 0; t < 100; ++t) {
            Matrix x(6, 4);
            for (Index i = 0; i < 6; ++i) {
                for (Index j = 0; j < 4; ++j) {
                    x(i, j) = u(gen);
                }
            }
            Matrix y = x;
            for (Index j = 0; j < 4; ++j) {
                y.col(j) = y.col(j).array() * scale(gen) + u(gen);
            }
            const std::vector<double> mult{1, 2, 1, 3, 1, 1};
            const auto zx = standardize_per_case(ErrorMatrix(x), mult);
            const auto zy = standardize_per_case(ErrorMatrix(y), mult);
            CHECK((zx.values() - zy.values()).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
    SUBCASE("support: statistics over defined entries, undefined stay zero")
    {
        const auto e = ErrorMatrix::from_rows({{1, 0}, {3, 5}, {0, 9}});
        const auto s = SupportMatrix::from_rows({{1, 0}, {1, 1}, {0, 1}});
        const auto z = standardize_per_case(e, ones3, &s);
        CHECK(z(0, 0) == doctest::Approx(-1));
        CHECK(z(1, 0) == doctest::Approx(1));
        CHECK(z(2, 0) == 0.0);
        CHECK(z(0, 1) == 0.0);
        CHECK(z(1, 1) == doctest::Approx(-1));
    }
    SUBCASE("bad multiplicities")
    {
        const std::vector<double> bad{1, 0};
        CHECK_THROWS_AS(standardize_per_case(ErrorMatrix::from_rows({{1}, {2}}), bad), ShapeError);
        CHECK_THROWS_AS(standardize_per_case(ErrorMatrix::from_rows({{1}, {2}}), ones3),
                        ShapeError);
    }
}

TEST_CASE("RandomSource streams are reproducible and distinct")
{
    const RandomSource a(42);
    const RandomSource b(42);
    CHECK(a.stream(5)() == b.stream(5)());
    CHECK(a.stream(5)() != a.stream(6)());
    CHECK(a.stream(5, Lane::Importance)() != a.stream(5, Lane::TieBreak)());
    CHECK(a.derive(1).seed() != a.derive(2).seed());
    CHECK(RandomSource(1).stream(0)() != RandomSource(2).stream(0)());
}

TEST_CASE("CSV parsing")
{
    SUBCASE("header and values")
    {
        std::istringstream in("# errors\n1, 2.5,-3\n4e0,5,6\n");
        const auto m = read_matrix_csv(in);
        REQUIRE(m.rows() == 2);
        REQUIRE(m.cols() == 3);
        CHECK(m(0, 1) == 2.5);
        CHECK(m(0, 2) == -3.0);
        CHECK(m(1, 0) == 4.0);
    }
    SUBCASE("bad number names the line")
    {
        std::istringstream in("1,2\n3,x\n");
        try {
            read_matrix_csv(in, "f.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("f.csv:2") != std::string::npos);
        }
    }
    SUBCASE("ragged rows")
    {
        std::istringstream in("1,2\n3\n");
        CHECK_THROWS_AS(read_matrix_csv(in), ParseError);
    }
    SUBCASE("decimal comma is not accepted")
    {
        std::istringstream in("1,5;2\n");
        CHECK_THROWS_AS(read_matrix_csv(in), ParseError);
    }
    SUBCASE("empty")
    {
        std::istringstream in("# header only\n");
        CHECK_THROWS_AS(read_matrix_csv(in), ParseError);
    }
    SUBCASE("round trip keeps full precision")
    {
        Matrix x(1, 3);
        x << 0.1, 1.0 / 3.0, -2.5e-300;
        std::stringstream io;
        write_matrix_csv(io, x);
        const auto y = read_matrix_csv(io);
        CHECK(y == x);
    }
}
