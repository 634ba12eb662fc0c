#include <doctest.h>

#include <sstream>
#include <string>

#include "dalex/config.hpp"
#include "dalex/errors.hpp"

using namespace dalex;

namespace {

RunConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_run_config(in);
}

std::string config_error(const std::string& text)
{
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("run config sections")
{
    const auto cfg = parse(R"([selector]
method = dalex
pressure = 50
distribution = uniform
relaxed = true
seed = 7

[evolution]
problem = continuous_vector
cases = 12
pop_size = 40
generations = 3
downsample_rate = 0.5
stop_on_success = false
runs = 4
record_timing = false

[fidelity]
enabled = true
samples = 500
mode = empirical
resamples = 200

[candidate]
method = lexicase
)");
    const auto& ev = cfg.evolution;
    CHECK(ev.selector.method == Method::Dalex);
    CHECK(ev.selector.pressure == 50.0);
    CHECK(ev.selector.distribution == Distribution::Uniform);
    CHECK(ev.selector.relaxed);
    CHECK(ev.seed == 7u);
    CHECK(ev.problem.kind == ProblemKind::ContinuousVector);
    CHECK(ev.problem.cases == 12u);
    CHECK(ev.pop_size == 40u);
    CHECK(ev.generations == 3u);
    CHECK(ev.downsample_rate == 0.5);
    CHECK_FALSE(ev.stop_on_success);
    CHECK(cfg.runs == 4u);
    CHECK_FALSE(cfg.record_timing);
    REQUIRE(cfg.fidelity.has_value());
    CHECK(cfg.fidelity->samples == 500u);
    CHECK(cfg.fidelity->mode == ReferenceMode::Empirical);
    CHECK(cfg.fidelity->candidate.method == Method::Lexicase);
    CHECK(cfg.resamples == 200u);
}

TEST_CASE("run config defaults")
{
    const auto cfg = parse("[selector]\nmethod = lexicase\n");
    CHECK(cfg.evolution.selector.method == Method::Lexicase);
    CHECK(cfg.runs == 1u);
    CHECK_FALSE(cfg.fidelity.has_value());
}

TEST_CASE("run config errors name the key")
{
    CHECK(config_error("[selector]\nmethod = tournament\n").find("method") != std::string::npos);
    CHECK(config_error("[selector]\nmethod = tournament\n").find("tournament")
          != std::string::npos);
    CHECK(config_error("[selector]\ncolour = red\n").find("selector.colour")
          != std::string::npos);
    CHECK(config_error("[evolution]\npop_size = many\n").find("evolution.pop_size")
          != std::string::npos);
    CHECK(config_error("[evolution]\nruns = 0\n").find("evolution.runs") != std::string::npos);
    CHECK(config_error("[nonsense]\na = 1\n").find("nonsense") != std::string::npos);
    CHECK(config_error("[fidelity]\nenabled = true\n").find("candidate") != std::string::npos);
    CHECK(config_error("[selector]\npressure = -1\n").find("pressure") != std::string::npos);
}

TEST_CASE("run config syntax errors")
{
    CHECK_THROWS_AS(parse("[selector\nmethod = dalex\n"), ParseError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.ini"), ParseError);
}

TEST_CASE("method specs")
{
    const auto d = parse_method_spec("dalex:pressure=200:distribution=shuffled_range:relaxed=true");
    CHECK(d.method == Method::Dalex);
    CHECK(d.pressure == 200.0);
    CHECK(d.distribution == Distribution::ShuffledRange);
    CHECK(d.relaxed);

    const auto b = parse_method_spec("batch_lexicase:batch_size=4");
    CHECK(b.method == Method::BatchLexicase);
    CHECK(b.batch_size == 4u);

    SelectorConfig base;
    base.seed = 99;
    base.pressure = 3;
    const auto l = parse_method_spec("lexicase", base);
    CHECK(l.method == Method::Lexicase);
    CHECK(l.seed == 99u);

    CHECK_THROWS_AS(parse_method_spec("nope"), ConfigError);
    CHECK_THROWS_AS(parse_method_spec("dalex:pressure"), ConfigError);
    CHECK_THROWS_AS(parse_method_spec("dalex:speed=2"), ConfigError);
    CHECK_THROWS_AS(parse_method_spec("dalex:pressure=x"), ConfigError);
}
