#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dalex/config.hpp"
#include "dalex/core.hpp"
#include "dalex/errors.hpp"
#include "dalex/evolve.hpp"
#include "dalex/metrics.hpp"
#include "dalex/oracle.hpp"
#include "dalex/selectors.hpp"

namespace py = pybind11;
using namespace dalex;

namespace {

// Missing support means every entry is defined.
std::pair<ErrorMatrix, SupportMatrix> load(const Matrix& errors,
                                           const std::optional<Matrix>& support)
{
    ErrorMatrix e(errors);
    SupportMatrix s = support ? SupportMatrix(*support)
                              : SupportMatrix::full(errors.rows(), errors.cols());
    check_pair(e, s);
    return {std::move(e), std::move(s)};
}

SelectorConfig method_config(const std::string& method, std::uint64_t seed)
{
    SelectorConfig cfg = parse_method_spec(method);
    cfg.seed = seed;
    return cfg;
}

std::vector<Index> select_parents(const Matrix& errors, const std::optional<Matrix>& support,
                          const std::string& method, std::optional<Index> count,
                          std::uint64_t seed)
{
    const auto [e, s] = load(errors, support);
    const auto cfg = method_config(method, seed);
    py::gil_scoped_release release;
    return select_individuals(e, s, count.value_or(e.rows()), cfg, RandomSource(seed));
}

Matrix fitness(const Matrix& errors, const std::optional<Matrix>& support,
               const std::string& method, Index events, std::uint64_t seed)
{
    const auto [e, s] = load(errors, support);
    const auto cfg = method_config(method, seed);
    if (cfg.method != Method::Dalex) {
        throw ConfigError("method: fitness is defined for dalex only");
    }
    const auto weights = softmax_rows(sample_importance(events, e.cols(), cfg, RandomSource(seed)));
    return dalex_fitness(e, s, weights);
}

py::tuple distribution(const Matrix& errors, const std::optional<Matrix>& support,
                       const std::string& method, Index samples, const std::string& mode,
                       std::uint64_t seed)
{
    const auto [e, s] = load(errors, support);
    const auto cfg = method_config(method, seed);
    const auto classing = build_classes(e, s);
    const auto dist = method_distribution(classing, cfg, samples, parse_reference_mode(mode),
                                          RandomSource(seed))
                          .expand(classing);
    const char* kind = dist.kind == SelectionDistribution::Kind::Exact ? "exact" : "empirical";
    return py::make_tuple(dist.probs, kind);
}

// One run per configured run, seeds counting up from the base seed.
std::string evolve(const std::string& config_text, std::optional<std::uint64_t> seed)
{
    std::istringstream in(config_text);
    RunConfig cfg = parse_run_config(in);
    if (seed) {
        cfg.evolution.seed = *seed;
        cfg.evolution.selector.seed = *seed;
    }
    nlohmann::json runs = nlohmann::json::array();
    py::gil_scoped_release release;
    for (Index r = 0; r < cfg.runs; ++r) {
        auto ev = cfg.evolution;
        ev.seed = cfg.evolution.seed + r;
        const auto run = run_evolution(ev);
        nlohmann::json records = nlohmann::json::array();
        for (const auto& rec : run.records) {
            records.push_back(rec.to_json(cfg.record_timing));
        }
        nlohmann::json j{{"seed", ev.seed}, {"success", run.success}, {"records", records}};
        j["success_generation"] = run.success_generation ? nlohmann::json(*run.success_generation)
                                                         : nlohmann::json(nullptr);
        runs.push_back(std::move(j));
    }
    return runs.dump();
}

} // namespace

PYBIND11_MODULE(_dalex, m)
{
    m.doc() = "Lexicase-family parent selection";

    auto value_error = py::handle(PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", value_error);
    py::register_exception<ShapeError>(m, "ShapeError", value_error);
    py::register_exception<ConfigError>(m, "ConfigError", value_error);
    py::register_exception<GuardError>(m, "GuardError", PyExc_RuntimeError);

    m.def("select", &select_parents, py::arg("errors"), py::arg("support") = py::none(), py::kw_only(),
          py::arg("method") = "dalex", py::arg("count") = py::none(), py::arg("seed") = 0,
          "Indices of the selected parents, one per selection event.");
    m.def("fitness", &fitness, py::arg("errors"), py::arg("support") = py::none(),
          py::kw_only(), py::arg("method") = "dalex", py::arg("events") = 1,
          py::arg("seed") = 0,
          "Weighted fitness per individual (rows) and selection event (columns).");
    m.def("distribution", &distribution, py::arg("errors"), py::arg("support") = py::none(),
          py::kw_only(), py::arg("method") = "lexicase", py::arg("samples") = 50000,
          py::arg("mode") = "exact_or_empirical", py::arg("seed") = 0,
          "Per-individual selection probabilities and whether they are exact.");
    m.def(
        "js_divergence",
        [](const std::vector<double>& p, const std::vector<double>& q) {
            return js_divergence(p, q);
        },
        py::arg("p"), py::arg("q"), "Jensen-Shannon divergence in nats.");
    m.def("exact_lexicase_probs",
          [](const Matrix& errors, const std::optional<Matrix>& support) {
              const auto [e, s] = load(errors, support);
              const auto classing = build_classes(e, s);
              return exact_lexicase_probs(classing).expand(classing).probs;
          },
          py::arg("errors"), py::arg("support") = py::none(),
          "Exact lexicase selection probabilities per individual.");
    m.def("evolve", &evolve, py::arg("config"), py::arg("seed") = py::none(),
          "Runs the INI configuration and returns the runs as JSON text.");
}
