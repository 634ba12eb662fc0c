#include "dalex/config.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dalex/errors.hpp"

namespace dalex {

namespace {

namespace pt = boost::property_tree;

template <class T>
T number(const std::string& key, const std::string& text)
{
    T v{};
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), last, v);
    if (text.empty() || ec != std::errc{} || ptr != last) {
        throw ConfigError("invalid value for '" + key + "': '" + text + "'");
    }
    return v;
}

bool flag(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError("invalid value for '" + key + "': '" + text + "'");
}

std::map<std::string, std::string> section_map(const pt::ptree& section, const std::string& name)
{
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : section) {
        if (!value.empty()) {
            throw ConfigError("nested key '" + name + "." + key + "' not supported");
        }
        out[key] = value.data();
    }
    return out;
}

SelectorConfig selector_section(const pt::ptree& section, const std::string& name)
{
    const auto kv = section_map(section, name);
    for (const auto& [key, value] : kv) {
        if (!SelectorConfig::is_key(key)) {
            throw ConfigError("unknown key '" + name + "." + key + "'");
        }
    }
    try {
        return SelectorConfig::from_key_values(kv);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[") + name + "] " + e.what());
    }
}

} // namespace

RunConfig parse_run_config(std::istream& in)
{
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message());
    }

    RunConfig cfg;
    bool fidelity_enabled = false;
    std::optional<SelectorConfig> candidate;
    FidelityOptions fidelity;

    for (const auto& [name, section] : tree) {
        if (section.empty() && !section.data().empty()) {
            throw ConfigError("key '" + name + "' must be inside a section");
        }
        if (name == "selector") {
            cfg.evolution.selector = selector_section(section, name);
            cfg.evolution.seed = cfg.evolution.selector.seed;
        } else if (name == "candidate") {
            candidate = selector_section(section, name);
        } else if (name == "evolution") {
            for (const auto& [key, value] : section_map(section, name)) {
                const std::string qualified = name + "." + key;
                auto& ev = cfg.evolution;
                if (key == "problem") {
                    ev.problem.kind = parse_problem_kind(value);
                } else if (key == "cases") {
                    ev.problem.cases = number<Index>(qualified, value);
                } else if (key == "problem_seed") {
                    ev.problem.seed = number<std::uint64_t>(qualified, value);
                } else if (key == "noise") {
                    ev.problem.noise = number<double>(qualified, value);
                } else if (key == "features") {
                    ev.problem.features = number<Index>(qualified, value);
                } else if (key == "max_target") {
                    ev.problem.max_target = number<int>(qualified, value);
                } else if (key == "pop_size") {
                    ev.pop_size = number<Index>(qualified, value);
                } else if (key == "generations") {
                    ev.generations = number<Index>(qualified, value);
                } else if (key == "downsample_rate") {
                    ev.downsample_rate = number<double>(qualified, value);
                } else if (key == "mutation_rate") {
                    ev.mutation_rate = number<double>(qualified, value);
                } else if (key == "initial_length") {
                    ev.initial_length = number<Index>(qualified, value);
                } else if (key == "stop_on_success") {
                    ev.stop_on_success = flag(qualified, value);
                } else if (key == "runs") {
                    cfg.runs = number<Index>(qualified, value);
                } else if (key == "record_timing") {
                    cfg.record_timing = flag(qualified, value);
                } else {
                    throw ConfigError("unknown key '" + qualified + "'");
                }
            }
        } else if (name == "fidelity") {
            for (const auto& [key, value] : section_map(section, name)) {
                const std::string qualified = name + "." + key;
                if (key == "enabled") {
                    fidelity_enabled = flag(qualified, value);
                } else if (key == "samples") {
                    fidelity.samples = number<Index>(qualified, value);
                } else if (key == "mode") {
                    fidelity.mode = parse_reference_mode(value);
                } else if (key == "resamples") {
                    cfg.resamples = number<Index>(qualified, value);
                } else {
                    throw ConfigError("unknown key '" + qualified + "'");
                }
            }
        } else {
            throw ConfigError("unknown section '" + name + "'");
        }
    }

    if (cfg.runs < 1) {
        throw ConfigError("'evolution.runs' must be at least 1");
    }
    if (cfg.resamples < 1) {
        throw ConfigError("'fidelity.resamples' must be at least 1");
    }
    if (fidelity_enabled) {
        if (!candidate) {
            throw ConfigError("fidelity runs need a [candidate] section");
        }
        if (fidelity.samples < 1) {
            throw ConfigError("'fidelity.samples' must be at least 1");
        }
        fidelity.candidate = *candidate;
        cfg.fidelity = fidelity;
    }
    // Builds the problem once to surface its own validation errors.
    cfg.evolution.validate();
    SyntheticProblem{cfg.evolution.problem};
    return cfg;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path + ": cannot open file");
    }
    return parse_run_config(in);
}

SelectorConfig parse_method_spec(std::string_view spec, const SelectorConfig& base)
{
    std::map<std::string, std::string> kv = base.to_key_values();
    std::size_t pos = spec.find(':');
    kv["method"] = std::string(spec.substr(0, pos));
    while (pos != std::string_view::npos) {
        const std::size_t next = spec.find(':', pos + 1);
        const auto item = spec.substr(pos + 1, next == std::string_view::npos ? next
                                                                             : next - pos - 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("method option '" + std::string(item) + "' is not key=value");
        }
        const std::string key(item.substr(0, eq));
        if (!SelectorConfig::is_key(key) || key == "method") {
            throw ConfigError("unknown key '" + key + "' in method '" + std::string(spec) + "'");
        }
        kv[key] = std::string(item.substr(eq + 1));
        pos = next;
    }
    return SelectorConfig::from_key_values(kv);
}

} // namespace dalex
