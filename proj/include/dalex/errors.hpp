#pragma once

#include <stdexcept>
#include <string>

namespace dalex {

// Malformed input files (CSV, JSON, config syntax).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Matrices whose dimensions disagree, or violate a structural invariant.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid selector or harness configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Instance exceeds the exact-oracle size limits.
class GuardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dalex
