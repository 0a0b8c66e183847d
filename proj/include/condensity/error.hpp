#pragma once

#include <stdexcept>
#include <string>

namespace condensity {

// Error hierarchy shared across the library. The CLI maps these onto
// process exit codes: ConfigError -> 1, DataError -> 2, anything else -> 3.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration, flags, or calling contract (shape/width mismatch).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Problems with input data (parsing, ranges, degenerate samples).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

// Target column is constant; min-max scaling is undefined.
class DegenerateTarget : public DataError {
public:
    explicit DegenerateTarget(const std::string& what) : DataError(what) {}
};

// Not enough observations to form the requested train/validation split.
class TooFewSamples : public DataError {
public:
    explicit TooFewSamples(const std::string& what) : DataError(what) {}
};

// train_round called on a trainer whose round budget is already spent.
class Exhausted : public Error {
public:
    explicit Exhausted(const std::string& what) : Error(what) {}
};

} // namespace condensity
