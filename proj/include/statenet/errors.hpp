#pragma once

#include <stdexcept>
#include <string>

namespace statenet {

// Shape/dimension mismatches between arrays or against a model config.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input data (corpus files, embedding files, checkpoints).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (bad field values, missing required fields).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace statenet
