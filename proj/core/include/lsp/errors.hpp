#pragma once

#include <stdexcept>
#include <string>

namespace lsp {

// Error taxonomy shared by the whole toolkit. The CLI maps these onto
// process exit codes (config -> 2, data/format -> 3, numeric -> 4).

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateNeighborhoodError : std::runtime_error {
    explicit DegenerateNeighborhoodError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lsp
