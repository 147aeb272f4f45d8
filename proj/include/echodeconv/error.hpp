#pragma once

#include <stdexcept>
#include <string>

namespace echodeconv {

/// Statistics carry no usable information (all-zero cumulant, constant input).
class DegenerateStatistics : public std::runtime_error {
public:
    explicit DegenerateStatistics(const std::string& what)
        : std::runtime_error("degenerate statistics: " + what) {}
};

/// A numerical stage produced a result outside its validity envelope.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file or configuration.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace echodeconv
