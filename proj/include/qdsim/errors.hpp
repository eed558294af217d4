#pragma once

#include <stdexcept>
#include <string>

namespace qdsim {

// Violated model invariant or contract (maps to CLI exit code 2).
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure: integration breakdown, budget refusal, singular fit
// (maps to CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config / schedule / data parse failure with source location.
struct ParseError : std::runtime_error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) +
                             ", column " + std::to_string(column_) + ")"),
          line(line_), column(column_) {}
};

}  // namespace qdsim
