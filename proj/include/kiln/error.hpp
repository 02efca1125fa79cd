#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kiln {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input/config problems the CLI maps to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed file content; line is 1-based when known.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line_no = 0)
        : Error(line_no ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
    std::size_t line = 0;
};

}  // namespace kiln
