#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace adasti {

using Index = std::ptrdiff_t;

/// Violated precondition or malformed argument.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. The message carries the offending line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, Index line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    Index line() const noexcept { return line_; }

private:
    Index line_;
};

/// Singular systems, overflow, non-finite losses.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint or config content that cannot be used (bad magic, wrong version, fingerprint mismatch).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace adasti
