#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace switchcodec {

// Violated precondition: wrong shapes, out-of-range parameters, bad configs.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed file or stream contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stream ended before the named window was complete.
class TruncationError : public FormatError {
public:
    TruncationError(std::size_t window_index, const std::string& what)
        : FormatError(what), window_index_(window_index) {}

    std::size_t window_index() const noexcept { return window_index_; }

private:
    std::size_t window_index_;
};

// Structurally valid stream whose contents break an invariant (mask popcount).
class IntegrityError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration file problem; carries the offending key and line when known.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::string key = {}, std::size_t line = 0)
        : std::runtime_error(what), key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string key_;
    std::size_t line_;
};

// NaN/Inf encountered during optimization.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace switchcodec
