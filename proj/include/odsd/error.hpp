#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odsd {

/// Caller broke a documented precondition (bad shape, non-finite input, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A direction was required but the vector has zero norm.
class DegenerateVectorError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// kmeans was asked for more clusters than there are points. The caller
/// decides how to shrink k.
class ReduceKSignal : public std::runtime_error {
public:
    ReduceKSignal(std::size_t points, std::size_t k)
        : std::runtime_error("kmeans: " + std::to_string(points) + " point(s) cannot fill " +
                             std::to_string(k) + " clusters"),
          points(points),
          k(k) {}
    std::size_t points;
    std::size_t k;
};

/// A selection asked for more items than the pool holds.
class RequestTooLargeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A serialized container failed to parse. Carries the byte offset of the
/// first bad byte.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

/// Bad key, value, or combination in an experiment config.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem-level failure (missing file, unwritable directory, ...).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace odsd
