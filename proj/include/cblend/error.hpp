#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cblend {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value, bad argument, unknown key. Maps to CLI exit 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes do not conform for the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Unknown concept, vocabulary entry or named item.
class LookupError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation precondition (e.g. alpha_bar out of range).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (ballots, CSV rows).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Non-finite value or divergence during numerics.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed serialized bytes. `offset` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Input ended before a complete record was read.
class TruncationError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Checkpoint payload checksum mismatch.
class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

} // namespace cblend
