#pragma once

#include <stdexcept>
#include <string>

namespace rcdgcn {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shapes disagree with an operation's contract.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered in a forward value or a gradient.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (graph/speed/feature CSV); message names the location.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Masked softmax over a mask with no admissible entries.
class DegenerateMaskError : public Error {
public:
    using Error::Error;
};

/// Tape misuse: backward on an empty tape, or twice on the same tape.
class TapeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration (unknown key, bad hyperparameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Corrupt or incompatible checkpoint file.
class CheckpointError : public Error {
public:
    using Error::Error;
};

/// Not enough time steps for the requested split/window layout.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Index outside the valid range (incident node, series span).
class IndexError : public Error {
public:
    using Error::Error;
};

/// Training aborted (divergence, NaN loss); message carries the epoch.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure while reading or writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rcdgcn
