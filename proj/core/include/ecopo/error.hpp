#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecopo {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file (corpus, confusion set, config). Messages carry line numbers.
struct FormatError : Error {
    using Error::Error;
};

/// Invalid configuration or argument values.
struct ConfigError : Error {
    using Error::Error;
};

/// Checkpoint I/O failures, with a machine-checkable kind.
struct CheckpointError : Error {
    enum class Kind {
        Io,
        BadMagic,
        VersionMismatch,
        Truncated,
        DimensionMismatch,
        TrailingData,
    };

    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}

    Kind kind;
};

/// Training aborted on a non-finite loss.
struct TrainingDiverged : Error {
    TrainingDiverged(int epoch_, std::size_t batch_, const std::string& msg)
        : Error(msg), epoch(epoch_), batch(batch_) {}

    int epoch;
    std::size_t batch;
};

}  // namespace ecopo
