#pragma once

#include <stdexcept>
#include <string>

namespace fattnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, mode-index or dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (bad key, out-of-range hyperparameter, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be processed (degenerate series, empty split, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-convergence or non-finite values produced during a computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

enum class IoErrc {
    open_failed,
    bad_magic,
    unsupported_version,
    foreign_endian,
    unsupported_dtype,
    dim_inconsistency,
    payload_length_mismatch,
    write_failed,
};

const char* to_string(IoErrc code) noexcept;

/// File-format failure. Each malformation maps to a distinct IoErrc.
class IoError : public Error {
public:
    IoError(IoErrc code, const std::string& what)
        : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

    IoErrc code() const noexcept { return code_; }

private:
    IoErrc code_;
};

}  // namespace fattnn
