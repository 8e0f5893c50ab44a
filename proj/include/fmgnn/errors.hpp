#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fmgnn {

/// Base class for every error thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes or dimensions do not conform.
class dimension_error : public error {
public:
    using error::error;
};

/// A value lies outside the domain on which an operation is defined
/// (antipodal logarithm, point outside the ball model, ...).
class domain_error : public error {
public:
    using error::error;
};

/// Floating-point breakdown: vanishing denominator, non-finite value.
class numerical_error : public error {
public:
    using error::error;
};

/// Caller violated a documented precondition.
class contract_error : public error {
public:
    using error::error;
};

/// Malformed input file. The message names the file and line.
class parse_error : public error {
public:
    parse_error(const std::string& file, std::size_t line, const std::string& what)
        : error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Split or negative-sampling request cannot be satisfied.
class split_error : public error {
public:
    using error::error;
};

/// A metric is not defined for the input (single class, empty mask).
class metric_error : public error {
public:
    using error::error;
};

/// Invalid configuration value or unknown configuration key.
class config_error : public error {
public:
    using error::error;
};

/// Training produced a non-finite loss.
class divergence_error : public error {
public:
    divergence_error(int epoch, const std::string& what)
        : error("diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

} // namespace fmgnn
