#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace koopkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Invalid user input or inconsistent parameters. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Any failure of a numerical stage. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data or kernel too degenerate to normalize (zero degrees, zero variance, ...).
class DegenerateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IntegrationDivergence : public NumericalError {
public:
    IntegrationDivergence(std::size_t step, const std::string& what)
        : NumericalError(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace koopkit
