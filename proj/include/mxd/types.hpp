#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mxd {

using complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Zero-based port indices into a scattering matrix.
using IndexSet = std::vector<int>;

/// Numerical tolerances shared by the network algebra. Every check that
/// compares against a threshold takes one of these instead of a literal.
struct Tolerances {
    double reciprocity = 1e-12;  // absolute, on S - S^T
    double passivity = 1e-12;    // slack on the spectral norm bound of 1
    double condition_cap = 1e12; // largest accepted condition number of a solve
};

// Errors -----------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// (S^OTA_CC S^TLN_CbarCbar - I) was singular or too ill-conditioned.
class CompositionSingularError : public Error {
public:
    CompositionSingularError(std::string config_id, double condition)
        : Error("composition singular for configuration '" + config_id +
                "' (condition number " + std::to_string(condition) + ")"),
          config_id_(std::move(config_id)),
          condition_(condition) {}

    const std::string& config_id() const noexcept { return config_id_; }
    double condition() const noexcept { return condition_; }

private:
    std::string config_id_;
    double condition_;
};

/// (I - S^PF_SS S^DUT) was singular or too ill-conditioned.
class ResonantCascadeError : public Error {
public:
    using Error::Error;
};

/// A measurement campaign carries no DUT signature.
class DegenerateCampaignError : public Error {
public:
    using Error::Error;
};

/// Malformed input text; line and column are 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
    }
    std::size_t line_;
    std::size_t column_;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace mxd
