#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace risres {

using cdouble = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Point3 = Eigen::Vector3d;

/// Invalid configuration values (bad counts, non-square RIS, broken weights).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands whose shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quantity that cannot be evaluated at the supplied point (zero slack, empty input, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace risres
