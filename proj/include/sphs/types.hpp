#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace sphs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

// Grid function: n state components (rows) sampled on N+1 nodes (columns).
// Column-major Eigen storage makes this node-major when viewed flat, which is
// the layout the finite-difference assembly expects.
using GridFn = Eigen::MatrixXd;
using CGridFn = Eigen::MatrixXcd;

// Malformed or inconsistent configuration (CLI maps this to exit code 3).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: non-convergence, non-PSD covariance, singular solves
// (CLI maps this to exit code 2).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sphs
