// least_squares.hpp - damped Gauss-Newton (Levenberg-Marquardt) solver used by
// the resonator, tuning-curve and pickup-placement fits.

#pragma once

#include <functional>

#include <Eigen/Dense>

namespace levsense::lsq {

struct Options {
    int max_iterations = 200;
    double relative_step_tol = 1e-10;
    double initial_lambda = 1e-3;
};

struct Result {
    Eigen::VectorXd params;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;  // at the returned params
    double cost = 0.0;         // sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

Result levenberg_marquardt(const ResidualFn& residual, const JacobianFn& jacobian,
                           Eigen::VectorXd start, const Options& opts = {});

/// Forward-difference Jacobian, for fits without an analytic derivative.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& steps);

/// Parameter covariance sigma^2 (J^T J)^-1 with sigma^2 = cost / (n - p).
Eigen::MatrixXd covariance(const Result& r);

}  // namespace levsense::lsq
