#include "levsense/least_squares.hpp"

#include <algorithm>
#include <cmath>

namespace levsense::lsq {

Result levenberg_marquardt(const ResidualFn& residual, const JacobianFn& jacobian,
                           Eigen::VectorXd start, const Options& opts) {
    Result out;
    Eigen::VectorXd p = std::move(start);
    Eigen::VectorXd r = residual(p);
    double cost = r.squaredNorm();
    double lambda = opts.initial_lambda;

    Eigen::MatrixXd J = jacobian(p);
    for (int it = 0; it < opts.max_iterations; ++it) {
        out.iterations = it + 1;
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;

        bool accepted = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd A = JtJ;
            for (Eigen::Index k = 0; k < A.rows(); ++k)
                A(k, k) += lambda * std::max(JtJ(k, k), 1e-300);
            Eigen::VectorXd step = A.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            Eigen::VectorXd trial = p + step;
            Eigen::VectorXd r_trial = residual(trial);
            double c_trial = r_trial.allFinite() ? r_trial.squaredNorm() : HUGE_VAL;
            if (c_trial <= cost) {
                double rel = step.norm() / std::max(trial.norm(), 1e-300);
                p = std::move(trial);
                r = std::move(r_trial);
                cost = c_trial;
                lambda = std::max(lambda * 0.1, 1e-15);
                accepted = true;
                J = jacobian(p);
                if (rel < opts.relative_step_tol) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // No downhill step at any damping: we sit at a (numerical) minimum.
        if (!accepted) out.converged = true;
        if (out.converged) break;
    }
    out.params = std::move(p);
    out.residuals = std::move(r);
    out.jacobian = std::move(J);
    out.cost = cost;
    return out;
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& steps) {
    Eigen::VectorXd r0 = residual(p);
    Eigen::MatrixXd J(r0.size(), p.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        Eigen::VectorXd q = p;
        q[k] += steps[k];
        J.col(k) = (residual(q) - r0) / steps[k];
    }
    return J;
}

Eigen::MatrixXd covariance(const Result& r) {
    const auto n = r.residuals.size();
    const auto np = r.params.size();
    double dof = std::max<double>(static_cast<double>(n - np), 1.0);
    double s2 = r.cost / dof;
    Eigen::MatrixXd JtJ = r.jacobian.transpose() * r.jacobian;
    return s2 * JtJ.completeOrthogonalDecomposition().pseudoInverse();
}

}  // namespace levsense::lsq
