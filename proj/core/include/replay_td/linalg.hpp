#pragma once

#include <Eigen/Dense>

namespace replay_td {

/// Maximum absolute row sum.
double inf_norm(const Eigen::MatrixXd& m);

double frobenius_norm(const Eigen::MatrixXd& m);

/// Largest singular value, computed by power iteration on the Gram matrix to
/// relative tolerance 1e-10 with a 10,000-iteration cap. A stalled run is
/// retried once from a fresh random start before NonConvergence is thrown.
double spectral_norm(const Eigen::MatrixXd& m);

/// x^T m x for symmetric positive semidefinite m.
double weighted_sq_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& m);

}  // namespace replay_td
