#pragma once

#include <Eigen/Dense>
#include <optional>

#include "replay_td/mdp.hpp"

namespace replay_td {

/// Exact quantities of the Markov reward process induced by a policy:
/// transition matrix, stationary distribution, expected rewards, true value
/// function, the update system matrix A = I - alpha*D + alpha*gamma*D*P and
/// its Lyapunov matrix M solving A^T M A - M = -I.
struct InducedChain {
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd mu;
  double mu_min = 0.0;
  Eigen::VectorXd r_pi;
  Eigen::VectorXd v_pi;
  double alpha = 0.0;
  double gamma = 0.0;
  double r_max = 0.0;
  Eigen::MatrixXd a_matrix;
  std::optional<Eigen::MatrixXd> m_matrix;

  int n_states() const { return static_cast<int>(p_pi.rows()); }
  Eigen::MatrixXd d_pi() const { return Eigen::MatrixXd(mu.asDiagonal()); }

  /// Row-sum norm of A, which equals 1 - alpha*(1-gamma)*mu_min exactly.
  double contraction_inf_norm() const { return 1.0 - alpha * (1.0 - gamma) * mu_min; }
};

/// Left fixed vector of a row-stochastic matrix, normalized to sum 1.
/// Solved exactly by replacing one equation of (P^T - I) x = 0 with
/// sum(x) = 1 and a direct dense solve.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p);

/// M = sum_{k=0..K} (A^k)^T A^k, truncated at the first K with
/// n * ||A||_inf^(2K) <= tail_tol.
Eigen::MatrixXd lyapunov_series(const Eigen::MatrixXd& a, double tail_tol = 1e-10);

/// Builds every exact quantity of the induced chain. Requires the chain to be
/// irreducible and aperiodic (ChainNotErgodic otherwise). V is obtained from
/// the direct solve of (I - gamma P) V = R so it carries no iteration error.
/// Pass build_lyapunov = false to skip the (comparatively costly) series for
/// M when only the dynamics are needed.
InducedChain induce_chain(const Mdp& mdp, const Policy& policy, double alpha,
                          bool build_lyapunov = true);

}  // namespace replay_td
