#include "replay_td/induced_chain.hpp"

#include <cmath>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/errors.hpp"
#include "replay_td/linalg.hpp"

namespace replay_td {

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd sys = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  sys.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) {
    throw SingularSystem("stationary_distribution: singular system (chain not irreducible?)");
  }
  return lu.solve(rhs);
}

Eigen::MatrixXd lyapunov_series(const Eigen::MatrixXd& a, double tail_tol) {
  const Eigen::Index n = a.rows();
  const double c = inf_norm(a);
  if (!(c < 1.0)) {
    throw SingularSystem("lyapunov_series: ||A||_inf >= 1, series does not converge");
  }
  // n * c^(2K) <= tail_tol
  std::int64_t cap = 1;
  if (c > 0.0) {
    cap = static_cast<std::int64_t>(std::ceil(std::log(tail_tol / double(n)) / (2.0 * std::log(c))));
    if (cap < 1) cap = 1;
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (std::int64_t k = 1; k <= cap; ++k) {
    power = power * a;
    m.noalias() += power.transpose() * power;
  }
  // The sum is symmetric in exact arithmetic; remove accumulated drift.
  m = 0.5 * (m + m.transpose()).eval();
  return m;
}

InducedChain induce_chain(const Mdp& mdp, const Policy& policy, double alpha,
                          bool build_lyapunov) {
  {
    const ValidationResult vm = validate_mdp(mdp);
    if (!vm.ok) throw InvalidInput("induce_chain: invalid MDP: " + vm.violations.front());
    const ValidationResult vp = validate_policy(policy, mdp);
    if (!vp.ok) throw InvalidInput("induce_chain: invalid policy: " + vp.violations.front());
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("induce_chain: alpha must lie in (0,1)");

  const int n = mdp.n_states;
  InducedChain chain;
  chain.alpha = alpha;
  chain.gamma = mdp.gamma;
  chain.r_max = mdp.r_max;

  chain.p_pi = Eigen::MatrixXd::Zero(n, n);
  chain.r_pi = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy.probs(s, a);
      if (pa == 0.0) continue;
      chain.p_pi.row(s) += pa * mdp.transition[a].row(s);
      chain.r_pi[s] += pa * mdp.transition[a].row(s).dot(mdp.reward[a].row(s));
    }
  }

  const ErgodicityResult erg = ergodicity_check(chain.p_pi);
  if (!erg.ergodic()) {
    throw ChainNotErgodic(std::string("induce_chain: induced chain is ") +
                          (erg.irreducible ? "periodic" : "reducible"));
  }

  chain.mu = stationary_distribution(chain.p_pi);
  chain.mu_min = chain.mu.minCoeff();

  {
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * chain.p_pi;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (!lu.isInvertible()) {
      throw SingularSystem("induce_chain: Bellman system singular (numerical corruption)");
    }
    chain.v_pi = lu.solve(chain.r_pi);
  }

  chain.a_matrix = alpha * mdp.gamma * (chain.mu.asDiagonal() * chain.p_pi);
  chain.a_matrix.diagonal() += Eigen::VectorXd::Ones(n) - alpha * chain.mu;

  if (build_lyapunov) {
    chain.m_matrix = lyapunov_series(chain.a_matrix);
  }
  return chain;
}

}  // namespace replay_td
