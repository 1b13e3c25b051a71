#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "replay_td/induced_chain.hpp"

namespace replay_td {

/// (1/2) sum |p_i - q_i|, the finite-space total variation distance.
double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// initial^T * chain^k via repeated vector-matrix products.
Eigen::VectorXd state_distribution_at(const Eigen::MatrixXd& chain,
                                      const Eigen::VectorXd& initial, std::int64_t k);

struct ErgodicityResult {
  bool irreducible = false;
  bool aperiodic = false;
  bool ergodic() const { return irreducible && aperiodic; }
};

/// Irreducibility by strong connectivity of the positive-probability digraph;
/// aperiodicity by gcd of cycle lengths (BFS level differences within each
/// strongly connected component). Exact, integer-only.
ErgodicityResult ergodicity_check(const Eigen::MatrixXd& chain);

/// Worst-start total variation to the stationary distribution after k steps,
/// for k = 0..steps-1.
std::vector<double> sup_start_tv_curve(const Eigen::MatrixXd& chain,
                                       const Eigen::VectorXd& stationary,
                                       std::int64_t steps);

/// min{k >= 1 : worst-start TV at step k <= epsilon}. The search iterates all
/// starts simultaneously and is capped at 10^6 steps; hitting the cap throws
/// MixingCapExceeded rather than returning a truncated value.
std::int64_t mixing_time(const Eigen::MatrixXd& chain, const Eigen::VectorXd& stationary,
                         double epsilon = 0.25, std::int64_t max_steps = 1000000);

/// Markov chain over realizable consecutive state pairs (s, s') with
/// p_pi(s, s') > 0. Unrealizable pairs are not represented.
struct PairChain {
  int n_pairs = 0;
  std::vector<std::pair<int, int>> pairs;  // pair index -> (s, s')
  Eigen::MatrixXi pair_index;              // (s, s') -> pair index, -1 if unrealizable
  Eigen::MatrixXd transition;
  Eigen::VectorXd mu_pair;
};

/// Builds the pair chain. mu_pair comes from the product identity
/// mu_pair(s, s') = p_pi(s, s') * mu(s) and is cross-checked against the left
/// fixed vector of the pair transition matrix within 1e-9.
PairChain build_pair_chain(const InducedChain& chain);

struct MixingProfile {
  std::int64_t t1_mix = 0;  // state chain, epsilon = 1/4
  std::int64_t t2_mix = 0;  // pair chain, epsilon = 1/4
  std::vector<double> tv_curve_state;  // worst-start TV per step
  std::vector<double> tv_curve_pair;
};

/// Mixing times of the state chain and pair chain plus their TV curves,
/// extended to curve_multiples * t_mix steps.
MixingProfile mixing_profile(const InducedChain& chain, double epsilon = 0.25,
                             int curve_multiples = 4);

/// d_TV(stationary, initial^T chain^k) for k = 0..steps-1. Exact; never
/// estimated from samples.
std::vector<double> tv_to_stationary(const Eigen::MatrixXd& chain,
                                     const Eigen::VectorXd& stationary,
                                     const Eigen::VectorXd& initial, std::int64_t steps);

struct EmpiricalDistributionStats {
  double state_var_sum = 0.0;  // MC mean of sum_s (mu(s) - mu_em(s))^2
  double state_var_se = 0.0;
  double pair_var_sum = 0.0;   // same over realizable pairs
  double pair_var_se = 0.0;
  double tv_state_mean = 0.0;  // MC mean of d_TV(mu, mu_em)
  double tv_state_se = 0.0;
  double tv_pair_mean = 0.0;
  double tv_pair_se = 0.0;
};

/// Simulates `trials` stationary-start trajectories of length n, forms the
/// empirical state and pair distributions of each, and returns Monte-Carlo
/// estimates of the squared-deviation sums and TV distances. Trials run in
/// parallel on independent derived streams; aggregation order is fixed by
/// trial index so results are bit-reproducible.
EmpiricalDistributionStats empirical_distribution_variance(const InducedChain& chain,
                                                           std::int64_t n, int trials,
                                                           std::uint64_t seed, int jobs = 1);

}  // namespace replay_td
