#include "replay_td/chain_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "replay_td/errors.hpp"
#include "replay_td/parallel.hpp"
#include "replay_td/rng.hpp"

namespace replay_td {

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw DimensionMismatch("tv_distance: vectors differ in length");
  return 0.5 * (p - q).cwiseAbs().sum();
}

Eigen::VectorXd state_distribution_at(const Eigen::MatrixXd& chain,
                                      const Eigen::VectorXd& initial, std::int64_t k) {
  if (chain.rows() != chain.cols() || chain.rows() != initial.size()) {
    throw DimensionMismatch("state_distribution_at: shape mismatch");
  }
  Eigen::RowVectorXd dist = initial.transpose();
  for (std::int64_t i = 0; i < k; ++i) dist = dist * chain;
  return dist.transpose();
}

namespace {

std::vector<std::vector<int>> positive_adjacency(const Eigen::MatrixXd& chain) {
  const int n = static_cast<int>(chain.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (chain(i, j) > 0.0) adj[i].push_back(j);
    }
  }
  return adj;
}

std::vector<int> reachable_from(const std::vector<std::vector<int>>& adj, int start) {
  std::vector<int> seen(adj.size(), 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

// Strongly connected components via Kosaraju (iterative).
std::vector<int> scc_labels(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::vector<int>> radj(n);
  for (int u = 0; u < n; ++u) {
    for (int v : adj[u]) radj[v].push_back(u);
  }
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> state(n, 0);  // 0 unvisited, 1 in progress, 2 done
  for (int s = 0; s < n; ++s) {
    if (state[s]) continue;
    std::vector<std::pair<int, size_t>> stack{{s, 0}};
    state[s] = 1;
    while (!stack.empty()) {
      auto& [u, idx] = stack.back();
      if (idx < adj[u].size()) {
        const int v = adj[u][idx++];
        if (!state[v]) {
          state[v] = 1;
          stack.push_back({v, 0});
        }
      } else {
        order.push_back(u);
        state[u] = 2;
        stack.pop_back();
      }
    }
  }
  std::vector<int> label(n, -1);
  int ncomp = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (label[*it] >= 0) continue;
    std::vector<int> stack{*it};
    label[*it] = ncomp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : radj[u]) {
        if (label[v] < 0) {
          label[v] = ncomp;
          stack.push_back(v);
        }
      }
    }
    ++ncomp;
  }
  return label;
}

// Period of one SCC: gcd over intra-component edges (u, v) of
// |level(u) + 1 - level(v)| with BFS levels restricted to the component.
// Components without an internal edge have no return times and contribute
// nothing.
std::int64_t scc_period(const std::vector<std::vector<int>>& adj, const std::vector<int>& label,
                        int component, int root) {
  std::vector<std::int64_t> level(adj.size(), -1);
  std::vector<int> queue{root};
  level[root] = 0;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const int u = queue[qi];
    for (int v : adj[u]) {
      if (label[v] != component) continue;
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  std::int64_t g = 0;
  for (int u : queue) {
    for (int v : adj[u]) {
      if (label[v] != component) continue;
      g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return g;
}

}  // namespace

ErgodicityResult ergodicity_check(const Eigen::MatrixXd& chain) {
  if (chain.rows() != chain.cols()) throw DimensionMismatch("ergodicity_check: matrix not square");
  const int n = static_cast<int>(chain.rows());
  const auto adj = positive_adjacency(chain);

  ErgodicityResult res;
  {
    std::vector<std::vector<int>> radj(n);
    for (int u = 0; u < n; ++u) {
      for (int v : adj[u]) radj[v].push_back(u);
    }
    const auto fwd = reachable_from(adj, 0);
    const auto bwd = reachable_from(radj, 0);
    res.irreducible = true;
    for (int i = 0; i < n; ++i) {
      if (!fwd[i] || !bwd[i]) {
        res.irreducible = false;
        break;
      }
    }
  }

  const auto label = scc_labels(adj);
  std::vector<int> root(n, -1);
  for (int i = 0; i < n; ++i) {
    if (root[label[i]] < 0) root[label[i]] = i;
  }
  res.aperiodic = true;
  const int ncomp = *std::max_element(label.begin(), label.end()) + 1;
  for (int c = 0; c < ncomp; ++c) {
    const std::int64_t g = scc_period(adj, label, c, root[c]);
    if (g > 1) {
      res.aperiodic = false;
      break;
    }
  }
  return res;
}

std::vector<double> sup_start_tv_curve(const Eigen::MatrixXd& chain,
                                       const Eigen::VectorXd& stationary, std::int64_t steps) {
  const Eigen::Index n = chain.rows();
  std::vector<double> curve;
  curve.reserve(steps);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Identity(n, n);  // row i: start at i
  for (std::int64_t k = 0; k < steps; ++k) {
    if (k > 0) dist = dist * chain;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(worst, 0.5 * (dist.row(i).transpose() - stationary).cwiseAbs().sum());
    }
    curve.push_back(worst);
  }
  return curve;
}

std::int64_t mixing_time(const Eigen::MatrixXd& chain, const Eigen::VectorXd& stationary,
                         double epsilon, std::int64_t max_steps) {
  const Eigen::Index n = chain.rows();
  if (chain.cols() != n || stationary.size() != n) {
    throw DimensionMismatch("mixing_time: shape mismatch");
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Identity(n, n);
  for (std::int64_t k = 1; k <= max_steps; ++k) {
    dist = dist * chain;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(worst, 0.5 * (dist.row(i).transpose() - stationary).cwiseAbs().sum());
    }
    if (worst <= epsilon) return k;
  }
  throw MixingCapExceeded("mixing_time: no mixing within step cap (chain nearly periodic or reducible)");
}

PairChain build_pair_chain(const InducedChain& chain) {
  const int n = chain.n_states();
  PairChain pc;
  pc.pair_index = Eigen::MatrixXi::Constant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    for (int s2 = 0; s2 < n; ++s2) {
      if (chain.p_pi(s, s2) > 0.0) {
        pc.pair_index(s, s2) = pc.n_pairs++;
        pc.pairs.emplace_back(s, s2);
      }
    }
  }
  pc.transition = Eigen::MatrixXd::Zero(pc.n_pairs, pc.n_pairs);
  pc.mu_pair = Eigen::VectorXd::Zero(pc.n_pairs);
  for (int i = 0; i < pc.n_pairs; ++i) {
    const auto [s, s2] = pc.pairs[i];
    pc.mu_pair[i] = chain.p_pi(s, s2) * chain.mu[s];
    for (int s3 = 0; s3 < n; ++s3) {
      const int j = pc.pair_index(s2, s3);
      if (j >= 0) pc.transition(i, j) = chain.p_pi(s2, s3);
    }
  }
  // Cross-check the product-formula distribution against the pair chain's own
  // left fixed vector.
  const Eigen::VectorXd fixed = stationary_distribution(pc.transition);
  if ((fixed - pc.mu_pair).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error("build_pair_chain: pair stationary distribution cross-check failed");
  }
  return pc;
}

MixingProfile mixing_profile(const InducedChain& chain, double epsilon, int curve_multiples) {
  MixingProfile profile;
  profile.t1_mix = mixing_time(chain.p_pi, chain.mu, epsilon);
  const PairChain pc = build_pair_chain(chain);
  profile.t2_mix = mixing_time(pc.transition, pc.mu_pair, epsilon);
  profile.tv_curve_state =
      sup_start_tv_curve(chain.p_pi, chain.mu, curve_multiples * profile.t1_mix + 1);
  profile.tv_curve_pair =
      sup_start_tv_curve(pc.transition, pc.mu_pair, curve_multiples * profile.t2_mix + 1);
  return profile;
}

std::vector<double> tv_to_stationary(const Eigen::MatrixXd& chain,
                                     const Eigen::VectorXd& stationary,
                                     const Eigen::VectorXd& initial, std::int64_t steps) {
  std::vector<double> out;
  out.reserve(steps);
  Eigen::RowVectorXd dist = initial.transpose();
  for (std::int64_t k = 0; k < steps; ++k) {
    if (k > 0) dist = dist * chain;
    out.push_back(0.5 * (dist.transpose() - stationary).cwiseAbs().sum());
  }
  return out;
}

namespace {

struct TrialStats {
  double state_sq = 0.0;
  double pair_sq = 0.0;
  double tv_state = 0.0;
  double tv_pair = 0.0;
};

void mean_and_se(const std::vector<double>& xs, double& mean, double& se) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace

EmpiricalDistributionStats empirical_distribution_variance(const InducedChain& chain,
                                                           std::int64_t n, int trials,
                                                           std::uint64_t seed, int jobs) {
  if (n < 1) throw InvalidInput("empirical_distribution_variance: n must be >= 1");
  const int ns = chain.n_states();
  const PairChain pc = build_pair_chain(chain);

  std::vector<TrialStats> stats(trials);
  parallel_for(trials, jobs, [&](std::int64_t t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    // S_0 ~ mu, then n+1 more steps; empirical distributions use samples
    // 1..n so every counted state/pair is marginally stationary.
    Eigen::VectorXd state_counts = Eigen::VectorXd::Zero(ns);
    Eigen::VectorXd pair_counts = Eigen::VectorXd::Zero(pc.n_pairs);
    int s = rng.next_categorical(chain.mu);
    int s_next = rng.next_categorical(chain.p_pi.row(s));
    for (std::int64_t k = 1; k <= n; ++k) {
      s = s_next;
      s_next = rng.next_categorical(chain.p_pi.row(s));
      state_counts[s] += 1.0;
      pair_counts[pc.pair_index(s, s_next)] += 1.0;
    }
    const Eigen::VectorXd mu_em = state_counts / double(n);
    const Eigen::VectorXd mu_pair_em = pair_counts / double(n);
    TrialStats& ts = stats[t];
    ts.state_sq = (chain.mu - mu_em).squaredNorm();
    ts.pair_sq = (pc.mu_pair - mu_pair_em).squaredNorm();
    ts.tv_state = tv_distance(chain.mu, mu_em);
    ts.tv_pair = tv_distance(pc.mu_pair, mu_pair_em);
  });

  std::vector<double> a(trials), b(trials), c(trials), d(trials);
  for (int t = 0; t < trials; ++t) {
    a[t] = stats[t].state_sq;
    b[t] = stats[t].pair_sq;
    c[t] = stats[t].tv_state;
    d[t] = stats[t].tv_pair;
  }
  EmpiricalDistributionStats out;
  mean_and_se(a, out.state_var_sum, out.state_var_se);
  mean_and_se(b, out.pair_var_sum, out.pair_var_se);
  mean_and_se(c, out.tv_state_mean, out.tv_state_se);
  mean_and_se(d, out.tv_pair_mean, out.tv_pair_se);
  return out;
}

}  // namespace replay_td
