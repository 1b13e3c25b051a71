#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_td/induced_chain.hpp"
#include "replay_td/mdp.hpp"
#include "replay_td/replay_buffer.hpp"
#include "replay_td/rng.hpp"

namespace replay_td {

/// r + gamma*v[s'] - v[s].
inline double td_error_scalar(const Transition& o, const Eigen::VectorXd& v, double gamma) {
  return o.r + gamma * v[o.s_next] - v[o.s];
}

/// One-sample TD-error as a vector supported on coordinate s.
Eigen::VectorXd td_error(const Transition& o, const Eigen::VectorXd& v, double gamma);

/// Mini-batch mean of td_error over the batch.
Eigen::VectorXd batch_mean_td_error(const std::vector<Transition>& minibatch,
                                    const Eigen::VectorXd& v, double gamma, int n_states);

/// Expected TD-error under the buffer empirics:
/// D_B R_B + gamma D_B P_B v - D_B v.
Eigen::VectorXd delta_buffer(const BufferEmpirics& emp, const Eigen::VectorXd& v, double gamma);

/// Expected TD-error under the stationary distribution:
/// D R + gamma D P v - D v. Vanishes at v = v_pi.
Eigen::VectorXd delta_stationary(const InducedChain& chain, const Eigen::VectorXd& v);

struct NoiseDecomposition {
  Eigen::VectorXd w;         // batch mean TD-error minus delta_stationary(v)
  Eigen::VectorXd decomp_a;  // batch mean TD-error minus delta_buffer(v)
  Eigen::VectorXd decomp_b;  // delta_stationary(v) minus delta_buffer(v)
};

/// Splits the update noise into its sampling-concentration part (a) and its
/// buffer-vs-stationary part (b); w = a - b identically.
NoiseDecomposition noise(const std::vector<Transition>& minibatch, const BufferEmpirics& emp,
                         const InducedChain& chain, const Eigen::VectorXd& v);

enum class InitialStateMode { Stationary, Fixed, Custom };

struct InitialState {
  InitialStateMode mode = InitialStateMode::Stationary;
  int fixed_state = 0;
  Eigen::VectorXd custom;

  static InitialState stationary() { return {}; }
  static InitialState fixed(int s) { return {InitialStateMode::Fixed, s, {}}; }
  static InitialState custom_dist(Eigen::VectorXd dist) {
    return {InitialStateMode::Custom, 0, std::move(dist)};
  }
};

struct RunConfig {
  double alpha = 0.1;
  int buffer_n = 256;
  int batch_l = 32;
  std::int64_t horizon_t = 2000;
  Eigen::VectorXd initial_v;  // empty means zeros
  InitialState initial_state;
  std::uint64_t seed = 0;
};

/// Throws InvalidInput on any violated constraint, including
/// ||initial_v||_inf > r_max / (1 - gamma).
void validate_run_config(const RunConfig& cfg, const Mdp& mdp);

nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Accepts "zero" / "extreme" / explicit arrays for initial_v; the MDP is
/// needed to resolve the extreme vector (r_max / (1 - gamma)) * ones.
RunConfig run_config_from_json(const nlohmann::json& j, const Mdp& mdp);

/// Draws (a, s') pairs along a single trajectory of the induced chain. The
/// stream is separate from mini-batch sampling so that trajectory draws are
/// identical across learners sharing a seed. Holds its own copies of the MDP
/// and policy; desk-scale instances are small.
class TrajectorySampler {
 public:
  TrajectorySampler(Mdp mdp, Policy policy, Rng rng);

  int sample_initial(const InitialState& init, const InducedChain& chain);
  /// One transition from s; returns (s, r, s').
  Transition step_from(int s);

 private:
  Mdp mdp_;
  Policy policy_;
  Rng rng_;
};

struct StepRecord {
  Eigen::VectorXd w;
  Eigen::VectorXd decomp_a;
  Eigen::VectorXd decomp_b;
};

/// The replay learner. Construction performs the warm-up: the start state is
/// drawn per initial_state, then buffer_n transitions fill the buffer, so the
/// buffer is full at every learner step. Each step observes one transition,
/// updates the buffer, samples a mini-batch of batch_l with replacement and
/// applies v += alpha * (batch mean TD-error), recording the noise vector and
/// its decomposition. Strictly sequential; one instance per run.
class Learner {
 public:
  Learner(const Mdp& mdp, const Policy& policy, const InducedChain& chain,
          const RunConfig& cfg);

  StepRecord step();

  const Eigen::VectorXd& value() const { return v_; }
  std::int64_t step_index() const { return step_index_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int current_state() const { return state_; }

 private:
  InducedChain chain_;
  RunConfig cfg_;
  TrajectorySampler traj_;
  Rng batch_rng_;
  ReplayBuffer buffer_;
  Eigen::VectorXd v_;
  int state_ = 0;
  std::int64_t step_index_ = 0;
};

/// Per-step instrumentation of one seeded run. Index convention: error
/// series cover k = 0..T (T+1 entries), noise series cover k = 0..T-1.
struct RunTrace {
  RunConfig config;
  std::vector<double> err_l2_sq;     // ||V_k - v_pi||_2^2
  std::vector<double> err_weighted;  // ||V_k - v_pi||_M^2; empty when M was not built
  std::vector<double> w_norm;
  std::vector<double> w_norm_sq;
  std::vector<double> decomp_a_norm;
  std::vector<double> decomp_b_norm;
  std::vector<std::int64_t> v_snapshot_steps;
  std::vector<Eigen::VectorXd> v_snapshots;
  Eigen::VectorXd v_final;
  Eigen::VectorXd avg_iterate;  // (1/T) sum_{k<T} V_k; equals V_0 when T = 0
  double avg_iterate_err_sq = 0.0;
  double max_v_inf = 0.0;
};

/// Runs warm-up plus horizon_t learner steps. Deterministic given the seed.
RunTrace run(const Mdp& mdp, const Policy& policy, const InducedChain& chain,
             const RunConfig& cfg);

/// Reference standard TD-learning v_{k+1} = v_k + alpha * delta(O_k, v_k) on
/// the same trajectory stream as `run` (the warm-up transitions are drawn and
/// discarded so the streams line up). Returns iterates V_0..V_T.
std::vector<Eigen::VectorXd> run_standard_td(const Mdp& mdp, const Policy& policy,
                                             const InducedChain& chain, const RunConfig& cfg);

/// CSV with header k,err_l2_sq,err_weighted,w_norm,w_norm_sq,decomp_a,decomp_b
/// (one row per learner step) plus a JSON sidecar carrying config, seed and
/// summary statistics.
void write_trace_csv(const RunTrace& trace, const std::string& path);
nlohmann::json trace_sidecar_json(const RunTrace& trace);
void write_trace_sidecar(const RunTrace& trace, const std::string& path);

}  // namespace replay_td
