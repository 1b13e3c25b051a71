#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace replay_td {

/// Finite MDP with a deterministic reward function r(s, a, s') and a declared
/// reward bound r_max. Immutable after construction; safe to share.
struct Mdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  double r_max = 0.0;
  std::vector<Eigen::MatrixXd> transition;  // per action: (s, s') -> probability
  std::vector<Eigen::MatrixXd> reward;      // per action: (s, s') -> reward

  double p(int s, int a, int s2) const { return transition[a](s, s2); }
  double r(int s, int a, int s2) const { return reward[a](s, s2); }

  /// Iterate-norm bound r_max / (1 - gamma).
  double value_bound() const { return r_max / (1.0 - gamma); }
};

struct Policy {
  Eigen::MatrixXd probs;  // (state, action) -> probability
};

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Checks every structural constraint: shapes, finite entries, row sums of 1
/// within 1e-12, nonnegative probabilities, |r| <= r_max, gamma in (0, 1).
/// Violations are returned as data, not thrown.
ValidationResult validate_mdp(const Mdp& mdp);

ValidationResult validate_policy(const Policy& policy, const Mdp& mdp);

// JSON schema: {"n_states", "n_actions", "gamma", "r_max",
//               "transition": [s][a][s'], "reward": [s][a][s']}.
// Policy: {"probs": [s][a]}. Loaders enforce the invariants above and
// reject NaN/Inf; failures throw InvalidInput.
nlohmann::json mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const nlohmann::json& j);
Mdp load_mdp(const std::string& path);
void save_mdp(const Mdp& mdp, const std::string& path);

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);
Policy load_policy(const std::string& path);
void save_policy(const Policy& policy, const std::string& path);

/// Uniform policy over all actions.
Policy uniform_policy(const Mdp& mdp);

}  // namespace replay_td
