#include "replay_td/generator.hpp"

#include <cmath>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/errors.hpp"
#include "replay_td/rng.hpp"

namespace replay_td {

namespace {

constexpr int kMaxAttempts = 100;

Eigen::VectorXd random_simplex_row(int n, Rng& rng) {
  // Exponential spacings give a uniform point on the simplex.
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.next_double();
    if (u <= 0.0) u = 0x1.0p-53;
    w[i] = -std::log(u);
  }
  return w / w.sum();
}

GeneratedMdp attempt(const GeneratorSpec& spec, Rng& rng) {
  const int n = spec.n_states;
  GeneratedMdp out;
  out.mdp.n_states = n;
  out.mdp.n_actions = spec.n_actions;
  out.mdp.gamma = spec.gamma;
  out.mdp.r_max = spec.r_max;
  out.mdp.transition.assign(spec.n_actions, Eigen::MatrixXd::Zero(n, n));
  out.mdp.reward.assign(spec.n_actions, Eigen::MatrixXd::Zero(n, n));

  for (int a = 0; a < spec.n_actions; ++a) {
    for (int s = 0; s < n; ++s) {
      Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
      for (int s2 = 0; s2 < n; ++s2) {
        if (rng.next_double() >= spec.sparsity) weights[s2] = rng.next_double();
      }
      double total = weights.sum();
      if (total == 0.0) {
        weights[static_cast<int>(rng.next_below(n))] = 1.0;
        total = 1.0;
      }
      // Mass (1 - self_loop_min) spread over the drawn support, plus the
      // guaranteed self-loop.
      weights *= (1.0 - spec.self_loop_min) / total;
      weights[s] += spec.self_loop_min;
      out.mdp.transition[a].row(s) = weights.transpose();
      for (int s2 = 0; s2 < n; ++s2) {
        out.mdp.reward[a](s, s2) = rng.next_real(-spec.r_max, spec.r_max);
      }
    }
  }
  out.policy.probs.resize(n, spec.n_actions);
  for (int s = 0; s < n; ++s) {
    out.policy.probs.row(s) = random_simplex_row(spec.n_actions, rng).transpose();
  }
  return out;
}

}  // namespace

GeneratedMdp gen_mdp(const GeneratorSpec& spec) {
  if (spec.n_states < 1 || spec.n_actions < 1) {
    throw InvalidInput("gen_mdp: sizes must be positive");
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) throw InvalidInput("gen_mdp: gamma must lie in (0,1)");
  if (!(spec.r_max > 0.0)) throw InvalidInput("gen_mdp: r_max must be positive");
  if (spec.sparsity < 0.0 || spec.sparsity >= 1.0) {
    throw InvalidInput("gen_mdp: sparsity must lie in [0,1)");
  }
  if (spec.self_loop_min <= 0.0 || spec.self_loop_min >= 1.0) {
    throw InvalidInput("gen_mdp: self_loop_min must lie in (0,1)");
  }
  Rng rng(spec.seed);
  for (int attempt_idx = 0; attempt_idx < kMaxAttempts; ++attempt_idx) {
    GeneratedMdp candidate = attempt(spec, rng);
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(spec.n_states, spec.n_states);
    for (int s = 0; s < spec.n_states; ++s) {
      for (int a = 0; a < spec.n_actions; ++a) {
        p_pi.row(s) += candidate.policy.probs(s, a) * candidate.mdp.transition[a].row(s);
      }
    }
    if (ergodicity_check(p_pi).ergodic()) return candidate;
  }
  throw GenerationFailed("gen_mdp: no ergodic instance within 100 attempts");
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec spec;
  try {
    if (j.contains("n_states")) spec.n_states = j.at("n_states").get<int>();
    if (j.contains("n_actions")) spec.n_actions = j.at("n_actions").get<int>();
    if (j.contains("gamma")) spec.gamma = j.at("gamma").get<double>();
    if (j.contains("r_max")) spec.r_max = j.at("r_max").get<double>();
    if (j.contains("sparsity")) spec.sparsity = j.at("sparsity").get<double>();
    if (j.contains("self_loop_min")) spec.self_loop_min = j.at("self_loop_min").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("generator spec: malformed JSON: ") + e.what());
  }
  return spec;
}

nlohmann::json generator_spec_to_json(const GeneratorSpec& spec) {
  return nlohmann::json{{"n_states", spec.n_states},   {"n_actions", spec.n_actions},
                        {"gamma", spec.gamma},         {"r_max", spec.r_max},
                        {"sparsity", spec.sparsity},   {"self_loop_min", spec.self_loop_min},
                        {"seed", spec.seed}};
}

}  // namespace replay_td
