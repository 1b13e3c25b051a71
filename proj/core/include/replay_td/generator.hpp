#pragma once

#include <cstdint>

#include <json.hpp>

#include "replay_td/mdp.hpp"

namespace replay_td {

/// Random-MDP recipe. Every state keeps a self-loop of at least
/// self_loop_min under each action, which forces aperiodicity; the generator
/// redraws until the induced chain passes the ergodicity check, so generated
/// instances are ergodic by construction.
struct GeneratorSpec {
  int n_states = 3;
  int n_actions = 2;
  double gamma = 0.5;
  double r_max = 1.0;
  double sparsity = 0.0;       // fraction of transition entries forced to zero
  double self_loop_min = 0.05;
  std::uint64_t seed = 0;
};

struct GeneratedMdp {
  Mdp mdp;
  Policy policy;
};

/// Row-normalized random transitions, rewards uniform in [-r_max, r_max],
/// random policy rows. Deterministic in the seed. Throws GenerationFailed
/// after 100 non-ergodic draws.
GeneratedMdp gen_mdp(const GeneratorSpec& spec);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
nlohmann::json generator_spec_to_json(const GeneratorSpec& spec);

}  // namespace replay_td
