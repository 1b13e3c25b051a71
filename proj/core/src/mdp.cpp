#include "replay_td/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "replay_td/errors.hpp"

namespace replay_td {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string at(int s, int a) {
  std::ostringstream os;
  os << "(" << s << "," << a << ")";
  return os.str();
}

std::string at(int s, int a, int s2) {
  std::ostringstream os;
  os << "(" << s << "," << a << "," << s2 << ")";
  return os.str();
}

}  // namespace

ValidationResult validate_mdp(const Mdp& mdp) {
  ValidationResult res;
  auto fail = [&](const std::string& msg) {
    res.ok = false;
    res.violations.push_back(msg);
  };

  if (mdp.n_states < 1) fail("n_states must be positive");
  if (mdp.n_actions < 1) fail("n_actions must be positive");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) fail("gamma must lie in (0,1)");
  if (!(mdp.r_max > 0.0) || !std::isfinite(mdp.r_max)) fail("r_max must be positive and finite");
  if (static_cast<int>(mdp.transition.size()) != mdp.n_actions ||
      static_cast<int>(mdp.reward.size()) != mdp.n_actions) {
    fail("transition/reward tensors must have one slice per action");
    return res;
  }
  for (int a = 0; a < mdp.n_actions; ++a) {
    if (mdp.transition[a].rows() != mdp.n_states || mdp.transition[a].cols() != mdp.n_states ||
        mdp.reward[a].rows() != mdp.n_states || mdp.reward[a].cols() != mdp.n_states) {
      fail("tensor slice for action " + std::to_string(a) + " has wrong shape");
      return res;
    }
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double row_sum = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (!std::isfinite(p)) fail("transition not finite at " + at(s, a, s2));
        if (p < 0.0) fail("negative transition probability at " + at(s, a, s2));
        row_sum += p;
        const double r = mdp.r(s, a, s2);
        if (!std::isfinite(r)) fail("reward not finite at " + at(s, a, s2));
        if (std::abs(r) > mdp.r_max) fail("reward exceeds r_max at " + at(s, a, s2));
      }
      if (std::abs(row_sum - 1.0) > kRowSumTol) fail("row sum != 1 at " + at(s, a));
    }
  }
  return res;
}

ValidationResult validate_policy(const Policy& policy, const Mdp& mdp) {
  ValidationResult res;
  auto fail = [&](const std::string& msg) {
    res.ok = false;
    res.violations.push_back(msg);
  };
  if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions) {
    fail("policy shape does not match MDP");
    return res;
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    double row_sum = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double p = policy.probs(s, a);
      if (!std::isfinite(p)) fail("policy entry not finite at " + at(s, a));
      if (p < 0.0) fail("negative policy probability at " + at(s, a));
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > kRowSumTol) fail("policy row sum != 1 at state " + std::to_string(s));
  }
  return res;
}

nlohmann::json mdp_to_json(const Mdp& mdp) {
  nlohmann::json trans = nlohmann::json::array();
  nlohmann::json rew = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json ts = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      nlohmann::json ta = nlohmann::json::array();
      nlohmann::json ra = nlohmann::json::array();
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        ta.push_back(mdp.p(s, a, s2));
        ra.push_back(mdp.r(s, a, s2));
      }
      ts.push_back(std::move(ta));
      rs.push_back(std::move(ra));
    }
    trans.push_back(std::move(ts));
    rew.push_back(std::move(rs));
  }
  return nlohmann::json{{"n_states", mdp.n_states},
                        {"n_actions", mdp.n_actions},
                        {"gamma", mdp.gamma},
                        {"r_max", mdp.r_max},
                        {"transition", std::move(trans)},
                        {"reward", std::move(rew)}};
}

Mdp mdp_from_json(const nlohmann::json& j) {
  Mdp mdp;
  try {
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.r_max = j.at("r_max").get<double>();
    if (mdp.n_states < 1 || mdp.n_actions < 1) throw InvalidInput("mdp: sizes must be positive");
    const auto& trans = j.at("transition");
    const auto& rew = j.at("reward");
    mdp.transition.assign(mdp.n_actions, Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states));
    mdp.reward.assign(mdp.n_actions, Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          mdp.transition[a](s, s2) = trans.at(s).at(a).at(s2).get<double>();
          mdp.reward[a](s, s2) = rew.at(s).at(a).at(s2).get<double>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("mdp: malformed JSON document: ") + e.what());
  }
  const ValidationResult v = validate_mdp(mdp);
  if (!v.ok) {
    std::string msg = "mdp: invariant violations:";
    for (const auto& s : v.violations) msg += "\n  - " + s;
    throw InvalidInput(msg);
  }
  return mdp;
}

Mdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("mdp: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("mdp: parse error in " + path + ": " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const Mdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("mdp: cannot write " + path);
  out << mdp_to_json(mdp).dump(2) << "\n";
}

nlohmann::json policy_to_json(const Policy& policy) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index s = 0; s < policy.probs.rows(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index a = 0; a < policy.probs.cols(); ++a) row.push_back(policy.probs(s, a));
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"probs", std::move(rows)}};
}

Policy policy_from_json(const nlohmann::json& j) {
  Policy policy;
  try {
    const auto& rows = j.at("probs");
    const int n_states = static_cast<int>(rows.size());
    if (n_states < 1) throw InvalidInput("policy: empty probs");
    const int n_actions = static_cast<int>(rows.at(0).size());
    policy.probs.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
      if (static_cast<int>(rows.at(s).size()) != n_actions) {
        throw InvalidInput("policy: ragged probs rows");
      }
      for (int a = 0; a < n_actions; ++a) {
        const double p = rows.at(s).at(a).get<double>();
        if (!std::isfinite(p) || p < 0.0) throw InvalidInput("policy: invalid probability");
        policy.probs(s, a) = p;
      }
      if (std::abs(policy.probs.row(s).sum() - 1.0) > 1e-12) {
        throw InvalidInput("policy: row " + std::to_string(s) + " does not sum to 1");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("policy: malformed JSON document: ") + e.what());
  }
  return policy;
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("policy: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("policy: parse error in " + path + ": " + e.what());
  }
  return policy_from_json(j);
}

void save_policy(const Policy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("policy: cannot write " + path);
  out << policy_to_json(policy).dump(2) << "\n";
}

Policy uniform_policy(const Mdp& mdp) {
  Policy policy;
  policy.probs = Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
  return policy;
}

}  // namespace replay_td
