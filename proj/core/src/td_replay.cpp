#include "replay_td/td_replay.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "replay_td/errors.hpp"
#include "replay_td/linalg.hpp"

namespace replay_td {

Eigen::VectorXd td_error(const Transition& o, const Eigen::VectorXd& v, double gamma) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  out[o.s] = td_error_scalar(o, v, gamma);
  return out;
}

Eigen::VectorXd batch_mean_td_error(const std::vector<Transition>& minibatch,
                                    const Eigen::VectorXd& v, double gamma, int n_states) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_states);
  for (const Transition& t : minibatch) acc[t.s] += td_error_scalar(t, v, gamma);
  acc /= static_cast<double>(minibatch.size());
  return acc;
}

Eigen::VectorXd delta_buffer(const BufferEmpirics& emp, const Eigen::VectorXd& v, double gamma) {
  // mu_ss equals D_B P_B entry-wise by counting, so use it directly.
  return emp.mu_s.cwiseProduct(emp.r_b) + gamma * (emp.mu_ss * v) - emp.mu_s.cwiseProduct(v);
}

Eigen::VectorXd delta_stationary(const InducedChain& chain, const Eigen::VectorXd& v) {
  return chain.mu.cwiseProduct(chain.r_pi) + chain.gamma * chain.mu.cwiseProduct(chain.p_pi * v) -
         chain.mu.cwiseProduct(v);
}

NoiseDecomposition noise(const std::vector<Transition>& minibatch, const BufferEmpirics& emp,
                         const InducedChain& chain, const Eigen::VectorXd& v) {
  if (minibatch.empty()) throw EmptyBatch("noise: empty mini-batch");
  const Eigen::VectorXd dbar =
      batch_mean_td_error(minibatch, v, chain.gamma, chain.n_states());
  const Eigen::VectorXd dk = delta_buffer(emp, v, chain.gamma);
  const Eigen::VectorXd dpi = delta_stationary(chain, v);
  NoiseDecomposition out;
  out.w = dbar - dpi;
  out.decomp_a = dbar - dk;
  out.decomp_b = dpi - dk;
  return out;
}

void validate_run_config(const RunConfig& cfg, const Mdp& mdp) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InvalidInput("run config: alpha must lie in (0,1)");
  if (cfg.buffer_n < 1) throw InvalidInput("run config: buffer_n must be >= 1");
  if (cfg.batch_l < 1) throw InvalidInput("run config: batch_l must be >= 1");
  if (cfg.horizon_t < 0) throw InvalidInput("run config: horizon_t must be >= 0");
  if (cfg.initial_v.size() != 0) {
    if (cfg.initial_v.size() != mdp.n_states) {
      throw InvalidInput("run config: initial_v has wrong length");
    }
    if (!cfg.initial_v.allFinite()) throw InvalidInput("run config: initial_v not finite");
    if (cfg.initial_v.cwiseAbs().maxCoeff() > mdp.value_bound() + 1e-12) {
      throw InvalidInput("run config: ||initial_v||_inf exceeds r_max/(1-gamma)");
    }
  }
  switch (cfg.initial_state.mode) {
    case InitialStateMode::Stationary:
      break;
    case InitialStateMode::Fixed:
      if (cfg.initial_state.fixed_state < 0 || cfg.initial_state.fixed_state >= mdp.n_states) {
        throw InvalidInput("run config: fixed initial state out of range");
      }
      break;
    case InitialStateMode::Custom: {
      const auto& d = cfg.initial_state.custom;
      if (d.size() != mdp.n_states) throw InvalidInput("run config: custom distribution wrong length");
      if (!d.allFinite() || d.minCoeff() < 0.0 || std::abs(d.sum() - 1.0) > 1e-9) {
        throw InvalidInput("run config: custom distribution invalid");
      }
      break;
    }
  }
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j{{"alpha", cfg.alpha},
                   {"buffer_n", cfg.buffer_n},
                   {"batch_l", cfg.batch_l},
                   {"horizon_t", cfg.horizon_t},
                   {"seed", cfg.seed}};
  if (cfg.initial_v.size() == 0) {
    j["initial_v"] = "zero";
  } else {
    j["initial_v"] = std::vector<double>(cfg.initial_v.begin(), cfg.initial_v.end());
  }
  switch (cfg.initial_state.mode) {
    case InitialStateMode::Stationary:
      j["initial_state_mode"] = "stationary";
      break;
    case InitialStateMode::Fixed:
      j["initial_state_mode"] = nlohmann::json{{"fixed", cfg.initial_state.fixed_state}};
      break;
    case InitialStateMode::Custom:
      j["initial_state_mode"] = nlohmann::json{
          {"custom", std::vector<double>(cfg.initial_state.custom.begin(),
                                         cfg.initial_state.custom.end())}};
      break;
  }
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, const Mdp& mdp) {
  RunConfig cfg;
  try {
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("buffer_n")) cfg.buffer_n = j.at("buffer_n").get<int>();
    if (j.contains("batch_l")) cfg.batch_l = j.at("batch_l").get<int>();
    if (j.contains("horizon_t")) cfg.horizon_t = j.at("horizon_t").get<std::int64_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("initial_v")) {
      const auto& iv = j.at("initial_v");
      if (iv.is_string() && iv.get<std::string>() == "zero") {
        cfg.initial_v.resize(0);
      } else if (iv.is_string() && iv.get<std::string>() == "extreme") {
        cfg.initial_v = Eigen::VectorXd::Constant(mdp.n_states, mdp.value_bound());
      } else if (iv.is_array()) {
        cfg.initial_v.resize(iv.size());
        for (size_t i = 0; i < iv.size(); ++i) cfg.initial_v[i] = iv.at(i).get<double>();
      } else {
        throw InvalidInput("run config: initial_v must be \"zero\", \"extreme\" or an array");
      }
    }
    if (j.contains("initial_state_mode")) {
      const auto& m = j.at("initial_state_mode");
      if (m.is_string() && m.get<std::string>() == "stationary") {
        cfg.initial_state = InitialState::stationary();
      } else if (m.is_object() && m.contains("fixed")) {
        cfg.initial_state = InitialState::fixed(m.at("fixed").get<int>());
      } else if (m.is_object() && m.contains("custom")) {
        Eigen::VectorXd d(m.at("custom").size());
        for (size_t i = 0; i < m.at("custom").size(); ++i) d[i] = m.at("custom").at(i).get<double>();
        cfg.initial_state = InitialState::custom_dist(std::move(d));
      } else {
        throw InvalidInput("run config: unrecognized initial_state_mode");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("run config: malformed JSON: ") + e.what());
  }
  validate_run_config(cfg, mdp);
  return cfg;
}

TrajectorySampler::TrajectorySampler(Mdp mdp, Policy policy, Rng rng)
    : mdp_(std::move(mdp)), policy_(std::move(policy)), rng_(rng) {}

int TrajectorySampler::sample_initial(const InitialState& init, const InducedChain& chain) {
  switch (init.mode) {
    case InitialStateMode::Stationary:
      return rng_.next_categorical(chain.mu);
    case InitialStateMode::Fixed:
      return init.fixed_state;
    case InitialStateMode::Custom:
      return rng_.next_categorical(init.custom);
  }
  return 0;
}

Transition TrajectorySampler::step_from(int s) {
  const int a = rng_.next_categorical(policy_.probs.row(s));
  const int s_next = rng_.next_categorical(mdp_.transition[a].row(s));
  return Transition{s, mdp_.r(s, a, s_next), s_next};
}

namespace {

// Sub-stream indices under the run seed. Trajectory and mini-batch draws
// never share a stream, so two learners with equal seeds see identical
// trajectories regardless of how much batch sampling each performs.
constexpr std::uint64_t kTrajStream = 1;
constexpr std::uint64_t kBatchStream = 2;

}  // namespace

Learner::Learner(const Mdp& mdp, const Policy& policy, const InducedChain& chain,
                 const RunConfig& cfg)
    : chain_(chain),
      cfg_(cfg),
      traj_(mdp, policy, Rng(derive_seed(cfg.seed, kTrajStream))),
      batch_rng_(derive_seed(cfg.seed, kBatchStream)),
      buffer_(cfg.buffer_n, mdp.n_states) {
  validate_run_config(cfg, mdp);
  v_ = cfg.initial_v.size() == 0 ? Eigen::VectorXd::Zero(mdp.n_states) : cfg.initial_v;
  state_ = traj_.sample_initial(cfg.initial_state, chain);
  for (int i = 0; i < cfg.buffer_n; ++i) {
    const Transition t = traj_.step_from(state_);
    state_ = t.s_next;
    buffer_.push(t);
  }
}

StepRecord Learner::step() {
  const Transition o = traj_.step_from(state_);
  state_ = o.s_next;
  buffer_.push(o);

  const BufferEmpirics emp = buffer_.empirics();
  const std::vector<Transition> mb = buffer_.sample_minibatch(cfg_.batch_l, batch_rng_);
  const Eigen::VectorXd dbar = batch_mean_td_error(mb, v_, chain_.gamma, chain_.n_states());

  StepRecord rec;
  rec.w = dbar - delta_stationary(chain_, v_);
  const Eigen::VectorXd dk = delta_buffer(emp, v_, chain_.gamma);
  rec.decomp_a = dbar - dk;
  rec.decomp_b = delta_stationary(chain_, v_) - dk;

  v_ += cfg_.alpha * dbar;
  ++step_index_;
  return rec;
}

RunTrace run(const Mdp& mdp, const Policy& policy, const InducedChain& chain,
             const RunConfig& cfg) {
  Learner learner(mdp, policy, chain, cfg);
  const std::int64_t t_horizon = cfg.horizon_t;
  const bool weighted = chain.m_matrix.has_value();
  const std::int64_t snapshot_stride =
      t_horizon <= 10000 ? 1
                         : (t_horizon + 999) / 1000;  // ceil(T/1000)

  RunTrace trace;
  trace.config = cfg;
  trace.err_l2_sq.reserve(t_horizon + 1);
  if (weighted) trace.err_weighted.reserve(t_horizon + 1);
  trace.w_norm.reserve(t_horizon);
  trace.w_norm_sq.reserve(t_horizon);
  trace.decomp_a_norm.reserve(t_horizon);
  trace.decomp_b_norm.reserve(t_horizon);

  Eigen::VectorXd avg_acc = Eigen::VectorXd::Zero(mdp.n_states);
  auto record_errors = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd err = v - chain.v_pi;
    trace.err_l2_sq.push_back(err.squaredNorm());
    if (weighted) trace.err_weighted.push_back(weighted_sq_norm(err, *chain.m_matrix));
    trace.max_v_inf = std::max(trace.max_v_inf, v.cwiseAbs().maxCoeff());
  };

  record_errors(learner.value());
  for (std::int64_t k = 0; k < t_horizon; ++k) {
    if (k % snapshot_stride == 0) {
      trace.v_snapshot_steps.push_back(k);
      trace.v_snapshots.push_back(learner.value());
    }
    avg_acc += learner.value();
    const StepRecord rec = learner.step();
    const double wn = rec.w.norm();
    trace.w_norm.push_back(wn);
    trace.w_norm_sq.push_back(wn * wn);
    trace.decomp_a_norm.push_back(rec.decomp_a.norm());
    trace.decomp_b_norm.push_back(rec.decomp_b.norm());
    record_errors(learner.value());
  }
  trace.v_final = learner.value();
  trace.avg_iterate =
      t_horizon > 0 ? Eigen::VectorXd(avg_acc / double(t_horizon)) : learner.value();
  trace.avg_iterate_err_sq = (trace.avg_iterate - chain.v_pi).squaredNorm();
  return trace;
}

std::vector<Eigen::VectorXd> run_standard_td(const Mdp& mdp, const Policy& policy,
                                             const InducedChain& chain, const RunConfig& cfg) {
  validate_run_config(cfg, mdp);
  TrajectorySampler traj(mdp, policy, Rng(derive_seed(cfg.seed, kTrajStream)));
  int state = traj.sample_initial(cfg.initial_state, chain);
  for (int i = 0; i < cfg.buffer_n; ++i) {
    state = traj.step_from(state).s_next;  // align trajectory stream with warm-up
  }
  Eigen::VectorXd v =
      cfg.initial_v.size() == 0 ? Eigen::VectorXd::Zero(mdp.n_states) : cfg.initial_v;
  std::vector<Eigen::VectorXd> iterates;
  iterates.reserve(cfg.horizon_t + 1);
  iterates.push_back(v);
  for (std::int64_t k = 0; k < cfg.horizon_t; ++k) {
    const Transition o = traj.step_from(state);
    state = o.s_next;
    v[o.s] += cfg.alpha * td_error_scalar(o, v, chain.gamma);
    iterates.push_back(v);
  }
  return iterates;
}

namespace {

void append_double(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

}  // namespace

void write_trace_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw InvalidInput("write_trace_csv: cannot write " + path);
  std::string line = "k,err_l2_sq,err_weighted,w_norm,w_norm_sq,decomp_a,decomp_b\n";
  file << line;
  const size_t steps = trace.w_norm.size();
  for (size_t k = 0; k < steps; ++k) {
    line.clear();
    line += std::to_string(k);
    line += ',';
    append_double(line, trace.err_l2_sq[k]);
    line += ',';
    append_double(line, trace.err_weighted.empty() ? std::nan("") : trace.err_weighted[k]);
    line += ',';
    append_double(line, trace.w_norm[k]);
    line += ',';
    append_double(line, trace.w_norm_sq[k]);
    line += ',';
    append_double(line, trace.decomp_a_norm[k]);
    line += ',';
    append_double(line, trace.decomp_b_norm[k]);
    line += '\n';
    file << line;
  }
}

nlohmann::json trace_sidecar_json(const RunTrace& trace) {
  double mean_w = 0.0;
  double mean_w_sq = 0.0;
  const size_t steps = trace.w_norm.size();
  for (size_t k = 0; k < steps; ++k) {
    mean_w += trace.w_norm[k];
    mean_w_sq += trace.w_norm_sq[k];
  }
  if (steps > 0) {
    mean_w /= double(steps);
    mean_w_sq /= double(steps);
  }
  return nlohmann::json{
      {"config", run_config_to_json(trace.config)},
      {"seed", trace.config.seed},
      {"summary",
       {{"steps", steps},
        {"final_err_l2_sq", trace.err_l2_sq.back()},
        {"avg_iterate_err_sq", trace.avg_iterate_err_sq},
        {"max_v_inf", trace.max_v_inf},
        {"mean_w_norm", mean_w},
        {"mean_w_norm_sq", mean_w_sq}}}};
}

void write_trace_sidecar(const RunTrace& trace, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw InvalidInput("write_trace_sidecar: cannot write " + path);
  file << trace_sidecar_json(trace).dump(2) << "\n";
}

}  // namespace replay_td
