#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "replay_td/errors.hpp"
#include "replay_td/generator.hpp"
#include "replay_td/induced_chain.hpp"
#include "replay_td/td_replay.hpp"

using namespace replay_td;

namespace {

Mdp uniform_two_state() {
  Mdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.r_max = 1.0;
  mdp.transition = {Eigen::MatrixXd::Constant(2, 2, 0.5)};
  mdp.reward = {Eigen::MatrixXd::Constant(2, 2, 1.0)};
  return mdp;
}

Mdp single_state(double reward) {
  Mdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.r_max = 1.0;
  mdp.transition = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  mdp.reward = {Eigen::MatrixXd::Constant(1, 1, reward)};
  return mdp;
}

GeneratedMdp random_instance(Rng& rng, int max_states) {
  GeneratorSpec spec;
  spec.n_states = 1 + static_cast<int>(rng.next_below(max_states));
  spec.n_actions = 1 + static_cast<int>(rng.next_below(3));
  spec.gamma = rng.next_real(0.3, 0.8);
  spec.sparsity = rng.next_real(0.0, 0.5);
  spec.self_loop_min = rng.next_real(0.05, 0.2);
  spec.seed = rng.next_u64();
  return gen_mdp(spec);
}

}  // namespace

TEST_CASE("td_error examples") {
  Eigen::VectorXd v(2);
  v << 2, 2;
  const Eigen::VectorXd fixed_point = td_error({0, 1.0, 1}, v, 0.5);
  CHECK(fixed_point[0] == 0.0);
  CHECK(fixed_point[1] == 0.0);

  v << 0, 0;
  const Eigen::VectorXd from_zero = td_error({0, 1.0, 1}, v, 0.5);
  CHECK(from_zero[0] == 1.0);
  CHECK(from_zero[1] == 0.0);

  v << 1, 0;
  const Eigen::VectorXd mixed = td_error({1, -0.5, 0}, v, 0.5);
  CHECK(mixed[0] == 0.0);
  CHECK(mixed[1] == 0.0);
}

TEST_CASE("delta_stationary vanishes at the true value function") {
  Rng rng(1001);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneratedMdp gen = random_instance(rng, 5);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.2, false);
    CHECK(delta_stationary(chain, chain.v_pi).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("delta_buffer on a point-mass buffer") {
  ReplayBuffer buf(4, 2);
  buf.push({0, 1.0, 0});
  const Eigen::VectorXd delta = delta_buffer(buf.empirics(), Eigen::VectorXd::Zero(2), 0.5);
  CHECK(delta[0] == 1.0);
  CHECK(delta[1] == 0.0);
}

TEST_CASE("delta_buffer equals delta_stationary when the empirics match the chain") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1, false);
  BufferEmpirics emp;
  emp.mu_s = chain.mu;
  emp.p_b = chain.p_pi;
  emp.mu_ss = chain.d_pi() * chain.p_pi;
  emp.r_b = chain.r_pi;
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd v(2);
    v << rng.next_real(-2, 2), rng.next_real(-2, 2);
    const Eigen::VectorXd a = delta_buffer(emp, v, chain.gamma);
    const Eigen::VectorXd b = delta_stationary(chain, v);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("noise decomposition identity and whole-buffer batch") {
  Rng rng(2002);
  const GeneratedMdp gen = random_instance(rng, 4);
  const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.2, false);
  const int n = gen.mdp.n_states;
  ReplayBuffer buf(16, n);
  for (int i = 0; i < 16; ++i) {
    buf.push({static_cast<int>(rng.next_below(n)), rng.next_real(-1, 1),
              static_cast<int>(rng.next_below(n))});
  }
  const BufferEmpirics emp = buf.empirics();
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.next_real(-2, 2);

  Rng batch_rng(3);
  const auto batch = buf.sample_minibatch(8, batch_rng);
  const NoiseDecomposition dec = noise(batch, emp, chain, v);
  CHECK((dec.w - (dec.decomp_a - dec.decomp_b)).cwiseAbs().maxCoeff() <= 1e-12);

  // Mini-batch equal to the whole buffer: sample mean equals buffer mean.
  const std::vector<Transition> whole(buf.entries().begin(), buf.entries().end());
  const NoiseDecomposition full = noise(whole, emp, chain, v);
  CHECK(full.decomp_a.cwiseAbs().maxCoeff() <= 1e-13);

  CHECK_THROWS_AS(noise({}, emp, chain, v), EmptyBatch);
}

TEST_CASE("single-state scalar recursion matches the closed form") {
  const Mdp mdp = single_state(1.0);
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.2, false);
  RunConfig cfg;
  cfg.alpha = 0.2;
  cfg.buffer_n = 1;
  cfg.batch_l = 1;
  cfg.horizon_t = 25;
  cfg.seed = 9;
  Learner learner(mdp, uniform_policy(mdp), chain, cfg);
  for (int k = 1; k <= 25; ++k) {
    learner.step();
    const double closed = 2.0 + (0.0 - 2.0) * std::pow(1.0 - 0.5 * 0.2, k);
    CHECK(learner.value()[0] == doctest::Approx(closed).epsilon(1e-12));
  }
  // Frozen value at k = 5 from the arithmetic oracle.
  RunConfig cfg5 = cfg;
  cfg5.horizon_t = 5;
  const RunTrace trace = run(mdp, uniform_policy(mdp), chain, cfg5);
  CHECK(trace.v_final[0] == doctest::Approx(0.81902).epsilon(1e-12));
}

TEST_CASE("constant-reward chain at the fixed point never moves") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.3);
  RunConfig cfg;
  cfg.alpha = 0.3;
  cfg.buffer_n = 8;
  cfg.batch_l = 4;
  cfg.horizon_t = 50;
  cfg.initial_v = chain.v_pi;  // exactly (2, 2)
  cfg.seed = 11;
  const RunTrace trace = run(mdp, uniform_policy(mdp), chain, cfg);
  CHECK(trace.err_l2_sq.back() == 0.0);
  CHECK(trace.v_final == chain.v_pi);
}

TEST_CASE("update identity: V_{k+1} - V = A (V_k - V) + alpha w") {
  Rng rng(3003);
  for (int trial = 0; trial < 10; ++trial) {
    const GeneratedMdp gen = random_instance(rng, 5);
    const double alpha = rng.next_real(0.05, 0.9);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, alpha, false);
    RunConfig cfg;
    cfg.alpha = alpha;
    cfg.buffer_n = 16;
    cfg.batch_l = 4;
    cfg.horizon_t = 0;
    cfg.seed = rng.next_u64();
    Learner learner(gen.mdp, gen.policy, chain, cfg);
    for (int k = 0; k < 40; ++k) {
      const Eigen::VectorXd before = learner.value();
      const StepRecord rec = learner.step();
      const Eigen::VectorXd lhs = learner.value() - chain.v_pi;
      const Eigen::VectorXd rhs = chain.a_matrix * (before - chain.v_pi) + alpha * rec.w;
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("iterates stay inside the value bound from an extreme start") {
  Rng rng(4004);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneratedMdp gen = random_instance(rng, 5);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.5, false);
    RunConfig cfg;
    cfg.alpha = rng.next_real(0.01, 0.99);
    cfg.buffer_n = 8;
    cfg.batch_l = 4;
    cfg.horizon_t = 200;
    cfg.initial_v = Eigen::VectorXd::Constant(gen.mdp.n_states, gen.mdp.value_bound());
    cfg.seed = rng.next_u64();
    const RunTrace trace = run(gen.mdp, gen.policy, chain, cfg);
    CHECK(trace.max_v_inf <= gen.mdp.value_bound() + 1e-12);
  }
}

TEST_CASE("equal seeds give bit-identical traces") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1);
  RunConfig cfg;
  cfg.horizon_t = 300;
  cfg.buffer_n = 32;
  cfg.batch_l = 8;
  cfg.seed = 77;
  const RunTrace a = run(mdp, uniform_policy(mdp), chain, cfg);
  const RunTrace b = run(mdp, uniform_policy(mdp), chain, cfg);
  CHECK(a.v_final == b.v_final);
  CHECK(a.err_l2_sq == b.err_l2_sq);
  CHECK(a.w_norm == b.w_norm);
  CHECK(a.avg_iterate_err_sq == b.avg_iterate_err_sq);
}

TEST_CASE("zero horizon leaves only the initial statistics") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1);
  RunConfig cfg;
  cfg.horizon_t = 0;
  cfg.buffer_n = 4;
  cfg.batch_l = 2;
  cfg.seed = 5;
  const RunTrace trace = run(mdp, uniform_policy(mdp), chain, cfg);
  CHECK(trace.err_l2_sq.size() == 1);
  CHECK(trace.w_norm.empty());
  CHECK(trace.avg_iterate == Eigen::VectorXd::Zero(2));
  CHECK(trace.avg_iterate_err_sq ==
        doctest::Approx((Eigen::VectorXd::Zero(2) - chain.v_pi).squaredNorm()).epsilon(1e-15));
}

TEST_CASE("L = N = 1 reduces to standard TD-learning, bit for bit") {
  Rng rng(6006);
  for (int trial = 0; trial < 5; ++trial) {
    const GeneratedMdp gen = random_instance(rng, 4);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.15, false);
    RunConfig cfg;
    cfg.alpha = 0.15;
    cfg.buffer_n = 1;
    cfg.batch_l = 1;
    cfg.horizon_t = 500;
    cfg.seed = rng.next_u64();
    Learner learner(gen.mdp, gen.policy, chain, cfg);
    const auto reference = run_standard_td(gen.mdp, gen.policy, chain, cfg);
    CHECK(learner.value() == reference[0]);
    for (int k = 0; k < 500; ++k) {
      learner.step();
      REQUIRE((learner.value().array() == reference[k + 1].array()).all());
    }
  }
}

TEST_CASE("run config validation rejects each broken field") {
  const Mdp mdp = uniform_two_state();
  RunConfig cfg;
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.alpha = 0.1;
  cfg.batch_l = 0;
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.batch_l = 1;
  cfg.buffer_n = 0;
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.buffer_n = 1;
  cfg.initial_v = Eigen::VectorXd::Constant(2, 5.0);  // bound is 2
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.initial_v = Eigen::VectorXd::Zero(2);
  cfg.initial_state = InitialState::fixed(7);
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.initial_state = InitialState::custom_dist(Eigen::VectorXd::Constant(2, 0.9));
  CHECK_THROWS_AS(validate_run_config(cfg, mdp), InvalidInput);
  cfg.initial_state = InitialState::stationary();
  CHECK_NOTHROW(validate_run_config(cfg, mdp));
}

TEST_CASE("run config json round trip resolves extreme starts") {
  const Mdp mdp = uniform_two_state();
  const nlohmann::json j{{"alpha", 0.25},
                         {"buffer_n", 16},
                         {"batch_l", 4},
                         {"horizon_t", 100},
                         {"initial_v", "extreme"},
                         {"initial_state_mode", {{"fixed", 1}}},
                         {"seed", 12}};
  const RunConfig cfg = run_config_from_json(j, mdp);
  CHECK(cfg.alpha == 0.25);
  CHECK(cfg.initial_v == Eigen::VectorXd::Constant(2, 2.0));
  CHECK(cfg.initial_state.mode == InitialStateMode::Fixed);
  CHECK(cfg.initial_state.fixed_state == 1);
  const RunConfig back = run_config_from_json(run_config_to_json(cfg), mdp);
  CHECK(back.initial_v == cfg.initial_v);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("value snapshots are full for short runs and thinned for long ones") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1, false);
  RunConfig cfg;
  cfg.buffer_n = 2;
  cfg.batch_l = 1;
  cfg.seed = 1;

  cfg.horizon_t = 50;
  const RunTrace dense = run(mdp, uniform_policy(mdp), chain, cfg);
  CHECK(dense.v_snapshots.size() == 50);  // every step while T <= 10^4

  cfg.horizon_t = 12000;
  const RunTrace thinned = run(mdp, uniform_policy(mdp), chain, cfg);
  // ceil(12000 / 1000) = 12 step stride.
  CHECK(thinned.v_snapshot_steps[1] - thinned.v_snapshot_steps[0] == 12);
  CHECK(thinned.v_snapshots.size() == 1000);
  CHECK(thinned.err_l2_sq.size() == 12001);  // norms still recorded every step
}

TEST_CASE("trace files carry the documented schema") {
  const Mdp mdp = uniform_two_state();
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1);
  RunConfig cfg;
  cfg.horizon_t = 20;
  cfg.buffer_n = 8;
  cfg.batch_l = 2;
  cfg.seed = 3;
  const RunTrace trace = run(mdp, uniform_policy(mdp), chain, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "replay_td_trace_test";
  std::filesystem::create_directories(dir);
  write_trace_csv(trace, (dir / "trace.csv").string());
  write_trace_sidecar(trace, (dir / "trace.json").string());

  std::ifstream csv(dir / "trace.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "k,err_l2_sq,err_weighted,w_norm,w_norm_sq,decomp_a,decomp_b");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 20);

  nlohmann::json sidecar;
  std::ifstream(dir / "trace.json") >> sidecar;
  CHECK(sidecar.contains("config"));
  CHECK(sidecar["summary"]["steps"] == 20);
  CHECK(sidecar["summary"].contains("avg_iterate_err_sq"));
  std::filesystem::remove_all(dir);
}
