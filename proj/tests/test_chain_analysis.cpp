#include <doctest.h>

#include <cmath>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/errors.hpp"
#include "replay_td/generator.hpp"
#include "replay_td/induced_chain.hpp"
#include "replay_td/rng.hpp"

using namespace replay_td;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::MatrixXd lazy_two_state() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return p;
}

InducedChain chain_from_matrix(const Eigen::MatrixXd& p) {
  InducedChain chain;
  chain.p_pi = p;
  chain.mu = stationary_distribution(p);
  chain.mu_min = chain.mu.minCoeff();
  return chain;
}

GeneratedMdp random_ergodic(Rng& rng, int max_states) {
  GeneratorSpec spec;
  spec.n_states = 1 + static_cast<int>(rng.next_below(max_states));
  spec.n_actions = 1 + static_cast<int>(rng.next_below(3));
  spec.gamma = 0.5;
  spec.sparsity = rng.next_real(0.0, 0.5);
  spec.self_loop_min = rng.next_real(0.05, 0.2);
  spec.seed = rng.next_u64();
  return gen_mdp(spec);
}

}  // namespace

TEST_CASE("tv_distance basics") {
  CHECK(tv_distance(vec2(0.5, 0.5), vec2(0.5, 0.5)) == 0.0);
  CHECK(tv_distance(vec2(1, 0), vec2(0, 1)) == 1.0);
  CHECK(tv_distance(vec2(0.7, 0.3), vec2(0.5, 0.5)) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(tv_distance(vec2(0.7, 0.3), vec2(0.5, 0.5)) ==
        tv_distance(vec2(0.5, 0.5), vec2(0.7, 0.3)));
  Eigen::VectorXd three(3);
  three << 1, 0, 0;
  CHECK_THROWS_AS(tv_distance(vec2(1, 0), three), DimensionMismatch);
}

TEST_CASE("state_distribution_at hand-checked values") {
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
  CHECK(state_distribution_at(uniform, vec2(1, 0), 1)[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(state_distribution_at(uniform, vec2(1, 0), 0) == vec2(1, 0));

  const Eigen::VectorXd two_steps = state_distribution_at(lazy_two_state(), vec2(1, 0), 2);
  CHECK(two_steps[0] == doctest::Approx(0.83).epsilon(1e-13));
  CHECK(two_steps[1] == doctest::Approx(0.17).epsilon(1e-13));
  CHECK(two_steps.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mixing_time: uniform chain mixes in one step") {
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
  CHECK(mixing_time(uniform, vec2(0.5, 0.5)) == 1);
}

TEST_CASE("mixing_time matches the eigen-decomposition oracle on the lazy chain") {
  // For P = [[.9,.1],[.2,.8]] with mu = (2/3, 1/3), the second eigenvalue is
  // 0.7, so the worst-start TV after k steps is (2/3) * 0.7^k.
  const Eigen::MatrixXd p = lazy_two_state();
  const Eigen::VectorXd mu = vec2(2.0 / 3.0, 1.0 / 3.0);
  const std::vector<double> curve = sup_start_tv_curve(p, mu, 5);
  for (int k = 1; k <= 4; ++k) {
    CHECK(curve[k] == doctest::Approx((2.0 / 3.0) * std::pow(0.7, k)).epsilon(1e-12));
  }
  CHECK(mixing_time(p, mu) == 3);
}

TEST_CASE("mixing_time throws on a reducible chain instead of truncating") {
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(mixing_time(identity, vec2(0.5, 0.5), 0.25, 2000), MixingCapExceeded);
}

TEST_CASE("ergodicity_check classifies the canonical shapes") {
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
  CHECK(ergodicity_check(uniform).irreducible);
  CHECK(ergodicity_check(uniform).aperiodic);

  Eigen::MatrixXd period2(2, 2);
  period2 << 0, 1, 1, 0;
  CHECK(ergodicity_check(period2).irreducible);
  CHECK_FALSE(ergodicity_check(period2).aperiodic);

  Eigen::MatrixXd reducible(2, 2);
  reducible << 1, 0, 0.5, 0.5;
  CHECK_FALSE(ergodicity_check(reducible).irreducible);
  CHECK(ergodicity_check(reducible).aperiodic);
}

TEST_CASE("ergodicity_check finds periodicity hidden inside one component") {
  // States {0,1} form a 2-cycle; state 2 is an absorbing self-loop.
  Eigen::MatrixXd p(3, 3);
  p << 0, 1, 0, 1, 0, 0, 0, 0, 1;
  const ErgodicityResult res = ergodicity_check(p);
  CHECK_FALSE(res.irreducible);
  CHECK_FALSE(res.aperiodic);

  Eigen::MatrixXd cycle3(3, 3);
  cycle3 << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  CHECK(ergodicity_check(cycle3).irreducible);
  CHECK_FALSE(ergodicity_check(cycle3).aperiodic);

  // Two coupled cycles of coprime lengths through a shared state are
  // aperiodic even without self-loops.
  Eigen::MatrixXd coprime(3, 3);
  coprime << 0, 1, 0, 0.5, 0, 0.5, 1, 0, 0;
  CHECK(ergodicity_check(coprime).irreducible);
  CHECK(ergodicity_check(coprime).aperiodic);
}

TEST_CASE("build_pair_chain on the uniform chain: four pairs of mass 1/4") {
  const InducedChain chain = chain_from_matrix(Eigen::MatrixXd::Constant(2, 2, 0.5));
  const PairChain pc = build_pair_chain(chain);
  CHECK(pc.n_pairs == 4);
  for (int i = 0; i < 4; ++i) CHECK(pc.mu_pair[i] == doctest::Approx(0.25).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) {
    CHECK(pc.transition.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("build_pair_chain keeps only realizable pairs") {
  Eigen::MatrixXd flip(2, 2);
  flip << 0, 1, 1, 0;
  const PairChain pc = build_pair_chain(chain_from_matrix(flip));
  CHECK(pc.n_pairs == 2);
  CHECK(pc.pair_index(0, 0) == -1);
  CHECK(pc.pair_index(1, 1) == -1);
}

TEST_CASE("pair stationary mass follows the product formula") {
  const PairChain pc = build_pair_chain(chain_from_matrix(lazy_two_state()));
  CHECK(pc.mu_pair[pc.pair_index(0, 0)] == doctest::Approx(0.6).epsilon(1e-10));
}

TEST_CASE("pair chains of ergodic chains are ergodic") {
  Rng rng(555);
  for (int trial = 0; trial < 100; ++trial) {
    GeneratedMdp gen = random_ergodic(rng, 6);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.3, false);
    const PairChain pc = build_pair_chain(chain);
    const ErgodicityResult erg = ergodicity_check(pc.transition);
    CHECK(erg.irreducible);
    CHECK(erg.aperiodic);
    // Pair stationarity: mu_pair is the left fixed vector (also cross-checked
    // inside build_pair_chain at 1e-9).
    CHECK((pc.mu_pair.transpose() * pc.transition - pc.mu_pair.transpose())
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
}

TEST_CASE("mixing profile curves are non-increasing and halve at mixing-time multiples") {
  Rng rng(808);
  for (int trial = 0; trial < 30; ++trial) {
    GeneratedMdp gen = random_ergodic(rng, 6);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.3, false);
    const MixingProfile profile = mixing_profile(chain);
    for (const auto* curve : {&profile.tv_curve_state, &profile.tv_curve_pair}) {
      for (size_t k = 1; k < curve->size(); ++k) {
        CHECK((*curve)[k] <= (*curve)[k - 1] + 1e-12);
      }
    }
    for (int l = 1; l <= 4; ++l) {
      CHECK(profile.tv_curve_state[l * profile.t1_mix] <= std::pow(2.0, -l) + 1e-12);
      CHECK(profile.tv_curve_pair[l * profile.t2_mix] <= std::pow(2.0, -l) + 1e-12);
    }
  }
}

TEST_CASE("sum of TV terms is at most twice the mixing time for any start") {
  Rng rng(909);
  for (int trial = 0; trial < 50; ++trial) {
    GeneratedMdp gen = random_ergodic(rng, 6);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.3, false);
    const std::int64_t t1 = mixing_time(chain.p_pi, chain.mu);
    const int n = chain.n_states();
    Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
    init[static_cast<int>(rng.next_below(n))] = 1.0;
    const std::vector<double> curve =
        tv_to_stationary(chain.p_pi, chain.mu, init, 10 * t1 + 50);
    double acc = 0.0;
    for (double v : curve) acc += v;
    CHECK(acc <= 2.0 * double(t1) + 1e-9);
  }
}

TEST_CASE("mixing_time agrees with brute-force powering on small chains") {
  Rng rng(313);
  for (int trial = 0; trial < 30; ++trial) {
    GeneratedMdp gen = random_ergodic(rng, 6);
    const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.3, false);
    Eigen::MatrixXd power = chain.p_pi;
    std::int64_t oracle = -1;
    for (std::int64_t k = 1; k <= 10000 && oracle < 0; ++k) {
      double worst = 0.0;
      for (int i = 0; i < chain.n_states(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < chain.n_states(); ++j) acc += std::abs(power(i, j) - chain.mu[j]);
        worst = std::max(worst, 0.5 * acc);
      }
      if (worst <= 0.25) oracle = k;
      power = power * chain.p_pi;
    }
    CHECK(mixing_time(chain.p_pi, chain.mu) == oracle);
  }
}

TEST_CASE("empirical distribution variance: exact n = 1 case on the uniform chain") {
  // With one stationary sample the empirical law is a point mass, so
  // sum_s (1/2 - 1{s hit})^2 = 1/2 in every trial.
  Mdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.r_max = 1.0;
  mdp.transition = {Eigen::MatrixXd::Constant(2, 2, 0.5)};
  mdp.reward = {Eigen::MatrixXd::Constant(2, 2, 1.0)};
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1, false);
  const EmpiricalDistributionStats stats =
      empirical_distribution_variance(chain, 1, 400, 42);
  CHECK(stats.state_var_sum == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(stats.state_var_se <= 1e-12);

  // Large n satisfies the |S| t1 / n bound (t1 = 1 here).
  const EmpiricalDistributionStats big =
      empirical_distribution_variance(chain, 4096, 400, 43);
  CHECK(big.state_var_sum <= 2.0 / 4096.0 + 3.0 * big.state_var_se);
  CHECK(big.tv_state_mean <= 2.0 * std::sqrt(1.0 / 4096.0) + 3.0 * big.tv_state_se);
}

TEST_CASE("empirical distribution variance: single-state chain has none") {
  Mdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.r_max = 1.0;
  mdp.transition = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  mdp.reward = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  const InducedChain chain = induce_chain(mdp, uniform_policy(mdp), 0.1, false);
  const EmpiricalDistributionStats stats = empirical_distribution_variance(chain, 16, 50, 7);
  CHECK(stats.state_var_sum == 0.0);
  CHECK(stats.tv_state_mean == 0.0);
}

TEST_CASE("empirical distribution variance is schedule-independent") {
  Rng rng(717);
  GeneratedMdp gen = random_ergodic(rng, 4);
  const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.3, false);
  const EmpiricalDistributionStats a = empirical_distribution_variance(chain, 64, 100, 99, 1);
  const EmpiricalDistributionStats b = empirical_distribution_variance(chain, 64, 100, 99, 4);
  CHECK(a.state_var_sum == b.state_var_sum);
  CHECK(a.pair_var_sum == b.pair_var_sum);
  CHECK(a.tv_state_mean == b.tv_state_mean);
  CHECK(a.tv_pair_mean == b.tv_pair_mean);
}
