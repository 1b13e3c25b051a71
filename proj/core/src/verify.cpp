#include "replay_td/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/errors.hpp"
#include "replay_td/experiments.hpp"
#include "replay_td/linalg.hpp"
#include "replay_td/parallel.hpp"
#include "replay_td/rng.hpp"
#include "replay_td/stats.hpp"
#include "replay_td/td_replay.hpp"

namespace replay_td {

bool VerificationReport::all_passed() const {
  for (const auto& c : criteria) {
    if (!c.passed) return false;
  }
  return true;
}

GeneratorSpec desk_fixture_spec() {
  GeneratorSpec spec;
  spec.n_states = 3;
  spec.n_actions = 2;
  spec.gamma = 0.5;
  spec.r_max = 1.0;
  spec.sparsity = 0.3;
  spec.self_loop_min = 0.05;
  spec.seed = 20240809;
  return spec;
}

namespace {

constexpr std::uint64_t kBatteryMasterSeed = 0x7D0F2026ull;

struct Scales {
  int bound_mdps;
  int bound_seeds;
  std::int64_t bound_t;
  int ident_mdps;
  std::int64_t ident_steps;
  int lyap_instances;
  int mixing_chains;
  int pair_chains;
  int conc_trials;
  std::vector<std::int64_t> conc_ns;
  int varemp_trials;
  std::vector<std::int64_t> varemp_ns;
  int fixture_seeds;
  std::int64_t fixture_t;
  std::int64_t reduction_t;
  int reduction_seeds;
};

Scales scales_for(VerifyLevel level) {
  if (level == VerifyLevel::Full) {
    return Scales{100, 30, 500, 20, 200,  100, 100, 100, 10000, {4, 16, 64, 256},
                  2000, {64, 256, 1024}, 30, 2000, 1000, 5};
  }
  return Scales{20, 5, 200, 5, 100, 25, 25, 25, 2000, {4, 64}, 400, {64, 256}, 8, 500, 200, 2};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

// Random test instance for the structural criteria. gamma stays below 0.9 so
// the value bound keeps floating-point headroom, and draws with a vanishing
// alpha*(1-gamma)*mu_min are redone to keep the Lyapunov series at desk
// scale.
struct RandomInstance {
  GeneratedMdp gen;
  double alpha;
};

RandomInstance random_instance(Rng& rng, int max_states, double alpha_lo, double alpha_hi) {
  for (;;) {
    GeneratorSpec spec;
    spec.n_states = 1 + static_cast<int>(rng.next_below(max_states));
    spec.n_actions = 1 + static_cast<int>(rng.next_below(3));
    spec.gamma = rng.next_real(0.3, 0.8);
    spec.r_max = 1.0;
    spec.sparsity = rng.next_real(0.0, 0.5);
    spec.self_loop_min = rng.next_real(0.05, 0.2);
    spec.seed = rng.next_u64();
    RandomInstance inst{gen_mdp(spec), rng.next_real(alpha_lo, alpha_hi)};
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(spec.n_states, spec.n_states);
    for (int s = 0; s < spec.n_states; ++s) {
      for (int a = 0; a < spec.n_actions; ++a) {
        p_pi.row(s) += inst.gen.policy.probs(s, a) * inst.gen.mdp.transition[a].row(s);
      }
    }
    const Eigen::VectorXd mu = stationary_distribution(p_pi);
    if (inst.alpha * (1.0 - spec.gamma) * mu.minCoeff() >= 1e-3) return inst;
  }
}

struct Fixture {
  Mdp mdp;
  Policy policy;
  InducedChain chain;
  MixingProfile profile;
};

Fixture make_desk_fixture() {
  GeneratedMdp gen = gen_mdp(desk_fixture_spec());
  Fixture f{std::move(gen.mdp), std::move(gen.policy), {}, {}};
  f.chain = induce_chain(f.mdp, f.policy, 0.1);
  f.profile = mixing_profile(f.chain);
  if (256 <= std::max(f.profile.t1_mix, f.profile.t2_mix)) {
    throw Error("verification fixture does not satisfy N > max{t1,t2}; fixture seed needs changing");
  }
  return f;
}

std::vector<RunTrace> run_many(const Fixture& f, RunConfig base, int seeds,
                               std::uint64_t salt, int jobs) {
  std::vector<RunTrace> traces(seeds);
  const std::uint64_t stream_root = derive_seed(kBatteryMasterSeed, salt);
  parallel_for(seeds, jobs, [&](std::int64_t i) {
    RunConfig cfg = base;
    cfg.seed = derive_seed(stream_root, static_cast<std::uint64_t>(i));
    traces[i] = run(f.mdp, f.policy, f.chain, cfg);
  });
  return traces;
}

// ---- criterion 1: iterate boundedness --------------------------------------

CriterionResult criterion_boundedness(const Scales& sc, int jobs) {
  CriterionResult res{1, "boundedness", false, "", {}};
  Rng rng(derive_seed(kBatteryMasterSeed, 101));
  struct Case {
    Mdp mdp;
    Policy policy;
    InducedChain chain;
    double bound;
  };
  std::vector<Case> cases;
  cases.reserve(sc.bound_mdps);
  std::vector<double> alphas;
  for (int i = 0; i < sc.bound_mdps; ++i) {
    RandomInstance inst = random_instance(rng, 6, 0.001, 0.999);
    InducedChain chain =
        induce_chain(inst.gen.mdp, inst.gen.policy, 0.5, /*build_lyapunov=*/false);
    const double bound = inst.gen.mdp.value_bound();
    cases.push_back(Case{std::move(inst.gen.mdp), std::move(inst.gen.policy),
                         std::move(chain), bound});
    for (int s = 0; s < sc.bound_seeds; ++s) alphas.push_back(rng.next_real(0.001, 0.999));
  }
  const std::int64_t total = static_cast<std::int64_t>(sc.bound_mdps) * sc.bound_seeds;
  std::vector<double> overshoot(total);
  parallel_for(total, jobs, [&](std::int64_t idx) {
    const Case& c = cases[idx / sc.bound_seeds];
    RunConfig cfg;
    cfg.alpha = alphas[idx];
    cfg.buffer_n = 8;
    cfg.batch_l = 4;
    cfg.horizon_t = sc.bound_t;
    cfg.initial_v = Eigen::VectorXd::Constant(c.mdp.n_states, c.bound);  // extreme start
    cfg.initial_state = InitialState::stationary();
    cfg.seed = derive_seed(kBatteryMasterSeed, 10100 + static_cast<std::uint64_t>(idx));
    const RunTrace trace = run(c.mdp, c.policy, c.chain, cfg);
    overshoot[idx] = trace.max_v_inf - c.bound;
  });
  const double worst = *std::max_element(overshoot.begin(), overshoot.end());
  res.passed = worst <= 1e-12;
  res.detail = std::to_string(total) + " runs; worst ||V_k||_inf overshoot " + fmt(worst) +
               " (tol 1e-12)";
  return res;
}

// ---- criterion 2: exact identities ------------------------------------------

CriterionResult criterion_identities(const Scales& sc, int jobs) {
  CriterionResult res{2, "exact-identities", false, "", {}};
  std::vector<double> worst_update(sc.ident_mdps, 0.0);
  std::vector<double> worst_decomp(sc.ident_mdps, 0.0);
  std::vector<double> worst_dbpb(sc.ident_mdps, 0.0);
  std::vector<double> worst_delta_pi(sc.ident_mdps, 0.0);
  parallel_for(sc.ident_mdps, jobs, [&](std::int64_t i) {
    Rng rng(derive_seed(kBatteryMasterSeed, 201 + static_cast<std::uint64_t>(i)));
    RandomInstance inst = random_instance(rng, 5, 0.05, 0.95);
    const InducedChain chain =
        induce_chain(inst.gen.mdp, inst.gen.policy, inst.alpha, /*build_lyapunov=*/false);
    worst_delta_pi[i] = delta_stationary(chain, chain.v_pi).cwiseAbs().maxCoeff();

    RunConfig cfg;
    cfg.alpha = inst.alpha;
    cfg.buffer_n = 32;
    cfg.batch_l = 8;
    cfg.horizon_t = sc.ident_steps;
    cfg.seed = rng.next_u64();
    Learner learner(inst.gen.mdp, inst.gen.policy, chain, cfg);
    for (std::int64_t k = 0; k < sc.ident_steps; ++k) {
      const Eigen::VectorXd v_before = learner.value();
      const StepRecord rec = learner.step();
      const Eigen::VectorXd lhs = learner.value() - chain.v_pi;
      const Eigen::VectorXd rhs =
          chain.a_matrix * (v_before - chain.v_pi) + cfg.alpha * rec.w;
      worst_update[i] = std::max(worst_update[i], (lhs - rhs).cwiseAbs().maxCoeff());
      worst_decomp[i] = std::max(
          worst_decomp[i], (rec.w - (rec.decomp_a - rec.decomp_b)).cwiseAbs().maxCoeff());
      const BufferEmpirics emp = learner.buffer().empirics();
      const Eigen::MatrixXd dbpb = emp.d_b() * emp.p_b;
      worst_dbpb[i] = std::max(worst_dbpb[i], (dbpb - emp.mu_ss).cwiseAbs().maxCoeff());
    }
  });
  const double wu = *std::max_element(worst_update.begin(), worst_update.end());
  const double wd = *std::max_element(worst_decomp.begin(), worst_decomp.end());
  const double wb = *std::max_element(worst_dbpb.begin(), worst_dbpb.end());
  const double wp = *std::max_element(worst_delta_pi.begin(), worst_delta_pi.end());
  res.passed = wu <= 1e-12 && wd <= 1e-12 && wb <= 1e-14 && wp <= 1e-10;
  res.detail = "update residual " + fmt(wu) + " (1e-12), decomposition " + fmt(wd) +
               " (1e-12), D_B P_B " + fmt(wb) + " (1e-14), delta_pi(v_pi) " + fmt(wp) +
               " (1e-10)";
  return res;
}

// ---- criterion 3: system matrix and Lyapunov properties ---------------------

CriterionResult criterion_lyapunov(const Scales& sc, int jobs) {
  CriterionResult res{3, "matrix-a-lyapunov", false, "", {}};
  std::vector<double> norm_gap(sc.lyap_instances);
  std::vector<double> residual(sc.lyap_instances);
  std::vector<double> m_margin(sc.lyap_instances);  // bound - ||M||_2, must stay >= 0
  parallel_for(sc.lyap_instances, jobs, [&](std::int64_t i) {
    Rng rng(derive_seed(kBatteryMasterSeed, 301 + static_cast<std::uint64_t>(i)));
    RandomInstance inst = random_instance(rng, 6, 0.1, 0.9);
    const InducedChain chain = induce_chain(inst.gen.mdp, inst.gen.policy, inst.alpha);
    const int n = chain.n_states();
    norm_gap[i] = std::abs(inf_norm(chain.a_matrix) - chain.contraction_inf_norm());
    const Eigen::MatrixXd& m = *chain.m_matrix;
    residual[i] = frobenius_norm(chain.a_matrix.transpose() * m * chain.a_matrix - m +
                                 Eigen::MatrixXd::Identity(n, n));
    const double bound =
        1.0 + n / (inst.alpha * (1.0 - inst.gen.mdp.gamma) * chain.mu_min);
    m_margin[i] = bound - spectral_norm(m);
  });
  const double wg = *std::max_element(norm_gap.begin(), norm_gap.end());
  const double wr = *std::max_element(residual.begin(), residual.end());
  const double wm = *std::min_element(m_margin.begin(), m_margin.end());
  res.passed = wg <= 1e-12 && wr <= 1e-8 && wm >= 0.0;
  res.detail = std::to_string(sc.lyap_instances) + " instances; |‖A‖-expected| " + fmt(wg) +
               " (1e-12), lyapunov residual " + fmt(wr) + " (1e-8), ‖M‖ margin " + fmt(wm);
  return res;
}

// ---- criterion 4: mixing-time lemmas ----------------------------------------

std::int64_t mixing_time_oracle(const Eigen::MatrixXd& p, const Eigen::VectorXd& mu,
                                double epsilon) {
  Eigen::MatrixXd power = p;
  for (std::int64_t k = 1; k <= 100000; ++k) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) acc += std::abs(power(i, j) - mu[j]);
      worst = std::max(worst, 0.5 * acc);
    }
    if (worst <= epsilon) return k;
    power = power * p;
  }
  throw MixingCapExceeded("mixing oracle exceeded cap");
}

CriterionResult criterion_mixing(const Scales& sc, int jobs) {
  CriterionResult res{4, "mixing-lemmas", false, "", {}};
  std::vector<int> failures(sc.mixing_chains, 0);
  std::vector<double> worst_sum_margin(sc.mixing_chains,
                                       std::numeric_limits<double>::infinity());
  parallel_for(sc.mixing_chains, jobs, [&](std::int64_t i) {
    Rng rng(derive_seed(kBatteryMasterSeed, 401 + static_cast<std::uint64_t>(i)));
    RandomInstance inst = random_instance(rng, 6, 0.1, 0.9);
    const InducedChain chain =
        induce_chain(inst.gen.mdp, inst.gen.policy, inst.alpha, /*build_lyapunov=*/false);
    const MixingProfile profile = mixing_profile(chain);
    int bad = 0;

    // Non-increasing curves with halving at multiples of the mixing time.
    auto check_curve = [&](const std::vector<double>& curve, std::int64_t t_mix) {
      for (size_t k = 1; k < curve.size(); ++k) {
        if (curve[k] > curve[k - 1] + 1e-12) ++bad;
      }
      for (int l = 1; l <= 4; ++l) {
        const size_t idx = static_cast<size_t>(l) * t_mix;
        if (idx < curve.size() && curve[idx] > std::pow(2.0, -l) + 1e-12) ++bad;
      }
    };
    check_curve(profile.tv_curve_state, profile.t1_mix);
    check_curve(profile.tv_curve_pair, profile.t2_mix);

    // Sum of exact TV terms stays below 2 t1 for arbitrary initial laws.
    const int n = chain.n_states();
    const std::int64_t t_sum = 10 * profile.t1_mix + 50;
    std::vector<Eigen::VectorXd> initials;
    for (int s = 0; s < n; ++s) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[s] = 1.0;
      initials.push_back(std::move(e));
    }
    {
      Eigen::VectorXd d(n);
      for (int s = 0; s < n; ++s) d[s] = rng.next_double() + 1e-3;
      initials.push_back(d / d.sum());
    }
    for (const auto& init : initials) {
      const std::vector<double> curve = tv_to_stationary(chain.p_pi, chain.mu, init, t_sum);
      double acc = 0.0;
      for (double v : curve) acc += v;
      const double margin = 2.0 * double(profile.t1_mix) - acc;
      worst_sum_margin[i] = std::min(worst_sum_margin[i], margin);
      if (acc > 2.0 * double(profile.t1_mix) + 1e-9) ++bad;
    }

    // Agreement with the brute-force oracle.
    if (mixing_time_oracle(chain.p_pi, chain.mu, 0.25) != profile.t1_mix) ++bad;

    failures[i] = bad;
  });
  int total_bad = 0;
  for (int b : failures) total_bad += b;
  const double wm = *std::min_element(worst_sum_margin.begin(), worst_sum_margin.end());
  res.passed = total_bad == 0;
  res.detail = std::to_string(sc.mixing_chains) + " chains; " + std::to_string(total_bad) +
               " violations; tightest sum-of-TV margin " + fmt(wm);
  return res;
}

// ---- criterion 5: pair-chain ergodicity -------------------------------------

CriterionResult criterion_pair_ergodicity(const Scales& sc, int jobs) {
  CriterionResult res{5, "pair-chain-ergodicity", false, "", {}};
  std::vector<int> ok(sc.pair_chains, 0);
  parallel_for(sc.pair_chains, jobs, [&](std::int64_t i) {
    Rng rng(derive_seed(kBatteryMasterSeed, 501 + static_cast<std::uint64_t>(i)));
    RandomInstance inst = random_instance(rng, 6, 0.1, 0.9);
    const InducedChain chain =
        induce_chain(inst.gen.mdp, inst.gen.policy, inst.alpha, /*build_lyapunov=*/false);
    const PairChain pc = build_pair_chain(chain);
    ok[i] = ergodicity_check(pc.transition).ergodic() ? 1 : 0;
  });
  int passed = 0;
  for (int v : ok) passed += v;

  Eigen::MatrixXd period2(2, 2);
  period2 << 0, 1, 1, 0;
  const ErgodicityResult e1 = ergodicity_check(period2);
  Eigen::MatrixXd reducible(2, 2);
  reducible << 1, 0, 0.5, 0.5;
  const ErgodicityResult e2 = ergodicity_check(reducible);
  const bool counterexamples_ok =
      e1.irreducible && !e1.aperiodic && !e2.irreducible && e2.aperiodic;

  res.passed = passed == sc.pair_chains && counterexamples_ok;
  res.detail = std::to_string(passed) + "/" + std::to_string(sc.pair_chains) +
               " ergodic pair chains; counterexamples " +
               (counterexamples_ok ? "rejected" : "NOT rejected");
  return res;
}

// ---- criterion 6: matrix concentration --------------------------------------

CriterionResult criterion_concentration(const Scales& sc, int jobs) {
  CriterionResult res{6, "matrix-concentration", false, "", {}};
  // Fixed 4-state buffer with composition 4/3/2/1.
  const std::vector<int> buffer_states = {0, 0, 0, 0, 1, 1, 1, 2, 2, 3};
  const int d = 4;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (int s : buffer_states) mu[s] += 1.0;
  mu /= double(buffer_states.size());
  const Eigen::MatrixXd x_expected = mu.asDiagonal();
  const double sigma = mu.maxCoeff();  // ||E[X X^T]||_2 for X = e_s e_s^T

  bool all_pass = true;
  std::ostringstream detail;
  for (std::int64_t n : sc.conc_ns) {
    std::vector<double> dev(sc.conc_trials), dev_sq(sc.conc_trials);
    parallel_for(sc.conc_trials, jobs, [&](std::int64_t t) {
      Rng rng(derive_seed(kBatteryMasterSeed, 60000 + 100 * static_cast<std::uint64_t>(n) +
                                                  static_cast<std::uint64_t>(t)));
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
      for (std::int64_t i = 0; i < n; ++i) {
        counts[buffer_states[rng.next_below(buffer_states.size())]] += 1.0;
      }
      const Eigen::MatrixXd mean = (counts / double(n)).asDiagonal();
      const double norm = spectral_norm(mean - x_expected);
      dev[t] = norm;
      dev_sq[t] = norm * norm;
    });
    const MeanSe first = mean_and_se(dev);
    const MeanSe second = mean_and_se(dev_sq);
    const double mb = bernstein_mean_bound(sigma, 1.0, d, d, n);
    const double sb = bernstein_second_moment_bound(sigma, 1.0, d, d, n);
    BoundCheck c1 = make_bound_check("bernstein_mean@n=" + std::to_string(n), mb, first.mean,
                                     first.se, {}, {{"trials", sc.conc_trials}});
    BoundCheck c2 = make_bound_check("bernstein_second_moment@n=" + std::to_string(n), sb,
                                     second.mean, second.se, {}, {{"trials", sc.conc_trials}});
    all_pass = all_pass && c1.passed && c2.passed;
    res.report.checks.push_back(std::move(c1));
    res.report.checks.push_back(std::move(c2));
  }
  res.passed = all_pass;
  res.detail = std::to_string(sc.conc_ns.size() * 2) + " dominance checks over " +
               std::to_string(sc.conc_trials) + " trials each";
  return res;
}

// ---- criterion 7: empirical-distribution variance ---------------------------

CriterionResult criterion_var_emp(const Fixture& f, const Scales& sc, int jobs) {
  CriterionResult res{7, "empirical-distribution-variance", false, "", {}};
  const PairChain pc = build_pair_chain(f.chain);
  const double s_states = f.chain.n_states();
  const double s_pairs = pc.n_pairs;
  bool all_pass = true;
  for (std::int64_t n : sc.varemp_ns) {
    const EmpiricalDistributionStats stats = empirical_distribution_variance(
        f.chain, n, sc.varemp_trials, derive_seed(kBatteryMasterSeed, 700 + n), jobs);
    const double t1 = double(f.profile.t1_mix);
    const double t2 = double(f.profile.t2_mix);
    BoundCheck cs = make_bound_check("state_var_sum@n=" + std::to_string(n),
                                     s_states * t1 / double(n), stats.state_var_sum,
                                     stats.state_var_se);
    BoundCheck ct = make_bound_check("state_tv_mean@n=" + std::to_string(n),
                                     s_states * std::sqrt(t1 / double(n)), stats.tv_state_mean,
                                     stats.tv_state_se);
    BoundCheck ps = make_bound_check("pair_var_sum@n=" + std::to_string(n),
                                     s_pairs * t2 / double(n), stats.pair_var_sum,
                                     stats.pair_var_se);
    BoundCheck pt = make_bound_check("pair_tv_mean@n=" + std::to_string(n),
                                     s_pairs * std::sqrt(t2 / double(n)), stats.tv_pair_mean,
                                     stats.tv_pair_se);
    all_pass = all_pass && cs.passed && ct.passed && ps.passed && pt.passed;
    res.report.checks.push_back(std::move(cs));
    res.report.checks.push_back(std::move(ct));
    res.report.checks.push_back(std::move(ps));
    res.report.checks.push_back(std::move(pt));
  }
  res.passed = all_pass;
  res.detail = std::to_string(res.report.checks.size()) + " variance/TV dominance checks (" +
               std::to_string(sc.varemp_trials) + " trials per n)";
  return res;
}

// ---- criteria 8-9: noise moments and averaged iterate -----------------------

RunConfig fixture_config(const Scales& sc) {
  RunConfig cfg;
  cfg.alpha = 0.1;
  cfg.buffer_n = 256;
  cfg.batch_l = 32;
  cfg.horizon_t = sc.fixture_t;
  cfg.initial_state = InitialState::stationary();
  return cfg;
}

CriterionResult criterion_noise_moments(const Fixture& f, const std::vector<RunTrace>& traces,
                                        const Scales& sc) {
  CriterionResult res{8, "noise-moment-dominance", false, "", {}};
  const RunConfig cfg = fixture_config(sc);
  const BoundInputs inputs = make_bound_inputs(f.mdp, f.chain, f.profile, cfg);
  const size_t seeds = traces.size();
  const std::int64_t t_horizon = cfg.horizon_t;

  const CurveStats w_curve = aggregate_curves(
      seeds, t_horizon, [&](size_t r, size_t k) { return traces[r].w_norm[k]; });
  const CurveStats w_sq_curve = aggregate_curves(
      seeds, t_horizon, [&](size_t r, size_t k) { return traces[r].w_norm_sq[k]; });

  auto check_curve = [&](const std::string& name, const CurveStats& curve, auto&& bound_fn) {
    bool pass = true;
    double worst_gap = std::numeric_limits<double>::infinity();
    std::int64_t worst_k = 0;
    for (std::int64_t k = 0; k < t_horizon; ++k) {
      const double allowance = bound_fn(k) + 3.0 * curve.se[k];
      if (curve.mean[k] > allowance) pass = false;
      if (allowance - curve.mean[k] < worst_gap) {
        worst_gap = allowance - curve.mean[k];
        worst_k = k;
      }
    }
    BoundCheck check = make_bound_check(name, bound_fn(worst_k), curve.mean[worst_k],
                                        curve.se[worst_k]);
    check.passed = pass;
    check.metadata["worst_k"] = worst_k;
    return check;
  };
  BoundCheck c1 = check_curve("first_moment_noise", w_curve,
                              [&](std::int64_t k) { return first_moment_bound(inputs, k); });
  BoundCheck c2 = check_curve("second_moment_noise", w_sq_curve,
                              [&](std::int64_t k) { return second_moment_bound(inputs, k); });
  res.passed = c1.passed && c2.passed;
  res.detail = "mean ||w|| " + fmt(c1.empirical) + " vs bound " + fmt(c1.theoretical) +
               "; mean ||w||^2 " + fmt(c2.empirical) + " vs bound " + fmt(c2.theoretical) +
               " (worst k)";
  res.report.checks.push_back(std::move(c1));
  res.report.checks.push_back(std::move(c2));
  return res;
}

CriterionResult criterion_avg_iterate(const Fixture& f, const std::vector<RunTrace>& traces,
                                      const Scales& sc) {
  CriterionResult res{9, "averaged-iterate-bound", false, "", {}};
  const RunConfig cfg = fixture_config(sc);
  const BoundInputs inputs = make_bound_inputs(f.mdp, f.chain, f.profile, cfg);
  const int seeds = static_cast<int>(traces.size());
  const std::int64_t t_horizon = cfg.horizon_t;

  std::vector<double> per_seed_sq(seeds), per_seed_rms(seeds);
  for (int r = 0; r < seeds; ++r) {
    double acc = 0.0;
    for (std::int64_t k = 0; k < t_horizon; ++k) acc += traces[r].err_l2_sq[k];
    per_seed_sq[r] = acc / double(t_horizon);
    per_seed_rms[r] = std::sqrt(traces[r].avg_iterate_err_sq);
  }
  const MeanSe sq = mean_and_se(per_seed_sq);
  const MeanSe rms = mean_and_se(per_seed_rms);
  const AvgIterateBound bound = avg_iterate_bound(inputs);
  BoundCheck c1 = make_bound_check("avg_iterate_sq", bound.total, sq.mean, sq.se,
                                   {{"transient", bound.transient},
                                    {"e1", bound.e1},
                                    {"e2", bound.e2},
                                    {"e3", bound.e3},
                                    {"e4", bound.e4}});
  c1.note = "statement constants; proof-variant e1 = " +
            fmt(avg_iterate_bound(inputs, AvgIterateConstants::ProofVariant).e1);
  BoundCheck c2 = make_bound_check("avg_iterate_rms", avg_iterate_bound_rms(inputs), rms.mean,
                                   rms.se);
  res.passed = c1.passed && c2.passed;
  res.detail = "avg err^2 " + fmt(sq.mean) + " <= " + fmt(bound.total) + "; rms " +
               fmt(rms.mean) + " <= " + fmt(c2.theoretical);
  res.report.checks.push_back(std::move(c1));
  res.report.checks.push_back(std::move(c2));
  return res;
}

// ---- criterion 10: final iterate --------------------------------------------

CriterionResult criterion_final_iterate(const Fixture& f, const Scales& sc, int jobs) {
  CriterionResult res{10, "final-iterate-bound", false, "", {}};
  RunConfig cfg = fixture_config(sc);
  cfg.initial_v = Eigen::VectorXd::Constant(f.mdp.n_states, f.mdp.value_bound());
  const std::vector<RunTrace> traces = run_many(f, cfg, sc.fixture_seeds, 1001, jobs);
  const BoundInputs inputs = make_bound_inputs(f.mdp, f.chain, f.profile, cfg);
  const std::int64_t t_horizon = cfg.horizon_t;
  const int seeds = static_cast<int>(traces.size());

  bool all_pass = true;
  std::vector<std::int64_t> checkpoints;
  for (std::int64_t k : {std::int64_t(0), std::int64_t(10), std::int64_t(100),
                         std::int64_t(1000), t_horizon}) {
    if (k <= t_horizon &&
        (checkpoints.empty() || checkpoints.back() != k)) {
      checkpoints.push_back(k);
    }
  }
  for (std::int64_t k : checkpoints) {
    std::vector<double> per_seed(seeds);
    for (int r = 0; r < seeds; ++r) per_seed[r] = traces[r].err_l2_sq[k];
    const MeanSe ms = mean_and_se(per_seed);
    const FinalIterateBound bound = final_iterate_bound(inputs, k);
    BoundCheck check = make_bound_check("final_iterate_sq@" + std::to_string(k), bound.total,
                                        ms.mean, ms.se,
                                        {{"transient", bound.transient},
                                         {"e1f", bound.e1f},
                                         {"e2f", bound.e2f},
                                         {"e3f", bound.e3f},
                                         {"e4f", bound.e4f}});
    all_pass = all_pass && check.passed;
    res.report.checks.push_back(std::move(check));
  }

  // Transient decay: the seed-averaged squared error must shrink at least as
  // fast per step as (1 - a(1-g)mu_min)^2, within 10% relative tolerance,
  // measured before the noise floor takes over.
  std::vector<double> mean_curve(t_horizon + 1, 0.0);
  for (int r = 0; r < seeds; ++r) {
    for (std::int64_t k = 0; k <= t_horizon; ++k) mean_curve[k] += traces[r].err_l2_sq[k];
  }
  for (double& v : mean_curve) v /= double(seeds);
  double floor_est = 0.0;
  const std::int64_t tail_start = t_horizon - std::max<std::int64_t>(1, t_horizon / 10);
  for (std::int64_t k = tail_start; k <= t_horizon; ++k) floor_est += mean_curve[k];
  floor_est /= double(t_horizon - tail_start + 1);
  std::int64_t k_end = 0;
  for (std::int64_t k = 0; k <= t_horizon; ++k) {
    if (mean_curve[k] >= 8.0 * floor_est) k_end = k;
  }
  const double contraction_sq =
      std::pow(1.0 - cfg.alpha * (1.0 - f.mdp.gamma) * f.chain.mu_min, 2);
  BoundCheck rate_check;
  rate_check.name = "transient_decay_rate";
  rate_check.theoretical = contraction_sq * 1.10;
  if (k_end >= 30) {
    const double measured = std::pow(mean_curve[k_end] / mean_curve[0], 1.0 / double(k_end));
    rate_check.empirical = measured;
    rate_check.passed = measured <= contraction_sq * 1.10;
    rate_check.metadata = {{"k_end", k_end}, {"floor_est", floor_est}};
  } else {
    rate_check.skipped = true;
    rate_check.note = "transient shorter than 30 steps; rate not identifiable";
  }
  all_pass = all_pass && (rate_check.skipped || rate_check.passed);
  res.report.checks.push_back(rate_check);

  res.passed = all_pass;
  res.detail = std::to_string(checkpoints.size()) + " checkpoints; decay rate " +
               (rate_check.skipped ? std::string("n/a") : fmt(rate_check.empirical)) +
               " vs (1-a(1-g)mu_min)^2 = " + fmt(contraction_sq) + " (+10%)";
  return res;
}

// ---- criterion 11: reduction to standard TD ----------------------------------

CriterionResult criterion_reduction(const Fixture& f, const Scales& sc, int jobs) {
  CriterionResult res{11, "standard-td-reduction", false, "", {}};
  std::vector<int> identical(sc.reduction_seeds, 0);
  parallel_for(sc.reduction_seeds, jobs, [&](std::int64_t i) {
    RunConfig cfg;
    cfg.alpha = 0.1;
    cfg.buffer_n = 1;
    cfg.batch_l = 1;
    cfg.horizon_t = sc.reduction_t;
    cfg.initial_state = InitialState::stationary();
    cfg.seed = derive_seed(kBatteryMasterSeed, 1100 + static_cast<std::uint64_t>(i));
    Learner learner(f.mdp, f.policy, f.chain, cfg);
    const std::vector<Eigen::VectorXd> reference = run_standard_td(f.mdp, f.policy, f.chain, cfg);
    bool same = learner.value() == reference[0];
    for (std::int64_t k = 0; k < cfg.horizon_t && same; ++k) {
      learner.step();
      // Bit-identical, not approximately equal.
      same = (learner.value().array() == reference[k + 1].array()).all();
    }
    identical[i] = same ? 1 : 0;
  });
  int ok = 0;
  for (int v : identical) ok += v;
  res.passed = ok == sc.reduction_seeds;
  res.detail = std::to_string(ok) + "/" + std::to_string(sc.reduction_seeds) +
               " shared-stream runs bit-identical over " + std::to_string(sc.reduction_t) +
               " steps";
  return res;
}

// ---- criterion 12: trend in L and N ------------------------------------------

CriterionResult criterion_trend(const Fixture& f, const std::vector<RunTrace>& base_traces,
                                const Scales& sc, int jobs) {
  CriterionResult res{12, "minibatch-buffer-trend", false, "", {}};
  struct CellSpec {
    int buffer_n;
    int batch_l;
    std::uint64_t salt;
  };
  const std::vector<CellSpec> cells = {
      {256, 1, 1201}, {256, 8, 1202}, {256, 64, 1203}, {16, 32, 1204}};
  // The averaged-iterate error (1/T) sum_k ||V_k - V||^2, per seed.
  auto per_seed_avg_err = [](const std::vector<RunTrace>& traces) {
    std::vector<double> out(traces.size());
    for (size_t r = 0; r < traces.size(); ++r) {
      double acc = 0.0;
      const size_t steps = traces[r].w_norm.size();
      for (size_t k = 0; k < steps; ++k) acc += traces[r].err_l2_sq[k];
      out[r] = acc / double(steps);
    }
    return out;
  };
  std::vector<MeanSe> cell_stats(cells.size());
  for (size_t c = 0; c < cells.size(); ++c) {
    RunConfig cfg = fixture_config(sc);
    cfg.buffer_n = cells[c].buffer_n;
    cfg.batch_l = cells[c].batch_l;
    const std::vector<RunTrace> traces = run_many(f, cfg, sc.fixture_seeds, cells[c].salt, jobs);
    cell_stats[c] = mean_and_se(per_seed_avg_err(traces));
  }
  // (N=256, L=32) reused from the criterion-8 runs.
  const MeanSe base_stat = mean_and_se(per_seed_avg_err(base_traces));

  auto trend_check = [&](const std::string& name, const MeanSe& lo, const MeanSe& hi) {
    // hi has the larger L or N and must not exceed lo beyond 2 SE of the gap.
    const double allowance = 2.0 * std::sqrt(lo.se * lo.se + hi.se * hi.se);
    BoundCheck check;
    check.name = name;
    check.theoretical = lo.mean + allowance;
    check.empirical = hi.mean;
    check.std_error = std::sqrt(lo.se * lo.se + hi.se * hi.se);
    check.passed = hi.mean <= lo.mean + allowance;
    return check;
  };
  BoundCheck l18 = trend_check("avg_err_nonincreasing_L1_to_L8", cell_stats[0], cell_stats[1]);
  BoundCheck l864 = trend_check("avg_err_nonincreasing_L8_to_L64", cell_stats[1], cell_stats[2]);
  BoundCheck n16256 = trend_check("avg_err_nonincreasing_N16_to_N256", cell_stats[3], base_stat);
  res.passed = l18.passed && l864.passed && n16256.passed;
  res.detail = "avg-iterate err: L1 " + fmt(cell_stats[0].mean) + " >= L8 " +
               fmt(cell_stats[1].mean) + " >= L64 " + fmt(cell_stats[2].mean) + "; N16 " +
               fmt(cell_stats[3].mean) + " >= N256 " + fmt(base_stat.mean) + " (2 SE slack)";
  res.report.checks.push_back(std::move(l18));
  res.report.checks.push_back(std::move(l864));
  res.report.checks.push_back(std::move(n16256));
  return res;
}

void emit(std::ostream* progress, const CriterionResult& r) {
  if (!progress) return;
  (*progress) << "[" << (r.index < 10 ? " " : "") << r.index << "/12] "
              << (r.passed ? "PASS" : "FAIL") << "  " << r.name << " — " << r.detail << "\n";
  progress->flush();
}

}  // namespace

VerificationReport run_verification(VerifyLevel level, int jobs, std::ostream* progress) {
  const Scales sc = scales_for(level);
  VerificationReport report;
  auto add = [&](CriterionResult r) {
    emit(progress, r);
    report.criteria.push_back(std::move(r));
  };

  add(criterion_boundedness(sc, jobs));
  add(criterion_identities(sc, jobs));
  add(criterion_lyapunov(sc, jobs));
  add(criterion_mixing(sc, jobs));
  add(criterion_pair_ergodicity(sc, jobs));
  add(criterion_concentration(sc, jobs));

  const Fixture fixture = make_desk_fixture();
  add(criterion_var_emp(fixture, sc, jobs));

  const std::vector<RunTrace> fixture_traces =
      run_many(fixture, fixture_config(sc), sc.fixture_seeds, 801, jobs);
  add(criterion_noise_moments(fixture, fixture_traces, sc));
  add(criterion_avg_iterate(fixture, fixture_traces, sc));
  add(criterion_final_iterate(fixture, sc, jobs));
  add(criterion_reduction(fixture, sc, jobs));
  add(criterion_trend(fixture, fixture_traces, sc, jobs));
  return report;
}

nlohmann::json verification_report_to_json(const VerificationReport& report) {
  nlohmann::json criteria = nlohmann::json::array();
  for (const auto& c : report.criteria) {
    nlohmann::json jc{{"index", c.index},
                      {"name", c.name},
                      {"passed", c.passed},
                      {"detail", c.detail}};
    if (!c.report.checks.empty()) jc["checks"] = bound_report_to_json(c.report)["checks"];
    criteria.push_back(std::move(jc));
  }
  return nlohmann::json{{"criteria", std::move(criteria)}, {"all_passed", report.all_passed()}};
}

}  // namespace replay_td
