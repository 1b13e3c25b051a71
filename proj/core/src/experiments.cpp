#include "replay_td/experiments.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "replay_td/errors.hpp"
#include "replay_td/linalg.hpp"
#include "replay_td/parallel.hpp"
#include "replay_td/stats.hpp"

namespace replay_td {

int resolve_jobs(int requested) {
  if (const char* env = std::getenv("REPLAY_TD_JOBS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  if (requested >= 1) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

AnalyzeReport analyze(const Mdp& mdp, const Policy& policy, double alpha) {
  const InducedChain chain = induce_chain(mdp, policy, alpha);
  const MixingProfile profile = mixing_profile(chain);
  const PairChain pair = build_pair_chain(chain);
  const ErgodicityResult pair_erg = ergodicity_check(pair.transition);

  AnalyzeReport rep;
  rep.n_states = mdp.n_states;
  rep.n_actions = mdp.n_actions;
  rep.alpha = alpha;
  rep.gamma = mdp.gamma;
  rep.r_max = mdp.r_max;
  rep.mu = chain.mu;
  rep.mu_min = chain.mu_min;
  rep.v_pi = chain.v_pi;
  rep.a_inf_norm = inf_norm(chain.a_matrix);
  rep.a_inf_norm_expected = chain.contraction_inf_norm();
  const Eigen::MatrixXd& m = *chain.m_matrix;
  const Eigen::MatrixXd residual =
      chain.a_matrix.transpose() * m * chain.a_matrix - m +
      Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states);
  rep.lyapunov_residual_fro = frobenius_norm(residual);
  rep.m_spectral_norm = spectral_norm(m);
  rep.m_norm_bound = 1.0 + mdp.n_states / (alpha * (1.0 - mdp.gamma) * chain.mu_min);
  rep.t1_mix = profile.t1_mix;
  rep.t2_mix = profile.t2_mix;
  rep.n_pairs = pair.n_pairs;
  rep.pair_irreducible = pair_erg.irreducible;
  rep.pair_aperiodic = pair_erg.aperiodic;
  return rep;
}

nlohmann::json analyze_report_to_json(const AnalyzeReport& rep) {
  return nlohmann::json{
      {"n_states", rep.n_states},
      {"n_actions", rep.n_actions},
      {"alpha", rep.alpha},
      {"gamma", rep.gamma},
      {"r_max", rep.r_max},
      {"mu", std::vector<double>(rep.mu.begin(), rep.mu.end())},
      {"mu_min", rep.mu_min},
      {"v_pi", std::vector<double>(rep.v_pi.begin(), rep.v_pi.end())},
      {"a_inf_norm", rep.a_inf_norm},
      {"a_inf_norm_expected", rep.a_inf_norm_expected},
      {"lyapunov_residual_fro", rep.lyapunov_residual_fro},
      {"m_spectral_norm", rep.m_spectral_norm},
      {"m_norm_bound", rep.m_norm_bound},
      {"t1_mix", rep.t1_mix},
      {"t2_mix", rep.t2_mix},
      {"n_pairs", rep.n_pairs},
      {"pair_irreducible", rep.pair_irreducible},
      {"pair_aperiodic", rep.pair_aperiodic}};
}

std::string analyze_report_text(const AnalyzeReport& rep) {
  std::ostringstream os;
  os.precision(12);
  os << "states: " << rep.n_states << "  actions: " << rep.n_actions
     << "  gamma: " << rep.gamma << "  alpha: " << rep.alpha << "\n";
  os << "mu: [";
  for (Eigen::Index i = 0; i < rep.mu.size(); ++i) os << (i ? ", " : "") << rep.mu[i];
  os << "]  mu_min: " << rep.mu_min << "\n";
  os << "v_pi: [";
  for (Eigen::Index i = 0; i < rep.v_pi.size(); ++i) os << (i ? ", " : "") << rep.v_pi[i];
  os << "]\n";
  os << "||A||_inf: " << rep.a_inf_norm << "  (1 - a(1-g)mu_min = " << rep.a_inf_norm_expected
     << ")\n";
  os << "lyapunov residual ||A'MA - M + I||_F: " << rep.lyapunov_residual_fro << "\n";
  os << "||M||_2: " << rep.m_spectral_norm << "  (bound " << rep.m_norm_bound << ")\n";
  os << "t1_mix: " << rep.t1_mix << "  t2_mix: " << rep.t2_mix << "  pairs: " << rep.n_pairs
     << "\n";
  os << "pair chain irreducible: " << (rep.pair_irreducible ? "yes" : "no")
     << "  aperiodic: " << (rep.pair_aperiodic ? "yes" : "no") << "\n";
  return os.str();
}

namespace {

const std::vector<std::string> kAllChecks = {"first_moment", "second_moment", "avg_iterate",
                                             "avg_iterate_rms", "final_iterate"};

bool check_enabled(const SweepSpec& spec, const std::string& name) {
  if (spec.checks.empty()) return true;
  for (const auto& c : spec.checks) {
    if (c == name) return true;
  }
  return false;
}

std::string fmt_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

Eigen::VectorXd resolve_initial_v(const nlohmann::json& iv, const Mdp& mdp) {
  if (iv.is_string() && iv.get<std::string>() == "zero") return Eigen::VectorXd();
  if (iv.is_string() && iv.get<std::string>() == "extreme") {
    return Eigen::VectorXd::Constant(mdp.n_states, mdp.value_bound());
  }
  if (iv.is_array()) {
    Eigen::VectorXd v(iv.size());
    for (size_t i = 0; i < iv.size(); ++i) v[i] = iv.at(i).get<double>();
    return v;
  }
  throw InvalidInput("sweep: initial_v must be \"zero\", \"extreme\" or an array");
}

InitialState initial_state_from_json(const nlohmann::json& m) {
  if (m.is_string() && m.get<std::string>() == "stationary") return InitialState::stationary();
  if (m.is_object() && m.contains("fixed")) return InitialState::fixed(m.at("fixed").get<int>());
  if (m.is_object() && m.contains("custom")) {
    Eigen::VectorXd d(m.at("custom").size());
    for (size_t i = 0; i < m.at("custom").size(); ++i) d[i] = m.at("custom").at(i).get<double>();
    return InitialState::custom_dist(std::move(d));
  }
  throw InvalidInput("sweep: unrecognized initial_state_mode");
}

struct Cell {
  double alpha;
  int buffer_n;
  int batch_l;
  std::int64_t horizon_t;
  int alpha_index;
};

}  // namespace

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
  SweepSpec spec;
  try {
    if (j.contains("mdp")) {
      const auto& m = j.at("mdp");
      if (m.is_string()) {
        spec.mdp_file = m.get<std::string>();
      } else if (m.is_object() && m.contains("generator")) {
        spec.generator = generator_spec_from_json(m.at("generator"));
      } else {
        throw InvalidInput("sweep: mdp must be a path or {\"generator\": {...}}");
      }
    } else {
      spec.generator = GeneratorSpec{};
    }
    if (j.contains("policy")) spec.policy_file = j.at("policy").get<std::string>();
    if (j.contains("alpha")) spec.alpha_grid = j.at("alpha").get<std::vector<double>>();
    if (j.contains("N")) spec.n_grid = j.at("N").get<std::vector<int>>();
    if (j.contains("L")) spec.l_grid = j.at("L").get<std::vector<int>>();
    if (j.contains("T")) spec.t_grid = j.at("T").get<std::vector<std::int64_t>>();
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<int>();
    if (j.contains("master_seed")) spec.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("initial_state_mode")) {
      spec.initial_state = initial_state_from_json(j.at("initial_state_mode"));
    }
    if (j.contains("initial_v")) spec.initial_v = j.at("initial_v");
    if (j.contains("checks")) spec.checks = j.at("checks").get<std::vector<std::string>>();
    if (j.contains("out")) spec.out_dir = j.at("out").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("sweep: malformed JSON: ") + e.what());
  }
  return spec;
}

void validate_sweep_spec(const SweepSpec& spec) {
  if (spec.mdp_file.empty() && !spec.generator.has_value()) {
    throw InvalidInput("sweep: no MDP source");
  }
  if (spec.alpha_grid.empty() || spec.n_grid.empty() || spec.l_grid.empty() ||
      spec.t_grid.empty()) {
    throw InvalidInput("sweep: empty parameter grid");
  }
  if (spec.seeds < 1) throw InvalidInput("sweep: seeds must be >= 1");
  for (double a : spec.alpha_grid) {
    if (!(a > 0.0 && a < 1.0)) throw InvalidInput("sweep: alpha values must lie in (0,1)");
  }
  for (int n : spec.n_grid) {
    if (n < 1) throw InvalidInput("sweep: N values must be >= 1");
  }
  for (int l : spec.l_grid) {
    if (l < 1) throw InvalidInput("sweep: L values must be >= 1");
  }
  for (std::int64_t t : spec.t_grid) {
    if (t < 1) throw InvalidInput("sweep: T values must be >= 1");
  }
  for (const auto& c : spec.checks) {
    bool known = false;
    for (const auto& k : kAllChecks) known = known || (k == c);
    if (!known) throw InvalidInput("sweep: unknown check name '" + c + "'");
  }
}

SweepResult run_sweep(const SweepSpec& spec, const std::string& out_dir, int jobs) {
  validate_sweep_spec(spec);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Mdp mdp;
  Policy policy;
  if (!spec.mdp_file.empty()) {
    mdp = load_mdp(spec.mdp_file);
    policy = spec.policy_file.empty() ? uniform_policy(mdp) : load_policy(spec.policy_file);
  } else {
    GeneratedMdp gen = gen_mdp(*spec.generator);
    mdp = std::move(gen.mdp);
    policy = spec.policy_file.empty() ? std::move(gen.policy) : load_policy(spec.policy_file);
  }
  const Eigen::VectorXd initial_v = resolve_initial_v(spec.initial_v, mdp);

  // One chain per alpha (A and M depend on it); the mixing profile does not.
  std::vector<InducedChain> chains;
  chains.reserve(spec.alpha_grid.size());
  for (double a : spec.alpha_grid) chains.push_back(induce_chain(mdp, policy, a));
  const MixingProfile profile = mixing_profile(chains.front());

  std::vector<Cell> cells;
  for (size_t ai = 0; ai < spec.alpha_grid.size(); ++ai) {
    for (int n : spec.n_grid) {
      for (int l : spec.l_grid) {
        for (std::int64_t t : spec.t_grid) {
          cells.push_back(Cell{spec.alpha_grid[ai], n, l, t, static_cast<int>(ai)});
        }
      }
    }
  }

  const int seeds = spec.seeds;
  const std::int64_t total_runs = static_cast<std::int64_t>(cells.size()) * seeds;
  std::vector<RunTrace> traces(total_runs);
  parallel_for(total_runs, jobs, [&](std::int64_t idx) {
    const auto& cell = cells[idx / seeds];
    RunConfig cfg;
    cfg.alpha = cell.alpha;
    cfg.buffer_n = cell.buffer_n;
    cfg.batch_l = cell.batch_l;
    cfg.horizon_t = cell.horizon_t;
    cfg.initial_v = initial_v;
    cfg.initial_state = spec.initial_state;
    cfg.seed = derive_seed(spec.master_seed, static_cast<std::uint64_t>(idx));
    traces[idx] = run(mdp, policy, chains[cell.alpha_index], cfg);
  });

  SweepResult result;
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& cell = cells[ci];
    const RunTrace* cell_traces = &traces[ci * seeds];
    const std::int64_t t_horizon = cell.horizon_t;

    RunConfig cfg;
    cfg.alpha = cell.alpha;
    cfg.buffer_n = cell.buffer_n;
    cfg.batch_l = cell.batch_l;
    cfg.horizon_t = cell.horizon_t;
    cfg.initial_v = initial_v;
    cfg.initial_state = spec.initial_state;
    const BoundInputs inputs = make_bound_inputs(mdp, chains[cell.alpha_index], profile, cfg);

    SweepCellResult cell_result;
    cell_result.alpha = cell.alpha;
    cell_result.buffer_n = cell.buffer_n;
    cell_result.batch_l = cell.batch_l;
    cell_result.horizon_t = cell.horizon_t;

    const CurveStats err_curve = aggregate_curves(
        seeds, t_horizon + 1, [&](size_t r, size_t k) { return cell_traces[r].err_l2_sq[k]; });
    const CurveStats w_curve = aggregate_curves(
        seeds, t_horizon, [&](size_t r, size_t k) { return cell_traces[r].w_norm[k]; });
    const CurveStats w_sq_curve = aggregate_curves(
        seeds, t_horizon, [&](size_t r, size_t k) { return cell_traces[r].w_norm_sq[k]; });

    nlohmann::json cell_meta{{"alpha", cell.alpha}, {"N", cell.buffer_n},
                             {"L", cell.batch_l},   {"T", cell.horizon_t},
                             {"seeds", seeds},      {"master_seed", spec.master_seed}};

    auto worst_margin_check = [&](const std::string& name, const CurveStats& curve,
                                  auto&& bound_fn) {
      double worst_gap = std::numeric_limits<double>::infinity();
      std::int64_t worst_k = 0;
      bool all_pass = true;
      for (std::int64_t k = 0; k < t_horizon; ++k) {
        const double bound = bound_fn(k);
        const double allowance = bound + 3.0 * curve.se[k];
        const double gap = allowance - curve.mean[k];
        if (curve.mean[k] > allowance) all_pass = false;
        if (gap < worst_gap) {
          worst_gap = gap;
          worst_k = k;
        }
      }
      BoundCheck check = make_bound_check(name, bound_fn(worst_k), curve.mean[worst_k],
                                          curve.se[worst_k], {}, cell_meta);
      check.metadata["worst_k"] = worst_k;
      check.passed = all_pass;
      return check;
    };

    if (check_enabled(spec, "first_moment")) {
      cell_result.report.checks.push_back(worst_margin_check(
          "first_moment_noise", w_curve, [&](std::int64_t k) { return first_moment_bound(inputs, k); }));
    }
    if (check_enabled(spec, "second_moment")) {
      cell_result.report.checks.push_back(worst_margin_check(
          "second_moment_noise", w_sq_curve,
          [&](std::int64_t k) { return second_moment_bound(inputs, k); }));
    }

    const bool avg_hypothesis_ok = cell.buffer_n > std::max(profile.t1_mix, profile.t2_mix);
    if (check_enabled(spec, "avg_iterate")) {
      BoundCheck check;
      if (avg_hypothesis_ok) {
        std::vector<double> per_seed(seeds);
        for (int r = 0; r < seeds; ++r) {
          double acc = 0.0;
          for (std::int64_t k = 0; k < t_horizon; ++k) acc += cell_traces[r].err_l2_sq[k];
          per_seed[r] = acc / double(t_horizon);
        }
        const MeanSe ms = mean_and_se(per_seed);
        const AvgIterateBound bound = avg_iterate_bound(inputs);
        check = make_bound_check("avg_iterate_sq", bound.total, ms.mean, ms.se,
                                 {{"transient", bound.transient},
                                  {"e1", bound.e1},
                                  {"e2", bound.e2},
                                  {"e3", bound.e3},
                                  {"e4", bound.e4}},
                                 cell_meta);
      } else {
        check.name = "avg_iterate_sq";
        check.skipped = true;
        check.note = "hypothesis N > max{t1_mix, t2_mix} violated";
        check.metadata = cell_meta;
      }
      cell_result.report.checks.push_back(std::move(check));
    }
    if (check_enabled(spec, "avg_iterate_rms")) {
      BoundCheck check;
      if (avg_hypothesis_ok) {
        std::vector<double> per_seed(seeds);
        for (int r = 0; r < seeds; ++r) per_seed[r] = std::sqrt(cell_traces[r].avg_iterate_err_sq);
        const MeanSe ms = mean_and_se(per_seed);
        check = make_bound_check("avg_iterate_rms", avg_iterate_bound_rms(inputs), ms.mean,
                                 ms.se, {}, cell_meta);
      } else {
        check.name = "avg_iterate_rms";
        check.skipped = true;
        check.note = "hypothesis N > max{t1_mix, t2_mix} violated";
        check.metadata = cell_meta;
      }
      cell_result.report.checks.push_back(std::move(check));
    }
    if (check_enabled(spec, "final_iterate")) {
      if (inputs.stationary_start) {
        for (std::int64_t k : std::vector<std::int64_t>{0, 10, 100, 1000, t_horizon}) {
          if (k > t_horizon) continue;
          std::vector<double> per_seed(seeds);
          for (int r = 0; r < seeds; ++r) per_seed[r] = cell_traces[r].err_l2_sq[k];
          const MeanSe ms = mean_and_se(per_seed);
          const FinalIterateBound bound = final_iterate_bound(inputs, k);
          BoundCheck check = make_bound_check(
              "final_iterate_sq@" + std::to_string(k), bound.total, ms.mean, ms.se,
              {{"transient", bound.transient},
               {"e1f", bound.e1f},
               {"e2f", bound.e2f},
               {"e3f", bound.e3f},
               {"e4f", bound.e4f}},
              cell_meta);
          cell_result.report.checks.push_back(std::move(check));
        }
      } else {
        BoundCheck check;
        check.name = "final_iterate_sq";
        check.skipped = true;
        check.note = "requires stationary warm-up start";
        check.metadata = cell_meta;
        cell_result.report.checks.push_back(std::move(check));
      }
    }

    // Per-cell aggregated curves.
    std::ostringstream cell_name;
    cell_name << "cell_a" << fmt_double(cell.alpha) << "_N" << cell.buffer_n << "_L"
              << cell.batch_l << "_T" << cell.horizon_t;
    const fs::path cell_dir = fs::path(out_dir) / cell_name.str();
    fs::create_directories(cell_dir);
    const fs::path curves_path = cell_dir / "curves.csv";
    {
      std::ofstream file(curves_path);
      if (!file) throw InvalidInput("sweep: cannot write " + curves_path.string());
      file << "k,mean_err_l2_sq,se_err_l2_sq,mean_w_norm,se_w_norm,mean_w_norm_sq,se_w_norm_sq,"
              "first_moment_bound,second_moment_bound\n";
      for (std::int64_t k = 0; k < t_horizon; ++k) {
        file << k << ',' << fmt_double(err_curve.mean[k]) << ',' << fmt_double(err_curve.se[k])
             << ',' << fmt_double(w_curve.mean[k]) << ',' << fmt_double(w_curve.se[k]) << ','
             << fmt_double(w_sq_curve.mean[k]) << ',' << fmt_double(w_sq_curve.se[k]) << ','
             << fmt_double(first_moment_bound(inputs, k)) << ','
             << fmt_double(second_moment_bound(inputs, k)) << '\n';
      }
    }
    cell_result.curves_path = curves_path.string();
    result.all_passed = result.all_passed && cell_result.report.all_passed();
    result.cells.push_back(std::move(cell_result));
  }

  // Summary JSON plus flat CSV over all cells.
  nlohmann::json summary{{"seeds", seeds},
                         {"master_seed", spec.master_seed},
                         {"t1_mix", profile.t1_mix},
                         {"t2_mix", profile.t2_mix},
                         {"cells", nlohmann::json::array()}};
  BoundReport flat;
  for (const auto& cell : result.cells) {
    // Paths are stored relative to out_dir so identical specs produce
    // byte-identical summaries wherever the sweep lands.
    nlohmann::json jc{{"alpha", cell.alpha},
                      {"N", cell.buffer_n},
                      {"L", cell.batch_l},
                      {"T", cell.horizon_t},
                      {"curves", fs::relative(cell.curves_path, out_dir).generic_string()},
                      {"report", bound_report_to_json(cell.report)}};
    summary["cells"].push_back(std::move(jc));
    for (const auto& check : cell.report.checks) flat.checks.push_back(check);
  }
  summary["all_passed"] = result.all_passed;

  const fs::path summary_path = fs::path(out_dir) / "summary.json";
  std::ofstream(summary_path) << summary.dump(2) << "\n";
  result.summary_path = summary_path.string();
  const fs::path report_csv = fs::path(out_dir) / "report.csv";
  write_bound_report_csv(flat, report_csv.string());
  result.report_csv_path = report_csv.string();
  return result;
}

}  // namespace replay_td
