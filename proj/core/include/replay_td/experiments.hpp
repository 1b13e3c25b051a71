#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_td/bounds.hpp"
#include "replay_td/generator.hpp"
#include "replay_td/td_replay.hpp"

namespace replay_td {

/// Exact per-instance analytics: stationary distribution, value function,
/// system-matrix norms, Lyapunov residual, mixing times, pair-chain
/// ergodicity.
struct AnalyzeReport {
  int n_states = 0;
  int n_actions = 0;
  double alpha = 0.0;
  double gamma = 0.0;
  double r_max = 0.0;
  Eigen::VectorXd mu;
  double mu_min = 0.0;
  Eigen::VectorXd v_pi;
  double a_inf_norm = 0.0;
  double a_inf_norm_expected = 0.0;  // 1 - alpha (1-gamma) mu_min
  double lyapunov_residual_fro = 0.0;
  double m_spectral_norm = 0.0;
  double m_norm_bound = 0.0;  // 1 + S / (alpha (1-gamma) mu_min)
  std::int64_t t1_mix = 0;
  std::int64_t t2_mix = 0;
  int n_pairs = 0;
  bool pair_irreducible = false;
  bool pair_aperiodic = false;
};

AnalyzeReport analyze(const Mdp& mdp, const Policy& policy, double alpha);
nlohmann::json analyze_report_to_json(const AnalyzeReport& report);
std::string analyze_report_text(const AnalyzeReport& report);

/// Grid experiment over (alpha, N, L, T) with multi-seed aggregation.
/// The MDP comes from a file or from the generator; an empty policy file
/// means the uniform policy (file mode) or the generated one.
struct SweepSpec {
  std::string mdp_file;
  std::string policy_file;
  std::optional<GeneratorSpec> generator;
  std::vector<double> alpha_grid;
  std::vector<int> n_grid;
  std::vector<int> l_grid;
  std::vector<std::int64_t> t_grid;
  int seeds = 30;
  std::uint64_t master_seed = 0;
  InitialState initial_state;
  nlohmann::json initial_v = "zero";  // "zero" | "extreme" | explicit array
  std::vector<std::string> checks;    // empty = all applicable
  std::string out_dir;                // default output directory; CLI --out overrides
};

SweepSpec sweep_spec_from_json(const nlohmann::json& j);
/// Throws InvalidInput on empty grids, seeds < 1, or invalid cell parameters,
/// before any run starts.
void validate_sweep_spec(const SweepSpec& spec);

struct SweepCellResult {
  double alpha = 0.0;
  int buffer_n = 0;
  int batch_l = 0;
  std::int64_t horizon_t = 0;
  BoundReport report;
  std::string curves_path;
};

struct SweepResult {
  bool all_passed = true;
  std::vector<SweepCellResult> cells;
  std::string summary_path;
  std::string report_csv_path;
};

/// Runs every (cell, seed) pair, in parallel across a worker pool, gathering
/// results in deterministic index order: identical specs produce
/// byte-identical outputs regardless of the parallelism degree. Writes
/// per-cell curve CSVs plus summary.json and report.csv under out_dir.
/// Cells whose theorem hypotheses fail are reported as skipped, not failed.
SweepResult run_sweep(const SweepSpec& spec, const std::string& out_dir, int jobs);

}  // namespace replay_td
