#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/induced_chain.hpp"
#include "replay_td/td_replay.hpp"

namespace replay_td {

/// Everything the closed-form bound evaluators consume. tv_at maps a learner
/// step k to the exact total variation distance between the stationary
/// distribution and the distribution of the warm-up chain state from k steps
/// earlier; a null tv_at means a stationary start (identically zero).
struct BoundInputs {
  int n_states = 0;
  int n_actions = 0;
  double r_max = 0.0;
  double gamma = 0.0;
  double mu_min = 0.0;
  double alpha = 0.0;
  std::int64_t buffer_n = 0;
  std::int64_t batch_l = 0;
  std::int64_t horizon_t = 0;
  std::int64_t t1_mix = 0;
  std::int64_t t2_mix = 0;
  double v0_err_sq = 0.0;
  bool stationary_start = true;
  std::function<double(std::int64_t)> tv_at;

  double tv(std::int64_t k) const { return tv_at ? tv_at(k) : 0.0; }
  double t_mix_max() const { return static_cast<double>(std::max(t1_mix, t2_mix)); }
};

/// Assembles BoundInputs for a run: sizes from the MDP, mixing times from the
/// profile, v0 error from the configured initial vector, and the exact tv
/// curve for non-stationary starts (never estimated from samples).
BoundInputs make_bound_inputs(const Mdp& mdp, const InducedChain& chain,
                              const MixingProfile& profile, const RunConfig& cfg);

/// Expected noise norm bound at step k:
/// (4 sqrt(S) R / (1-g)) * (2 sqrt(2 log(2S)/L) + 3 S^2 A sqrt(t/N) + 16 S tv(k)).
/// Monotone non-increasing in L and N.
double first_moment_bound(const BoundInputs& in, std::int64_t k);

/// Expected squared noise norm bound at step k:
/// (4 S R^2 / (1-g)^2) * (4S/L + 4 S^4 A^2 t/N + 8 S tv(k)).
double second_moment_bound(const BoundInputs& in, std::int64_t k);

/// The statement constants use sqrt(8 log(2S)/L) in the concentration term;
/// the final display of the proof carries sqrt(log(8S)/L) instead. The
/// statement is authoritative; the variant is kept for sensitivity reporting.
enum class AvgIterateConstants { Statement, ProofVariant };

struct AvgIterateBound {
  double total = 0.0;
  double transient = 0.0;  // (1/T) (2S / (alpha (1-g))) ||V_0 - V||_2^2
  double e1 = 0.0;         // concentration error, first moment
  double e2 = 0.0;         // Markovian noise, first moment
  double e3 = 0.0;         // concentration error, second moment
  double e4 = 0.0;         // Markovian noise, second moment
};

/// Bound on (1/T) sum_k E||V_k - V||_2^2. Requires N > max(t1, t2)
/// (HypothesisViolated otherwise) and T >= 1.
AvgIterateBound avg_iterate_bound(const BoundInputs& in,
                                  AvgIterateConstants constants = AvgIterateConstants::Statement);

/// Bound on E||(1/T) sum_k V_k - V||_2: square root of the transient plus the
/// square roots of the four item-1 terms.
double avg_iterate_bound_rms(const BoundInputs& in,
                             AvgIterateConstants constants = AvgIterateConstants::Statement);

struct FinalIterateBound {
  double total = 0.0;
  double transient = 0.0;  // ||V_0 - V||_2^2 S (1 - a(1-g)mu_min)^(2k+2)
  double e1f = 0.0;
  double e2f = 0.0;
  double e3f = 0.0;
  double e4f = 0.0;
};

/// Bound on E||V_k - V||_2^2 under a stationary warm-up start
/// (NonStationaryStart otherwise).
FinalIterateBound final_iterate_bound(const BoundInputs& in, std::int64_t k);

/// Bound on E||V_k - V||_2 (stationary start): geometric transient with rate
/// (1 - a(1-g)mu_min)^(k+1) plus square-rooted noise-floor terms.
double final_iterate_bound_rms(const BoundInputs& in, std::int64_t k);

/// Matrix Bernstein expectation bound for n i.i.d. samples of a d1 x d2
/// matrix with ||X_k||_2 <= x_max and ||E[X_k X_k^T]||_2 <= sigma:
/// sqrt(2 sigma log(d1+d2)/n) + 2 x_max log(d1+d2) / (3n). Natural logs.
double bernstein_mean_bound(double sigma, double x_max, int d1, int d2, std::int64_t n);

/// Second-moment analogue: 2 sigma (d1+d2)/n + 8 x_max^2 (d1+d2) / (9 n^2).
double bernstein_second_moment_bound(double sigma, double x_max, int d1, int d2, std::int64_t n);

/// Right-hand sides for the empirical-matrix deviations at step k, first
/// moments and squared-norm analogues, with the tv(k) additions.
struct DistributionBounds {
  double d_first = 0.0;    // E||D - D_B||_2
  double dp_first = 0.0;   // E||D P - D_B P_B||_2
  double dr_first = 0.0;   // E||D R - D_B R_B||_2
  double d_second = 0.0;   // squared-norm analogues
  double dp_second = 0.0;
  double dr_second = 0.0;
};

DistributionBounds lemma_distribution_bounds(const BoundInputs& in, std::int64_t k);

/// One evaluated inequality: the closed-form value with its component terms,
/// the Monte-Carlo estimate with its standard error, and the verdict
/// empirical <= theoretical + 3 * std_error. The verdict is always
/// recomputable from the stored numbers.
struct BoundCheck {
  std::string name;
  double theoretical = 0.0;
  std::map<std::string, double> terms;
  double empirical = 0.0;
  double std_error = 0.0;
  bool passed = false;
  bool skipped = false;
  std::string note;
  nlohmann::json metadata;
};

BoundCheck make_bound_check(std::string name, double theoretical, double empirical,
                            double std_error, std::map<std::string, double> terms = {},
                            nlohmann::json metadata = nlohmann::json::object());

struct BoundReport {
  std::vector<BoundCheck> checks;

  bool all_passed() const;
};

nlohmann::json bound_report_to_json(const BoundReport& report);
/// Flat CSV, one row per check: name,theoretical,empirical,std_error,verdict.
void write_bound_report_csv(const BoundReport& report, const std::string& path);
void write_bound_report_json(const BoundReport& report, const std::string& path);

}  // namespace replay_td
