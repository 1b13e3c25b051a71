#include "replay_td/bounds.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>

#include "replay_td/errors.hpp"

namespace replay_td {

BoundInputs make_bound_inputs(const Mdp& mdp, const InducedChain& chain,
                              const MixingProfile& profile, const RunConfig& cfg) {
  BoundInputs in;
  in.n_states = mdp.n_states;
  in.n_actions = mdp.n_actions;
  in.r_max = mdp.r_max;
  in.gamma = mdp.gamma;
  in.mu_min = chain.mu_min;
  in.alpha = cfg.alpha;
  in.buffer_n = cfg.buffer_n;
  in.batch_l = cfg.batch_l;
  in.horizon_t = cfg.horizon_t;
  in.t1_mix = profile.t1_mix;
  in.t2_mix = profile.t2_mix;
  const Eigen::VectorXd v0 =
      cfg.initial_v.size() == 0 ? Eigen::VectorXd::Zero(mdp.n_states) : cfg.initial_v;
  in.v0_err_sq = (v0 - chain.v_pi).squaredNorm();
  in.stationary_start = cfg.initial_state.mode == InitialStateMode::Stationary;
  if (!in.stationary_start) {
    Eigen::VectorXd init;
    if (cfg.initial_state.mode == InitialStateMode::Fixed) {
      init = Eigen::VectorXd::Zero(mdp.n_states);
      init[cfg.initial_state.fixed_state] = 1.0;
    } else {
      init = cfg.initial_state.custom;
    }
    auto curve = std::make_shared<std::vector<double>>(
        tv_to_stationary(chain.p_pi, chain.mu, init, cfg.horizon_t + 1));
    in.tv_at = [curve](std::int64_t k) {
      if (k < 0) k = 0;
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k), curve->size() - 1);
      return (*curve)[idx];
    };
  }
  return in;
}

double first_moment_bound(const BoundInputs& in, std::int64_t k) {
  const double s = in.n_states;
  const double prefactor = 4.0 * std::sqrt(s) * in.r_max / (1.0 - in.gamma);
  return prefactor * (2.0 * std::sqrt(2.0 * std::log(2.0 * s) / double(in.batch_l)) +
                      3.0 * s * s * in.n_actions * std::sqrt(in.t_mix_max() / double(in.buffer_n)) +
                      16.0 * s * in.tv(k));
}

double second_moment_bound(const BoundInputs& in, std::int64_t k) {
  const double s = in.n_states;
  const double prefactor = 4.0 * s * in.r_max * in.r_max / ((1.0 - in.gamma) * (1.0 - in.gamma));
  return prefactor * (4.0 * s / double(in.batch_l) +
                      4.0 * std::pow(s, 4) * double(in.n_actions) * double(in.n_actions) *
                          in.t_mix_max() / double(in.buffer_n) +
                      8.0 * s * in.tv(k));
}

namespace {

void check_avg_iterate_hypothesis(const BoundInputs& in) {
  if (in.buffer_n <= std::max(in.t1_mix, in.t2_mix)) {
    throw HypothesisViolated("avg_iterate_bound: requires N > max{t1_mix, t2_mix}");
  }
  if (in.horizon_t < 1) throw HypothesisViolated("avg_iterate_bound: requires T >= 1");
}

double concentration_log_term(const BoundInputs& in, AvgIterateConstants constants) {
  const double s = in.n_states;
  if (constants == AvgIterateConstants::ProofVariant) {
    return std::sqrt(std::log(8.0 * s) / double(in.batch_l));
  }
  return std::sqrt(8.0 * std::log(2.0 * s) / double(in.batch_l));
}

}  // namespace

AvgIterateBound avg_iterate_bound(const BoundInputs& in, AvgIterateConstants constants) {
  check_avg_iterate_hypothesis(in);
  const double s = in.n_states;
  const double a = in.n_actions;
  const double one_mg3 = std::pow(1.0 - in.gamma, 3);
  const double c_first = 32.0 * s * s * in.r_max * in.r_max / (one_mg3 * in.mu_min);
  const double c_second = 4.0 * s * s * in.r_max * in.r_max / (one_mg3 * in.mu_min);
  const double t_over = in.t_mix_max() / double(in.buffer_n);
  AvgIterateBound b;
  b.transient = (1.0 / double(in.horizon_t)) * (2.0 * s / (in.alpha * (1.0 - in.gamma))) *
                in.v0_err_sq;
  b.e1 = c_first * concentration_log_term(in, constants);
  b.e2 = c_first * (2.0 * std::pow(s, 1.5) * a * std::sqrt(t_over) +
                    64.0 * double(in.t1_mix) / double(in.horizon_t));
  b.e3 = in.alpha * c_second * (4.0 * s / double(in.batch_l));
  b.e4 = in.alpha * c_second *
         (4.0 * std::pow(s, 4) * a * a * t_over +
          32.0 * double(in.t1_mix) / double(in.horizon_t));
  b.total = b.transient + b.e1 + b.e2 + b.e3 + b.e4;
  return b;
}

double avg_iterate_bound_rms(const BoundInputs& in, AvgIterateConstants constants) {
  const AvgIterateBound b = avg_iterate_bound(in, constants);
  return std::sqrt(b.transient) + std::sqrt(b.e1) + std::sqrt(b.e2) + std::sqrt(b.e3) +
         std::sqrt(b.e4);
}

FinalIterateBound final_iterate_bound(const BoundInputs& in, std::int64_t k) {
  if (!in.stationary_start) {
    throw NonStationaryStart("final_iterate_bound: requires a stationary warm-up start");
  }
  const double s = in.n_states;
  const double a = in.n_actions;
  const double contraction = 1.0 - in.alpha * (1.0 - in.gamma) * in.mu_min;
  const double shared = in.r_max * in.r_max / (std::pow(1.0 - in.gamma, 3) * in.mu_min);
  const double t_over = in.t_mix_max() / double(in.buffer_n);
  FinalIterateBound b;
  b.transient = in.v0_err_sq * s * std::pow(contraction, double(2 * k + 2));
  b.e1f = 2.0 * std::pow(s, 1.5) * shared *
          std::sqrt(8.0 * std::log(2.0 * s) / double(in.batch_l));
  b.e2f = 4.0 * std::pow(s, 3) * a * shared * std::sqrt(t_over);
  b.e3f = in.alpha * 2.0 * std::pow(s, 1.5) * shared * (4.0 * s / double(in.batch_l));
  b.e4f = in.alpha * 4.0 * std::pow(s, 5.5) * a * a * shared * t_over;
  b.total = b.transient + b.e1f + b.e2f + b.e3f + b.e4f;
  return b;
}

double final_iterate_bound_rms(const BoundInputs& in, std::int64_t k) {
  if (!in.stationary_start) {
    throw NonStationaryStart("final_iterate_bound_rms: requires a stationary warm-up start");
  }
  const double s = in.n_states;
  const double a = in.n_actions;
  const double contraction = 1.0 - in.alpha * (1.0 - in.gamma) * in.mu_min;
  const double t_over = in.t_mix_max() / double(in.buffer_n);
  const double prefactor = std::sqrt(2.0) * std::pow(s, 0.75) * in.r_max /
                           (std::pow(1.0 - in.gamma, 1.5) * std::sqrt(in.mu_min));
  const double transient =
      std::sqrt(s) * std::sqrt(in.v0_err_sq) * std::pow(contraction, double(k + 1));
  const double first_moment_floor =
      prefactor * 2.0 *
      std::sqrt(std::sqrt(8.0 * std::log(2.0 * s) / double(in.batch_l)) +
                2.0 * std::pow(s, 1.5) * a * std::sqrt(t_over));
  const double second_moment_floor =
      std::sqrt(in.alpha) * prefactor *
      std::sqrt(4.0 * s / double(in.batch_l) + 2.0 * std::pow(s, 4) * a * a * t_over);
  return transient + first_moment_floor + second_moment_floor;
}

double bernstein_mean_bound(double sigma, double x_max, int d1, int d2, std::int64_t n) {
  if (!(sigma > 0.0) || !(x_max > 0.0) || n < 1) {
    throw InvalidInput("bernstein_mean_bound: requires sigma, x_max > 0 and n >= 1");
  }
  const double logd = std::log(double(d1 + d2));
  return std::sqrt(2.0 * sigma * logd / double(n)) + 2.0 * x_max * logd / (3.0 * double(n));
}

double bernstein_second_moment_bound(double sigma, double x_max, int d1, int d2, std::int64_t n) {
  if (!(sigma > 0.0) || !(x_max > 0.0) || n < 1) {
    throw InvalidInput("bernstein_second_moment_bound: requires sigma, x_max > 0 and n >= 1");
  }
  const double d = double(d1 + d2);
  return 2.0 * sigma * d / double(n) + 8.0 * x_max * x_max * d / (9.0 * double(n) * double(n));
}

DistributionBounds lemma_distribution_bounds(const BoundInputs& in, std::int64_t k) {
  const double s = in.n_states;
  const double a = in.n_actions;
  const double r = in.r_max;
  const double n = in.buffer_n;
  const double tv = in.tv(k);
  const double t1_over = double(in.t1_mix) / n;
  const double t2_over = double(in.t2_mix) / n;
  DistributionBounds b;
  b.d_first = std::sqrt(s) * std::sqrt(t1_over) + 4.0 * tv;
  b.dp_first = s * std::sqrt(t2_over) + 4.0 * std::sqrt(s) * tv;
  b.dr_first = std::pow(s, 2.5) * a * r * std::sqrt(t2_over) + 2.0 * std::sqrt(s) * r * tv;
  b.d_second = s * t1_over + 8.0 * tv;
  b.dp_second = s * s * t2_over + 2.0 * s * tv;
  b.dr_second = std::pow(s, 5) * a * a * r * r * t2_over + 2.0 * s * r * r * tv;
  return b;
}

BoundCheck make_bound_check(std::string name, double theoretical, double empirical,
                            double std_error, std::map<std::string, double> terms,
                            nlohmann::json metadata) {
  BoundCheck check;
  check.name = std::move(name);
  check.theoretical = theoretical;
  check.empirical = empirical;
  check.std_error = std_error;
  check.terms = std::move(terms);
  check.metadata = std::move(metadata);
  check.passed = empirical <= theoretical + 3.0 * std_error;
  return check;
}

bool BoundReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.skipped && !c.passed) return false;
  }
  return true;
}

nlohmann::json bound_report_to_json(const BoundReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json jc{{"name", c.name},
                      {"theoretical", c.theoretical},
                      {"empirical", c.empirical},
                      {"std_error", c.std_error},
                      {"verdict", c.skipped ? "skipped" : (c.passed ? "pass" : "fail")}};
    if (!c.terms.empty()) jc["terms"] = c.terms;
    if (!c.note.empty()) jc["note"] = c.note;
    if (!c.metadata.empty()) jc["metadata"] = c.metadata;
    checks.push_back(std::move(jc));
  }
  return nlohmann::json{{"checks", std::move(checks)}, {"all_passed", report.all_passed()}};
}

namespace {

std::string csv_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_bound_report_csv(const BoundReport& report, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw InvalidInput("write_bound_report_csv: cannot write " + path);
  file << "name,theoretical,empirical,std_error,verdict\n";
  for (const auto& c : report.checks) {
    file << c.name << ',' << csv_double(c.theoretical) << ',' << csv_double(c.empirical) << ','
         << csv_double(c.std_error) << ','
         << (c.skipped ? "skipped" : (c.passed ? "pass" : "fail")) << '\n';
  }
}

void write_bound_report_json(const BoundReport& report, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw InvalidInput("write_bound_report_json: cannot write " + path);
  file << bound_report_to_json(report).dump(2) << "\n";
}

}  // namespace replay_td
