// replay-td: tabular TD-learning with an experience replay buffer, plus the
// exact-analysis and bound-verification toolkit around it.
//
// Subcommands: analyze, run, sweep, verify, gen-mdp.
// Exit codes: 0 ok, 1 check failure, 2 input/hypothesis error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "replay_td/errors.hpp"
#include "replay_td/experiments.hpp"
#include "replay_td/parallel.hpp"
#include "replay_td/generator.hpp"
#include "replay_td/td_replay.hpp"
#include "replay_td/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitInputError = 2;

struct CommonArgs {
  std::string mdp_path;
  std::string policy_path;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool json_output = false;
  int jobs = 0;
};

replay_td::Policy load_policy_or_uniform(const CommonArgs& args, const replay_td::Mdp& mdp) {
  if (args.policy_path.empty()) return replay_td::uniform_policy(mdp);
  return replay_td::load_policy(args.policy_path);
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw replay_td::InvalidInput("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw replay_td::InvalidInput("parse error in " + path + ": " + e.what());
  }
  return j;
}

int cmd_analyze(const CommonArgs& args, double alpha) {
  const replay_td::Mdp mdp = replay_td::load_mdp(args.mdp_path);
  const replay_td::Policy policy = load_policy_or_uniform(args, mdp);
  const replay_td::AnalyzeReport report = replay_td::analyze(mdp, policy, alpha);
  if (args.json_output) {
    std::cout << replay_td::analyze_report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << replay_td::analyze_report_text(report);
  }
  return kExitOk;
}

int cmd_run(const CommonArgs& args) {
  const replay_td::Mdp mdp = replay_td::load_mdp(args.mdp_path);
  const replay_td::Policy policy = load_policy_or_uniform(args, mdp);
  replay_td::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = replay_td::run_config_from_json(load_json_file(args.config_path), mdp);
  }
  if (args.seed_set) cfg.seed = args.seed;
  const replay_td::InducedChain chain = replay_td::induce_chain(mdp, policy, cfg.alpha);
  const replay_td::RunTrace trace = replay_td::run(mdp, policy, chain, cfg);

  const std::string out = args.out_dir.empty() ? "." : args.out_dir;
  std::filesystem::create_directories(out);
  const std::string csv = (std::filesystem::path(out) / "trace.csv").string();
  const std::string sidecar = (std::filesystem::path(out) / "trace.json").string();
  replay_td::write_trace_csv(trace, csv);
  replay_td::write_trace_sidecar(trace, sidecar);
  if (args.json_output) {
    std::cout << replay_td::trace_sidecar_json(trace).dump(2) << "\n";
  } else {
    std::cout << "wrote " << csv << " and " << sidecar << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
  replay_td::SweepSpec spec = replay_td::sweep_spec_from_json(load_json_file(args.config_path));
  if (!args.mdp_path.empty()) {
    spec.mdp_file = args.mdp_path;
    spec.generator.reset();
  }
  if (!args.policy_path.empty()) spec.policy_file = args.policy_path;
  if (args.seed_set) spec.master_seed = args.seed;
  std::string out = args.out_dir.empty() ? spec.out_dir : args.out_dir;
  if (out.empty()) out = "sweep_out";
  const replay_td::SweepResult result =
      replay_td::run_sweep(spec, out, replay_td::resolve_jobs(args.jobs));
  if (args.json_output) {
    std::cout << nlohmann::json{{"all_passed", result.all_passed},
                                {"summary", result.summary_path},
                                {"report_csv", result.report_csv_path}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "sweep " << (result.all_passed ? "passed" : "FAILED") << "; summary at "
              << result.summary_path << "\n";
  }
  return result.all_passed ? kExitOk : kExitCheckFailure;
}

int cmd_verify(const CommonArgs& args, const std::string& level) {
  const replay_td::VerifyLevel lvl =
      level == "full" ? replay_td::VerifyLevel::Full : replay_td::VerifyLevel::Quick;
  const replay_td::VerificationReport report =
      replay_td::run_verification(lvl, replay_td::resolve_jobs(args.jobs), &std::cout);
  if (!args.out_dir.empty()) {
    std::filesystem::create_directories(args.out_dir);
    const std::string path =
        (std::filesystem::path(args.out_dir) / "verification.json").string();
    std::ofstream(path) << replay_td::verification_report_to_json(report).dump(2) << "\n";
    std::cout << "report written to " << path << "\n";
  }
  if (args.json_output) {
    std::cout << replay_td::verification_report_to_json(report).dump(2) << "\n";
  }
  return report.all_passed() ? kExitOk : kExitCheckFailure;
}

int cmd_gen_mdp(const CommonArgs& args, const replay_td::GeneratorSpec& spec) {
  const replay_td::GeneratedMdp gen = replay_td::gen_mdp(spec);
  const std::string out = args.out_dir.empty() ? "." : args.out_dir;
  std::filesystem::create_directories(out);
  const std::string mdp_path = (std::filesystem::path(out) / "mdp.json").string();
  const std::string policy_path = (std::filesystem::path(out) / "policy.json").string();
  replay_td::save_mdp(gen.mdp, mdp_path);
  replay_td::save_policy(gen.policy, policy_path);
  if (args.json_output) {
    std::cout << nlohmann::json{{"mdp", mdp_path}, {"policy", policy_path}}.dump(2) << "\n";
  } else {
    std::cout << "wrote " << mdp_path << " and " << policy_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TD-learning with a replay buffer: simulation, exact chain analysis, "
               "and finite-time bound verification"};
  app.require_subcommand(1);

  CommonArgs args;
  replay_td::GeneratorSpec gen_spec;
  double alpha = 0.1;
  std::string level = "quick";

  auto add_common = [&](CLI::App* sub, bool with_seed = true) {
    sub->add_option("--out", args.out_dir, "Output directory");
    sub->add_flag("--json", args.json_output, "Machine-readable JSON output");
    sub->add_option("--jobs", args.jobs,
                    "Worker threads (REPLAY_TD_JOBS overrides; 0 = hardware)");
    if (with_seed) {
      sub->add_option("--seed", args.seed, "64-bit master seed")
          ->each([&](const std::string&) { args.seed_set = true; });
    }
  };

  CLI::App* analyze = app.add_subcommand("analyze", "Exact chain/bound analytics for an MDP");
  analyze->add_option("--mdp", args.mdp_path, "MDP JSON file")->required();
  analyze->add_option("--policy", args.policy_path, "Policy JSON file (default uniform)");
  analyze->add_option("--alpha", alpha, "Step size in (0,1)");
  add_common(analyze, false);

  CLI::App* run = app.add_subcommand("run", "One seeded learner run with trace output");
  run->add_option("--mdp", args.mdp_path, "MDP JSON file")->required();
  run->add_option("--policy", args.policy_path, "Policy JSON file (default uniform)");
  run->add_option("--config", args.config_path, "Run config JSON");
  add_common(run);

  CLI::App* sweep = app.add_subcommand("sweep", "Grid experiment with bound dominance checks");
  sweep->add_option("--config", args.config_path, "Sweep spec JSON")->required();
  sweep->add_option("--mdp", args.mdp_path, "Override MDP file");
  sweep->add_option("--policy", args.policy_path, "Override policy file");
  add_common(sweep);

  CLI::App* verify = app.add_subcommand("verify", "Run the verification battery");
  verify->add_option("--level", level, "quick|full")
      ->check(CLI::IsMember({"quick", "full"}));
  add_common(verify, false);

  CLI::App* gen = app.add_subcommand("gen-mdp", "Generate a random ergodic MDP + policy");
  gen->add_option("--states", gen_spec.n_states, "Number of states");
  gen->add_option("--actions", gen_spec.n_actions, "Number of actions");
  gen->add_option("--gamma", gen_spec.gamma, "Discount factor in (0,1)");
  gen->add_option("--rmax", gen_spec.r_max, "Reward bound");
  gen->add_option("--sparsity", gen_spec.sparsity, "Fraction of zeroed transitions");
  gen->add_option("--self-loop-min", gen_spec.self_loop_min, "Minimum self-loop probability");
  gen->add_option("--seed", gen_spec.seed, "Generator seed");
  add_common(gen, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) return cmd_analyze(args, alpha);
    if (app.got_subcommand(run)) return cmd_run(args);
    if (app.got_subcommand(sweep)) return cmd_sweep(args);
    if (app.got_subcommand(verify)) return cmd_verify(args, level);
    if (app.got_subcommand(gen)) return cmd_gen_mdp(args, gen_spec);
  } catch (const replay_td::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const replay_td::ChainNotErgodic& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const replay_td::HypothesisViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const replay_td::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return kExitInputError;
}
