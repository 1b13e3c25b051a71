#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(REPLAY_TD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "replay_td_cli_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("gen-mdp then analyze round trips with exit code 0") {
  const fs::path dir = workdir();
  CHECK(run_cli("gen-mdp --states 3 --actions 2 --seed 4 --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "mdp.json"));
  CHECK(fs::exists(dir / "policy.json"));
  CHECK(run_cli("analyze --mdp " + (dir / "mdp.json").string() + " --policy " +
                (dir / "policy.json").string() + " --json") == 0);
}

TEST_CASE("analyze surfaces non-ergodic input as exit code 2") {
  const fs::path dir = workdir();
  const fs::path bad = dir / "reducible.json";
  std::ofstream(bad) << nlohmann::json{
      {"n_states", 2},
      {"n_actions", 1},
      {"gamma", 0.5},
      {"r_max", 1.0},
      {"transition", {{{1.0, 0.0}}, {{0.0, 1.0}}}},
      {"reward", {{{0.0, 0.0}}, {{0.0, 0.0}}}}}.dump();
  CHECK(run_cli("analyze --mdp " + bad.string()) == 2);
}

TEST_CASE("malformed input files exit with code 2") {
  const fs::path dir = workdir();
  const fs::path bad = dir / "broken.json";
  std::ofstream(bad) << "{ not json";
  CHECK(run_cli("analyze --mdp " + bad.string()) == 2);
  CHECK(run_cli("run --mdp " + bad.string()) == 2);
}

TEST_CASE("run writes trace files") {
  const fs::path dir = workdir();
  REQUIRE(run_cli("gen-mdp --states 2 --actions 1 --seed 9 --out " + dir.string()) == 0);
  const fs::path out = dir / "run_out";
  CHECK(run_cli("run --mdp " + (dir / "mdp.json").string() + " --seed 5 --out " +
                out.string()) == 0);
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(fs::exists(out / "trace.json"));
}

TEST_CASE("sweep rejects an empty grid with exit code 2") {
  const fs::path dir = workdir();
  const fs::path spec = dir / "empty_sweep.json";
  std::ofstream(spec) << nlohmann::json{{"alpha", nlohmann::json::array()},
                                        {"N", {4}},
                                        {"L", {2}},
                                        {"T", {10}},
                                        {"seeds", 2}}
                             .dump();
  CHECK(run_cli("sweep --config " + spec.string() + " --out " + (dir / "sw").string()) == 2);
}

TEST_CASE("verify quick passes and writes its report when asked") {
  const fs::path dir = workdir() / "verify_out";
  fs::remove_all(dir);
  CHECK(run_cli("verify --level quick --jobs 1 --out " + dir.string()) == 0);
  REQUIRE(fs::exists(dir / "verification.json"));
  nlohmann::json report;
  std::ifstream(dir / "verification.json") >> report;
  CHECK(report["all_passed"] == true);
  CHECK(report["criteria"].size() == 12);
}
