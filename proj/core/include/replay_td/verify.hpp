#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "replay_td/bounds.hpp"
#include "replay_td/generator.hpp"

namespace replay_td {

enum class VerifyLevel { Quick, Full };

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  BoundReport report;  // per-inequality numbers where applicable
};

struct VerificationReport {
  std::vector<CriterionResult> criteria;
  bool all_passed() const;
};

/// The bundled 3-state / 2-action instance every run-based verification
/// criterion uses: gamma = 0.5, r_max = 1, random ergodic with fixed seed,
/// alpha = 0.1, N = 256, L = 32, T = 2000 at full scale.
GeneratorSpec desk_fixture_spec();

/// Runs the full verification battery: boundedness, exact identities,
/// system-matrix and Lyapunov properties, mixing-time lemmas, pair-chain
/// ergodicity, matrix concentration, empirical-distribution variance, noise
/// moment dominance, averaged- and final-iterate bounds, the L = N = 1
/// reduction to standard TD, and the mini-batch/buffer trend checks.
/// Quick level shrinks trial counts and horizons for a fast smoke pass; Full
/// runs each criterion at its stated scale. One line per criterion is written
/// to `progress` as it completes when non-null.
VerificationReport run_verification(VerifyLevel level, int jobs, std::ostream* progress = nullptr);

nlohmann::json verification_report_to_json(const VerificationReport& report);

}  // namespace replay_td
