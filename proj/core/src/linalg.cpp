#include "replay_td/linalg.hpp"

#include <cmath>
#include <cstdint>

#include "replay_td/errors.hpp"
#include "replay_td/rng.hpp"

namespace replay_td {

double inf_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double frobenius_norm(const Eigen::MatrixXd& m) { return m.norm(); }

namespace {

constexpr int kPowerIterationCap = 10000;
constexpr double kPowerIterationTol = 1e-10;

// One pass of power iteration on m^T m from the given unit start vector.
// Returns true and writes the singular value estimate on convergence.
bool power_iterate(const Eigen::MatrixXd& m, Eigen::VectorXd x, double& sigma) {
  double prev = -1.0;
  for (int it = 0; it < kPowerIterationCap; ++it) {
    const Eigen::VectorXd y = m * x;
    const double sigma_sq = y.squaredNorm();  // Rayleigh quotient of the Gram matrix
    const double est = std::sqrt(sigma_sq);
    if (prev >= 0.0 && std::abs(est - prev) <= kPowerIterationTol * std::max(est, 1e-300)) {
      sigma = est;
      return true;
    }
    prev = est;
    Eigen::VectorXd z = m.transpose() * y;
    const double zn = z.norm();
    if (zn == 0.0) return false;  // start vector annihilated; retry elsewhere
    x = z / zn;
  }
  return false;
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.isZero(0.0)) return 0.0;
  const Eigen::Index n = m.cols();
  Eigen::VectorXd start = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
  double sigma = 0.0;
  if (power_iterate(m, start, sigma)) return sigma;
  Rng rng(0x5eed5eed12345678ull);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = rng.next_double() - 0.5;
  const double sn = start.norm();
  if (sn == 0.0) throw NonConvergence("spectral_norm: degenerate restart vector");
  if (power_iterate(m, start / sn, sigma)) return sigma;
  throw NonConvergence("spectral_norm: power iteration failed to converge");
}

double weighted_sq_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& m) {
  if (m.rows() != x.size() || m.cols() != x.size()) {
    throw DimensionMismatch("weighted_sq_norm: matrix/vector size mismatch");
  }
  return x.dot(m * x);
}

}  // namespace replay_td
