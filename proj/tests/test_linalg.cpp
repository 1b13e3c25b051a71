#include <doctest.h>

#include <Eigen/SVD>

#include "replay_td/errors.hpp"
#include "replay_td/linalg.hpp"
#include "replay_td/rng.hpp"

using namespace replay_td;

TEST_CASE("inf_norm is the max absolute row sum") {
  Eigen::MatrixXd a(2, 2);
  a << 0.9625, 0.0125, 0.0125, 0.9625;
  CHECK(inf_norm(a) == doctest::Approx(0.975).epsilon(1e-14));

  Eigen::MatrixXd b(2, 3);
  b << 1, -2, 3, -4, 0, 1;
  CHECK(inf_norm(b) == 6.0);
}

TEST_CASE("frobenius_norm") {
  Eigen::MatrixXd a(2, 2);
  a << 3, 0, 0, 4;
  CHECK(frobenius_norm(a) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("spectral_norm of the identity is 1") {
  CHECK(spectral_norm(Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral_norm of the zero matrix is 0") {
  CHECK(spectral_norm(Eigen::MatrixXd::Zero(4, 2)) == 0.0);
}

TEST_CASE("spectral_norm agrees with full SVD on random matrices") {
  Rng rng(12345);
  for (int trial = 0; trial < 60; ++trial) {
    const int rows = 1 + static_cast<int>(rng.next_below(8));
    const int cols = 1 + static_cast<int>(rng.next_below(8));
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = rng.next_real(-2.0, 2.0);
    }
    const double reference = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
    CHECK(spectral_norm(m) == doctest::Approx(reference).epsilon(1e-8));
  }
}

TEST_CASE("weighted_sq_norm diagonal case and dimension mismatch") {
  Eigen::VectorXd x(2);
  x << 1, 0;
  CHECK(weighted_sq_norm(x, 2.0 * Eigen::MatrixXd::Identity(2, 2)) == 2.0);
  CHECK(weighted_sq_norm(x, 2.0 * Eigen::MatrixXd::Identity(2, 2)) >= 0.0);
  CHECK_THROWS_AS(weighted_sq_norm(x, Eigen::MatrixXd::Identity(3, 3)), DimensionMismatch);
}
