#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace replay_td {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean and standard error, accumulated in index order.
inline MeanSe mean_and_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> se;
};

/// Pointwise mean/SE across runs of equal-length series.
template <class GetSeries>
CurveStats aggregate_curves(std::size_t n_runs, std::size_t length, GetSeries&& series_at) {
  CurveStats out;
  out.mean.resize(length);
  out.se.resize(length);
  std::vector<double> column(n_runs);
  for (std::size_t k = 0; k < length; ++k) {
    for (std::size_t r = 0; r < n_runs; ++r) column[r] = series_at(r, k);
    const MeanSe ms = mean_and_se(column);
    out.mean[k] = ms.mean;
    out.se[k] = ms.se;
  }
  return out;
}

}  // namespace replay_td
