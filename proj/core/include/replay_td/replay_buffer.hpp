#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <vector>

#include <json.hpp>

#include "replay_td/rng.hpp"

namespace replay_td {

/// One observed transition (s, r, s'). Actions are marginalized out; neither
/// the update nor any evaluated quantity consumes them.
struct Transition {
  int s = 0;
  double r = 0.0;
  int s_next = 0;
};

/// Empirical quantities of a buffer snapshot: state distribution mu_s, pair
/// distribution mu_ss, per-state transition frequencies p_b and mean rewards
/// r_b. Rows of p_b for unvisited states are all-zero, as are unvisited
/// entries of r_b. Counts are integers converted once, so these are exact up
/// to one floating division.
struct BufferEmpirics {
  Eigen::VectorXd mu_s;
  Eigen::MatrixXd mu_ss;
  Eigen::MatrixXd p_b;
  Eigen::VectorXd r_b;

  Eigen::MatrixXd d_b() const { return Eigen::MatrixXd(mu_s.asDiagonal()); }
};

/// FIFO experience memory of fixed capacity with uniform with-replacement
/// mini-batch sampling. Owned by exactly one run; no concurrent mutation.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int n_states);

  /// Appends t, evicting the oldest entry when full.
  void push(const Transition& t);

  /// l independent uniform draws with replacement, in draw order.
  std::vector<Transition> sample_minibatch(int l, Rng& rng) const;

  BufferEmpirics empirics() const;

  int capacity() const { return capacity_; }
  std::int64_t size() const { return static_cast<std::int64_t>(entries_.size()); }
  std::int64_t insert_count() const { return insert_count_; }
  int n_states() const { return n_states_; }
  const std::deque<Transition>& entries() const { return entries_; }

 private:
  int capacity_;
  int n_states_;
  std::deque<Transition> entries_;
  std::int64_t insert_count_ = 0;
};

/// JSON array of [s, r, s'] triples, oldest first.
nlohmann::json buffer_to_json(const ReplayBuffer& buffer);
ReplayBuffer buffer_from_json(const nlohmann::json& j, int capacity, int n_states);

}  // namespace replay_td
