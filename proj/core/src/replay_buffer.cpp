#include "replay_td/replay_buffer.hpp"

#include <cmath>

#include "replay_td/errors.hpp"

namespace replay_td {

ReplayBuffer::ReplayBuffer(int capacity, int n_states)
    : capacity_(capacity), n_states_(n_states) {
  if (capacity < 1) throw InvalidInput("ReplayBuffer: capacity must be >= 1");
  if (n_states < 1) throw InvalidInput("ReplayBuffer: n_states must be >= 1");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.s < 0 || t.s >= n_states_ || t.s_next < 0 || t.s_next >= n_states_) {
    throw InvalidInput("ReplayBuffer: state index out of range");
  }
  if (!std::isfinite(t.r)) throw InvalidInput("ReplayBuffer: reward not finite");
  if (static_cast<int>(entries_.size()) == capacity_) entries_.pop_front();
  entries_.push_back(t);
  ++insert_count_;
}

std::vector<Transition> ReplayBuffer::sample_minibatch(int l, Rng& rng) const {
  if (entries_.empty()) throw EmptyBuffer("sample_minibatch: buffer is empty");
  std::vector<Transition> batch;
  batch.reserve(l);
  const std::uint64_t n = entries_.size();
  for (int i = 0; i < l; ++i) {
    batch.push_back(entries_[rng.next_below(n)]);
  }
  return batch;
}

BufferEmpirics ReplayBuffer::empirics() const {
  if (entries_.empty()) throw EmptyBuffer("empirics: buffer is empty");
  const int n = n_states_;
  // Integer counts and plain reward sums recomputed from scratch: empirics
  // stay a pure function of the stored multiset, with no incremental drift.
  std::vector<std::int64_t> count_s(n, 0);
  std::vector<std::int64_t> count_ss(static_cast<size_t>(n) * n, 0);
  std::vector<double> sum_r(n, 0.0);
  for (const Transition& t : entries_) {
    ++count_s[t.s];
    ++count_ss[static_cast<size_t>(t.s) * n + t.s_next];
    sum_r[t.s] += t.r;
  }
  const double total = static_cast<double>(entries_.size());
  BufferEmpirics emp;
  emp.mu_s = Eigen::VectorXd::Zero(n);
  emp.mu_ss = Eigen::MatrixXd::Zero(n, n);
  emp.p_b = Eigen::MatrixXd::Zero(n, n);
  emp.r_b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    emp.mu_s[i] = static_cast<double>(count_s[i]) / total;
    if (count_s[i] >= 1) emp.r_b[i] = sum_r[i] / static_cast<double>(count_s[i]);
    for (int j = 0; j < n; ++j) {
      const std::int64_t c = count_ss[static_cast<size_t>(i) * n + j];
      emp.mu_ss(i, j) = static_cast<double>(c) / total;
      if (count_s[i] >= 1) emp.p_b(i, j) = static_cast<double>(c) / static_cast<double>(count_s[i]);
    }
  }
  return emp;
}

nlohmann::json buffer_to_json(const ReplayBuffer& buffer) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Transition& t : buffer.entries()) {
    arr.push_back(nlohmann::json::array({t.s, t.r, t.s_next}));
  }
  return arr;
}

ReplayBuffer buffer_from_json(const nlohmann::json& j, int capacity, int n_states) {
  ReplayBuffer buffer(capacity, n_states);
  if (!j.is_array()) throw InvalidInput("buffer_from_json: expected an array");
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 3) {
      throw InvalidInput("buffer_from_json: entries must be [s, r, s'] triples");
    }
    buffer.push(Transition{item.at(0).get<int>(), item.at(1).get<double>(),
                           item.at(2).get<int>()});
  }
  return buffer;
}

}  // namespace replay_td
