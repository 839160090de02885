#include "fsbdp/label_switching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fsbdp {

namespace {

int count_at(std::span<const int> counts, int label) {
  const auto idx = static_cast<std::size_t>(label - 1);
  return idx < counts.size() ? counts[idx] : 0;
}

int tail_after(std::span<const int> counts, int label) {
  int total = 0;
  for (std::size_t l = static_cast<std::size_t>(label); l < counts.size(); ++l) total += counts[l];
  return total;
}

/// Number of labels the moves choose from.
int selectable_labels(const ChainState& state, LabelMoveMode mode) {
  return mode == LabelMoveMode::occupied ? state.max_label() : static_cast<int>(state.num_sticks());
}

bool accept(RngStream& rng, double log_ratio) {
  return log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
}

double clamp_unit(double v) {
  return std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

}  // namespace

double expected_weight(int c, std::span<const int> counts, double alpha) {
  if (c < 1) throw std::invalid_argument("expected_weight: label must be >= 1");
  const double n_c = count_at(counts, c);
  double value = (1.0 + n_c) / (1.0 + alpha + n_c + tail_after(counts, c));
  for (int l = 1; l < c; ++l) {
    const double tail = tail_after(counts, l);
    value *= (alpha + tail) / (1.0 + alpha + count_at(counts, l) + tail);
  }
  return value;
}

double move1_log_ratio(double psi_c1, double psi_c2, int n_c1, int n_c2) {
  if (n_c1 == n_c2) return 0.0;
  return static_cast<double>(n_c2 - n_c1) * (std::log(psi_c1) - std::log(psi_c2));
}

double move2_log_ratio(double v_c, double v_next, int n_c, int n_next) {
  double out = 0.0;
  if (n_c > 0) out += n_c * std::log1p(-v_next);
  if (n_next > 0) out -= n_next * std::log1p(-v_c);
  return out;
}

double move3_r1(double alpha, int n_next, int tail) {
  return (1.0 + alpha + n_next + tail) / (alpha + n_next + tail);
}

double move3_r2(double alpha, int n_c, int tail) {
  return (alpha + n_c + tail) / (1.0 + alpha + n_c + tail);
}

double move3_log_ratio(double psi_c, double psi_next, int n_c, int n_next, double r1, double r2) {
  const double psi_plus = psi_c + psi_next;
  const double denom = psi_next * r1 + psi_c * r2;
  double out = 0.0;
  if (n_c + n_next > 0) out += (n_c + n_next) * std::log(psi_plus / denom);
  if (n_next > 0) out += n_next * std::log(r1);
  if (n_c > 0) out += n_c * std::log(r2);
  return out;
}

Move3Proposal propose_move3(const ChainState& state, int c, std::span<const int> counts) {
  if (c < 1 || static_cast<std::size_t>(c) >= state.num_sticks()) {
    throw std::invalid_argument("propose_move3: c must satisfy 1 <= c < C");
  }
  const int n_c = count_at(counts, c);
  const int n_next = count_at(counts, c + 1);
  const int tail = tail_after(counts, c + 1);

  Move3Proposal p;
  p.c = c;
  p.r1 = move3_r1(state.alpha, n_next, tail);
  p.r2 = move3_r2(state.alpha, n_c, tail);

  const double psi_c = state.psi_at(c);
  const double psi_next = state.psi_at(c + 1);
  const double psi_plus = psi_c + psi_next;
  const double denom = psi_next * p.r1 + psi_c * p.r2;
  p.psi_c = psi_next * psi_plus / denom * p.r1;
  p.psi_next = psi_c * psi_plus / denom * p.r2;

  const double prefix = state.prefix_at(c);
  p.v_c = clamp_unit(p.psi_c / prefix);
  p.v_next = clamp_unit(p.psi_next / ((1.0 - p.v_c) * prefix));

  p.log_ratio = move3_log_ratio(psi_c, psi_next, n_c, n_next, p.r1, p.r2);
  p.log_jacobian = std::log(p.r1) + std::log(p.r2) + 2.0 * std::log(psi_plus / denom) +
                   std::log1p(-state.v_at(c)) - std::log1p(-p.v_c);
  return p;
}

void apply_move3(ChainState& state, const Move3Proposal& proposal) {
  state.swap_labels(proposal.c, proposal.c + 1);
  state.set_v(proposal.c, proposal.v_c);
  state.set_v(proposal.c + 1, proposal.v_next);
}

MoveOutcome move1_swap_random_pair(ChainState& state, RngStream& rng, LabelMoveMode mode) {
  MoveOutcome out;
  out.move = 1;
  const int labels = selectable_labels(state, mode);
  if (labels < 2) return out;
  out.c1 = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels)));
  out.c2 = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels - 1)));
  if (out.c2 >= out.c1) ++out.c2;
  const std::vector<int> n = cluster_sizes(state.z, state.num_sticks());
  out.log_ratio = move1_log_ratio(state.psi_at(out.c1), state.psi_at(out.c2), count_at(n, out.c1),
                                  count_at(n, out.c2));
  out.attempted = true;
  out.accepted = accept(rng, out.log_ratio);
  if (out.accepted) state.swap_labels(out.c1, out.c2);
  return out;
}

MoveOutcome move2_swap_neighbours_with_v(ChainState& state, RngStream& rng, LabelMoveMode mode) {
  MoveOutcome out;
  out.move = 2;
  const int labels = selectable_labels(state, mode);
  if (labels < 2) return out;
  const int c = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels - 1)));
  out.c1 = c;
  out.c2 = c + 1;
  const std::vector<int> n = cluster_sizes(state.z, state.num_sticks());
  const double v_c = state.v_at(c);
  const double v_next = state.v_at(c + 1);
  out.log_ratio = move2_log_ratio(v_c, v_next, count_at(n, c), count_at(n, c + 1));
  out.attempted = true;
  out.accepted = accept(rng, out.log_ratio);
  if (out.accepted) {
    state.swap_labels(c, c + 1);
    state.set_v(c, v_next);
    state.set_v(c + 1, v_c);
  }
  return out;
}

MoveOutcome move3_expected_weight_switch(ChainState& state, RngStream& rng, LabelMoveMode mode) {
  MoveOutcome out;
  out.move = 3;
  const int labels = selectable_labels(state, mode);
  if (labels < 2) return out;
  const int c = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels - 1)));
  out.c1 = c;
  out.c2 = c + 1;
  const std::vector<int> n = cluster_sizes(state.z, state.num_sticks());
  const Move3Proposal proposal = propose_move3(state, c, n);
  out.log_ratio = proposal.log_ratio;
  if (mode == LabelMoveMode::exact) out.log_ratio += proposal.log_jacobian;
  out.attempted = true;
  out.accepted = accept(rng, out.log_ratio);
  if (out.accepted) apply_move3(state, proposal);
  return out;
}

}  // namespace fsbdp
