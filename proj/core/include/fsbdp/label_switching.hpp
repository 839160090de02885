#pragma once

#include <span>

#include "fsbdp/model.hpp"
#include "fsbdp/rng.hpp"

namespace fsbdp {

/// How label-switching moves pick clusters and form acceptance ratios.
///
/// `occupied`: clusters are drawn from {1..Z*}, Z* the largest occupied label,
/// and the move-3 acceptance ratio is the posterior ratio R alone.
///
/// `exact`: clusters are drawn from the instantiated sticks {1..C}, which no
/// move changes, and move 3 additionally carries the Jacobian of its
/// deterministic (V_c, V_{c+1}) map. This variant leaves the posterior
/// invariant; the `occupied` variant does not whenever a move changes Z* or
/// R_1 R_2 (psi+ / Psi')^2 (1 - V_c) / (1 - V'_c) differs from 1.
enum class LabelMoveMode { occupied, exact };

struct MoveOutcome {
  int move = 0;
  int c1 = 0;
  int c2 = 0;
  double log_ratio = 0.0;
  bool attempted = false;
  bool accepted = false;
};

/// E[psi_c | Z, alpha] under the stick posterior V_l ~ Beta(1 + n_l, alpha + sum_{l' > l} n_l').
/// `counts` holds n_1, n_2, ...; labels past its end are empty.
double expected_weight(int c, std::span<const int> counts, double alpha);

/// log of (psi_c1 / psi_c2)^(n_c2 - n_c1): swapping two clusters' labels and parameters.
double move1_log_ratio(double psi_c1, double psi_c2, int n_c1, int n_c2);

/// log of (1 - V_{c+1})^{n_c} / (1 - V_c)^{n_{c+1}}: swapping neighbours together with their sticks.
double move2_log_ratio(double v_c, double v_next, int n_c, int n_next);

/// Deterministic proposal of the expected-weight move at cluster c.
struct Move3Proposal {
  int c = 0;
  double psi_c = 0.0;     // proposed weight of label c
  double psi_next = 0.0;  // proposed weight of label c + 1
  double v_c = 0.0;
  double v_next = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double log_ratio = 0.0;     // log R
  double log_jacobian = 0.0;  // log |d(V'_c, V'_{c+1}) / d(V_c, V_{c+1})|
};

/// R_1 and R_2 from the current occupancy of c, c + 1 and the tail beyond.
double move3_r1(double alpha, int n_next, int tail);
double move3_r2(double alpha, int n_c, int tail);
/// log R = (n_c + n_{c+1}) log(psi+ / (psi_{c+1} R_1 + psi_c R_2)) + n_{c+1} log R_1 + n_c log R_2.
double move3_log_ratio(double psi_c, double psi_next, int n_c, int n_next, double r1, double r2);

/// Requires 1 <= c < C. `counts` are the current n_1..n_C.
Move3Proposal propose_move3(const ChainState& state, int c, std::span<const int> counts);
/// Swap labels/parameters of c and c + 1 and install the proposed sticks.
void apply_move3(ChainState& state, const Move3Proposal& proposal);

MoveOutcome move1_swap_random_pair(ChainState& state, RngStream& rng, LabelMoveMode mode = LabelMoveMode::occupied);
MoveOutcome move2_swap_neighbours_with_v(ChainState& state, RngStream& rng,
                                         LabelMoveMode mode = LabelMoveMode::occupied);
MoveOutcome move3_expected_weight_switch(ChainState& state, RngStream& rng,
                                         LabelMoveMode mode = LabelMoveMode::occupied);

}  // namespace fsbdp
