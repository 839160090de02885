#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "fsbdp/label_switching.hpp"
#include "fsbdp/model.hpp"
#include "fsbdp/partition_posterior.hpp"
#include "fsbdp/rng.hpp"

namespace fsbdp {

struct SamplerConfig {
  std::uint64_t sweeps = 5000;
  std::uint64_t burnin = 2500;
  std::uint64_t thin = 5;
  /// Number of labels the initial allocation is spread over. Required:
  /// choose it above the number of clusters you expect.
  int init_clusters = 0;
  /// Partition-posterior terms are computed on sweeps divisible by this; 0 disables.
  std::uint64_t mpp_every = 10;
  std::uint64_t seed = 0;
  /// Target acceptance rate for random-walk scale adaptation during burn-in.
  double adapt_target = 0.44;
  /// Enable flags for label-switching moves 1, 2 and 3.
  std::array<bool, 3> moves{true, true, true};
  /// Attempts of each enabled move per sweep.
  int label_switch_attempts = 1;
  LabelMoveMode label_move_mode = LabelMoveMode::occupied;
  /// Concentration used in the partition prior; defaults to alpha_fixed, else the prior mean.
  std::optional<double> alpha_star;
  /// Re-derive psi from V and check every state invariant after each sweep.
  bool debug_checks = false;
  std::size_t max_sticks = 1'000'000;
  LaplaceOptions laplace;

  void validate() const;
};

/// Concentration used for partition-prior evaluation during a run.
double resolve_alpha_star(const SamplerConfig& config, const HyperParams& hyper);

/// Robbins-Monro adaptation of log proposal scales; inactive after burn-in.
struct AdaptSchedule {
  bool active = false;
  double target = 0.44;
  double gain = 0.0;
};
AdaptSchedule adapt_schedule(const SamplerConfig& config, std::uint64_t sweep);

ClusterParams draw_cluster_prior(const HyperParams& hyper, std::span<const int> categories, RngStream& rng);

/// Labels uniform over 1..init_clusters; sticks, cluster parameters, beta and
/// alpha drawn from their priors.
ChainState initialise_state(const ProfileDataset& data, const HyperParams& hyper, int init_clusters,
                            RngStream& rng);

/// U_i ~ Uniform(0, psi_{Z_i}).
void update_slice(ChainState& state, RngStream& rng);
/// Append prior sticks until the unrepresented mass falls below min_i U_i.
/// Throws std::runtime_error when more than `max_sticks` would be needed.
void extend_sticks(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                   std::size_t max_sticks = 1'000'000);
/// Z_i drawn with probability proportional to 1{psi_c > U_i} f(D_i | Theta_c).
void update_allocations(ChainState& state, const ProfileDataset& data, RngStream& rng);
/// V_c ~ Beta(1 + n_c, alpha + sum_{l > c} n_l) for every instantiated stick.
void update_sticks(ChainState& state, RngStream& rng);
/// Phi_{c,j} ~ Dirichlet(a + n_{c,j,.}).
void update_cluster_covariate_params(ChainState& state, const ProfileDataset& data, const HyperParams& hyper,
                                     RngStream& rng);
/// Random-walk Metropolis on each occupied theta_c; empty clusters redraw from the prior.
void update_theta(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                  const AdaptSchedule& adapt = {});
/// Random-walk Metropolis on each beta_l.
void update_beta(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                 const AdaptSchedule& adapt = {});
/// alpha ~ Gamma(shape + C, rate - sum_c log(1 - V_c)); fixed alpha is left as is.
void update_alpha(ChainState& state, const HyperParams& hyper, RngStream& rng);
/// Drop sticks above the largest occupied label.
void prune_sticks(ChainState& state);

/// One full sweep in the fixed block order.
SweepRecord sweep(ChainState& state, const ProfileDataset& data, const HyperParams& hyper,
                  const SamplerConfig& config, RngStream& rng);

}  // namespace fsbdp
