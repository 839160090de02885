#include "fsbdp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fsbdp/distributions.hpp"
#include "fsbdp/numeric.hpp"

namespace fsbdp {

namespace {

constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e2;

void adapt_scale(double& scale, const AdaptSchedule& adapt, int accepted, int tried) {
  if (!adapt.active || tried == 0) return;
  const double rate = static_cast<double>(accepted) / tried;
  scale = std::clamp(scale * std::exp(adapt.gain * (rate - adapt.target)), kMinScale, kMaxScale);
}

/// Observation indices grouped by label, labels 1..C.
std::vector<std::vector<std::size_t>> members_by_label(const ChainState& state) {
  std::vector<std::vector<std::size_t>> members(state.num_sticks());
  for (std::size_t i = 0; i < state.z.size(); ++i) members[static_cast<std::size_t>(state.z[i] - 1)].push_back(i);
  return members;
}

}  // namespace

void SamplerConfig::validate() const {
  if (init_clusters < 1) throw std::invalid_argument("init_clusters must be set to a positive integer");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (burnin > sweeps) throw std::invalid_argument("burnin cannot exceed sweeps");
  if (!(adapt_target > 0.0 && adapt_target < 1.0)) throw std::invalid_argument("adapt_target must lie in (0,1)");
  if (label_switch_attempts < 0) throw std::invalid_argument("label_switch_attempts cannot be negative");
  if (alpha_star && !(*alpha_star > 0.0)) throw std::invalid_argument("alpha_star must be positive");
  if (max_sticks < 1) throw std::invalid_argument("max_sticks must be positive");
}

double resolve_alpha_star(const SamplerConfig& config, const HyperParams& hyper) {
  if (config.alpha_star) return *config.alpha_star;
  if (hyper.alpha_fixed) return *hyper.alpha_fixed;
  return hyper.alpha_shape / hyper.alpha_rate;
}

AdaptSchedule adapt_schedule(const SamplerConfig& config, std::uint64_t sweep) {
  AdaptSchedule s;
  s.target = config.adapt_target;
  s.active = sweep >= 1 && sweep <= config.burnin;
  s.gain = s.active ? std::pow(static_cast<double>(sweep), -0.6) : 0.0;
  return s;
}

ClusterParams draw_cluster_prior(const HyperParams& hyper, std::span<const int> categories, RngStream& rng) {
  ClusterParams params;
  params.theta = draw_student_t_scaled(rng, hyper.nu, hyper.sigma_theta);
  params.phi.reserve(categories.size());
  for (int k : categories) {
    params.phi.push_back(draw_dirichlet_symmetric(rng, hyper.dirichlet_a, static_cast<std::size_t>(k)));
  }
  return params;
}

ChainState initialise_state(const ProfileDataset& data, const HyperParams& hyper, int init_clusters,
                            RngStream& rng) {
  hyper.validate();
  if (init_clusters < 1) throw std::invalid_argument("init_clusters must be positive");
  ChainState state;
  state.alpha = hyper.alpha_fixed ? *hyper.alpha_fixed : draw_gamma(rng, hyper.alpha_shape, hyper.alpha_rate);
  for (int c = 0; c < init_clusters; ++c) {
    const double v = draw_beta(rng, 1.0, state.alpha);
    state.append_stick(v, draw_cluster_prior(hyper, data.categories(), rng));
  }
  state.z.resize(data.size());
  for (int& label : state.z) label = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(init_clusters)));
  state.u.assign(data.size(), 0.0);
  state.beta.resize(data.num_fixed_effects());
  for (double& b : state.beta) b = draw_student_t_scaled(rng, hyper.nu, hyper.sigma_beta);
  state.proposal.theta = 0.5;
  state.proposal.beta.assign(data.num_fixed_effects(), 0.5);
  return state;
}

void update_slice(ChainState& state, RngStream& rng) {
  state.u.resize(state.z.size());
  for (std::size_t i = 0; i < state.z.size(); ++i) state.u[i] = rng.uniform() * state.psi_at(state.z[i]);
}

void extend_sticks(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                   std::size_t max_sticks) {
  if (state.u.empty()) return;
  const double min_u = *std::min_element(state.u.begin(), state.u.end());
  while (state.tail_mass() >= min_u) {
    if (state.num_sticks() >= max_sticks) {
      throw std::runtime_error("extend_sticks: more than " + std::to_string(max_sticks) +
                               " sticks needed; alpha = " + std::to_string(state.alpha));
    }
    const double v = draw_beta(rng, 1.0, state.alpha);
    state.append_stick(v, draw_cluster_prior(hyper, data.categories(), rng));
  }
}

void update_allocations(ChainState& state, const ProfileDataset& data, RngStream& rng) {
  const std::size_t C = state.num_sticks();
  const std::size_t J = data.num_covariates();
  const std::size_t L = data.num_fixed_effects();

  // log phi tables, one row of sum_j K_j entries per stick.
  std::vector<std::size_t> offset(J, 0);
  std::size_t stride = 0;
  for (std::size_t j = 0; j < J; ++j) {
    offset[j] = stride;
    stride += static_cast<std::size_t>(data.categories()[j]);
  }
  std::vector<double> log_phi(C * stride);
  std::vector<double> log_p1(C);
  std::vector<double> log_p0(C);
  for (std::size_t c = 0; c < C; ++c) {
    const ClusterParams& params = state.clusters()[c];
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = 0; k < params.phi[j].size(); ++k) {
        log_phi[c * stride + offset[j] + k] = std::log(std::max(params.phi[j][k], 1e-300));
      }
    }
    log_p1[c] = -log1p_exp(-params.theta);
    log_p0[c] = -log1p_exp(params.theta);
  }
  const std::vector<double> fixed = L > 0 ? fixed_effect_predictor(state.beta, data) : std::vector<double>();

  std::vector<double> weights;
  std::vector<int> candidates;
  weights.reserve(C);
  candidates.reserve(C);
  for (std::size_t i = 0; i < data.size(); ++i) {
    weights.clear();
    candidates.clear();
    const auto x = data.x_row(i);
    const int y = data.y(i);
    for (std::size_t c = 0; c < C; ++c) {
      if (!(state.psi()[c] > state.u[i])) continue;
      double lw = 0.0;
      const double* row = log_phi.data() + c * stride;
      for (std::size_t j = 0; j < J; ++j) lw += row[offset[j] + static_cast<std::size_t>(x[j])];
      if (L > 0) {
        lw += log_density_bernoulli_logit(y, state.clusters()[c].theta + fixed[i]);
      } else {
        lw += y == 1 ? log_p1[c] : log_p0[c];
      }
      weights.push_back(lw);
      candidates.push_back(static_cast<int>(c + 1));
    }
    if (candidates.empty()) {
      throw std::logic_error("update_allocations: no stick above the slice for observation " + std::to_string(i + 1));
    }
    state.z[i] = candidates[draw_categorical_log(rng, weights)];
  }
}

void update_sticks(ChainState& state, RngStream& rng) {
  const std::size_t C = state.num_sticks();
  const std::vector<int> n = cluster_sizes(state.z, C);
  std::vector<int> tails(C, 0);
  int tail = 0;
  for (std::size_t c = C; c-- > 0;) {
    tails[c] = tail;
    tail += n[c];
  }
  std::vector<double> v(C);
  for (std::size_t c = 0; c < C; ++c) v[c] = draw_beta(rng, 1.0 + n[c], state.alpha + tails[c]);
  state.set_all_v(std::move(v));
}

void update_cluster_covariate_params(ChainState& state, const ProfileDataset& data, const HyperParams& hyper,
                                     RngStream& rng) {
  const ClusterCounts counts = cluster_counts(state.z, state.num_sticks(), data);
  std::vector<double> conc;
  for (std::size_t c = 1; c <= state.num_sticks(); ++c) {
    ClusterParams& params = state.cluster(static_cast<int>(c));
    for (std::size_t j = 0; j < data.num_covariates(); ++j) {
      const int K = data.categories()[j];
      conc.assign(static_cast<std::size_t>(K), hyper.dirichlet_a);
      for (int k = 0; k < K; ++k) conc[static_cast<std::size_t>(k)] += counts.nk(static_cast<int>(c), j, k);
      params.phi[j] = draw_dirichlet(rng, conc);
    }
  }
}

void update_theta(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                  const AdaptSchedule& adapt) {
  const auto members = members_by_label(state);
  const bool has_fixed = data.num_fixed_effects() > 0;
  const std::vector<double> fixed = has_fixed ? fixed_effect_predictor(state.beta, data) : std::vector<double>();

  int tried = 0;
  int accepted = 0;
  for (std::size_t c = 0; c < state.num_sticks(); ++c) {
    ClusterParams& params = state.cluster(static_cast<int>(c + 1));
    const auto& idx = members[c];
    if (idx.empty()) {
      params.theta = draw_student_t_scaled(rng, hyper.nu, hyper.sigma_theta);
      continue;
    }
    int ones = 0;
    for (std::size_t i : idx) ones += data.y(i);
    auto log_target = [&](double theta) {
      double ll = 0.0;
      if (has_fixed) {
        for (std::size_t i : idx) ll += log_density_bernoulli_logit(data.y(i), theta + fixed[i]);
      } else {
        ll = ones * theta - static_cast<double>(idx.size()) * log1p_exp(theta);
      }
      return ll + log_kernel_student_t(theta, hyper.nu, hyper.sigma_theta);
    };
    const double current = params.theta;
    const double proposal = current + state.proposal.theta * rng.normal();
    const double log_ratio = log_target(proposal) - log_target(current);
    ++tried;
    if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
      params.theta = proposal;
      ++accepted;
    }
  }
  adapt_scale(state.proposal.theta, adapt, accepted, tried);
}

void update_beta(ChainState& state, const ProfileDataset& data, const HyperParams& hyper, RngStream& rng,
                 const AdaptSchedule& adapt) {
  const std::size_t L = data.num_fixed_effects();
  if (L == 0) return;
  if (state.proposal.beta.size() != L) state.proposal.beta.assign(L, 0.5);
  std::vector<double> eta = fixed_effect_predictor(state.beta, data);
  for (std::size_t i = 0; i < data.size(); ++i) eta[i] += state.cluster(state.z[i]).theta;

  for (std::size_t l = 0; l < L; ++l) {
    const double current = state.beta[l];
    const double proposal = current + state.proposal.beta[l] * rng.normal();
    const double delta = proposal - current;
    double log_ratio = log_kernel_student_t(proposal, hyper.nu, hyper.sigma_beta) -
                       log_kernel_student_t(current, hyper.nu, hyper.sigma_beta);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double shift = delta * data.w_row(i)[l];
      log_ratio += log_density_bernoulli_logit(data.y(i), eta[i] + shift) -
                   log_density_bernoulli_logit(data.y(i), eta[i]);
    }
    const bool ok = log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
    if (ok) {
      state.beta[l] = proposal;
      for (std::size_t i = 0; i < data.size(); ++i) eta[i] += delta * data.w_row(i)[l];
    }
    adapt_scale(state.proposal.beta[l], adapt, ok ? 1 : 0, 1);
  }
}

void update_alpha(ChainState& state, const HyperParams& hyper, RngStream& rng) {
  if (hyper.alpha_fixed) {
    state.alpha = *hyper.alpha_fixed;
    return;
  }
  double rate = hyper.alpha_rate;
  for (double v : state.v()) rate -= std::log1p(-v);
  state.alpha = draw_gamma(rng, hyper.alpha_shape + static_cast<double>(state.num_sticks()), rate);
}

void prune_sticks(ChainState& state) {
  const auto keep = static_cast<std::size_t>(state.max_label());
  if (keep < state.num_sticks()) state.truncate_sticks(keep);
}

namespace {

void enforce(const ChainState& state, const ProfileDataset& data, bool check_slice, const char* where) {
  const auto problems = check_invariants(state, data, check_slice);
  if (problems.empty()) return;
  std::string msg = std::string("invariant violated after ") + where + ":";
  for (const auto& p : problems) msg += " " + p + ";";
  throw std::logic_error(msg);
}

}  // namespace

SweepRecord sweep(ChainState& state, const ProfileDataset& data, const HyperParams& hyper,
                  const SamplerConfig& config, RngStream& rng) {
  ++state.sweep;
  const AdaptSchedule adapt = adapt_schedule(config, state.sweep);

  update_slice(state, rng);
  extend_sticks(state, data, hyper, rng, config.max_sticks);
  update_allocations(state, data, rng);
  if (config.debug_checks) enforce(state, data, true, "allocation update");
  update_sticks(state, rng);
  update_cluster_covariate_params(state, data, hyper, rng);
  update_theta(state, data, hyper, rng, adapt);
  update_beta(state, data, hyper, rng, adapt);

  SweepRecord record;
  for (int move = 0; move < 3; ++move) {
    if (!config.moves[static_cast<std::size_t>(move)]) continue;
    for (int attempt = 0; attempt < config.label_switch_attempts; ++attempt) {
      MoveOutcome outcome;
      switch (move) {
        case 0: outcome = move1_swap_random_pair(state, rng, config.label_move_mode); break;
        case 1: outcome = move2_swap_neighbours_with_v(state, rng, config.label_move_mode); break;
        default: outcome = move3_expected_weight_switch(state, rng, config.label_move_mode); break;
      }
      auto& tally = record.moves[static_cast<std::size_t>(move)];
      tally.attempted += outcome.attempted ? 1 : 0;
      tally.accepted += outcome.accepted ? 1 : 0;
    }
  }

  update_alpha(state, hyper, rng);
  prune_sticks(state);
  if (config.debug_checks) enforce(state, data, false, "sweep");

  record.sweep = state.sweep;
  record.alpha = state.alpha;
  record.occupied = state.occupied_count();
  record.sticks = state.num_sticks();
  record.alpha_star = resolve_alpha_star(config, hyper);
  if (config.mpp_every > 0 && state.sweep % config.mpp_every == 0) {
    const MppTerms terms = log_mpp(state.z, data, hyper, record.alpha_star, config.laplace);
    record.log_covariate = terms.log_covariate;
    record.log_prior = terms.log_prior;
    record.log_response = terms.log_response;
    record.log_mpp = terms.total();
    record.laplace_failed = !terms.log_response.has_value();
  }
  return record;
}

}  // namespace fsbdp
