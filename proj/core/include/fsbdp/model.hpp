#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fsbdp {

/// Observed data for profile regression: categorical covariates X, a binary
/// response Y and real-valued fixed effects W. X and W are stored row-major.
class ProfileDataset {
 public:
  ProfileDataset() = default;
  /// Throws std::invalid_argument if shapes or values are inconsistent.
  ProfileDataset(std::vector<int> categories, std::size_t num_fixed_effects, std::vector<int> x,
                 std::vector<int> y, std::vector<double> w);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t num_covariates() const noexcept { return categories_.size(); }
  std::size_t num_fixed_effects() const noexcept { return num_fixed_; }
  const std::vector<int>& categories() const noexcept { return categories_; }

  int x(std::size_t i, std::size_t j) const { return x_[i * categories_.size() + j]; }
  std::span<const int> x_row(std::size_t i) const {
    return {x_.data() + i * categories_.size(), categories_.size()};
  }
  int y(std::size_t i) const { return y_[i]; }
  std::span<const double> w_row(std::size_t i) const {
    return {w_.data() + i * num_fixed_, num_fixed_};
  }
  const std::vector<int>& x_values() const noexcept { return x_; }
  const std::vector<int>& y_values() const noexcept { return y_; }
  const std::vector<double>& w_values() const noexcept { return w_; }

  /// Order-sensitive content hash; equal datasets give equal fingerprints.
  std::uint64_t fingerprint() const;

  friend bool operator==(const ProfileDataset&, const ProfileDataset&) = default;

 private:
  std::vector<int> categories_;
  std::size_t num_fixed_ = 0;
  std::vector<int> x_;
  std::vector<int> y_;
  std::vector<double> w_;
};

/// Prior constants. Defaults: Dirichlet(1,...,1) covariate profiles,
/// t_7(0, 1) priors on theta and beta, Gamma(shape 2, rate 1) on alpha.
struct HyperParams {
  double dirichlet_a = 1.0;
  double nu = 7.0;
  double sigma_theta = 1.0;
  double sigma_beta = 1.0;
  double alpha_shape = 2.0;
  double alpha_rate = 1.0;
  std::optional<double> alpha_fixed;

  void validate() const;
};

/// Parameters attached to one stick: response intercept and one
/// probability simplex per covariate.
struct ClusterParams {
  double theta = 0.0;
  std::vector<std::vector<double>> phi;

  friend bool operator==(const ClusterParams&, const ClusterParams&) = default;
};

/// Random-walk proposal scales, adapted during burn-in.
struct ProposalScales {
  double theta = 1.0;
  std::vector<double> beta;
};

/// Full sampler state. Labels in `z` are 1-based stick indices; stick c
/// lives at position c - 1 of the stick arrays. The weights psi are cached
/// and recomputed whenever a stick fraction changes.
class ChainState {
 public:
  std::vector<int> z;
  std::vector<double> u;
  std::vector<double> beta;
  double alpha = 1.0;
  std::uint64_t sweep = 0;
  ProposalScales proposal;

  std::size_t num_sticks() const noexcept { return v_.size(); }
  const std::vector<double>& v() const noexcept { return v_; }
  const std::vector<double>& psi() const noexcept { return psi_; }
  double v_at(int c) const { return v_[static_cast<std::size_t>(c - 1)]; }
  double psi_at(int c) const { return psi_[static_cast<std::size_t>(c - 1)]; }
  /// prod_{l < c} (1 - V_l)
  double prefix_at(int c) const { return prefix_[static_cast<std::size_t>(c - 1)]; }
  /// 1 - sum_{c <= C} psi_c, computed as prod_c (1 - V_c).
  double tail_mass() const noexcept { return tail_; }

  const std::vector<ClusterParams>& clusters() const noexcept { return clusters_; }
  ClusterParams& cluster(int c) { return clusters_[static_cast<std::size_t>(c - 1)]; }
  const ClusterParams& cluster(int c) const { return clusters_[static_cast<std::size_t>(c - 1)]; }

  void set_v(int c, double value);
  void set_all_v(std::vector<double> values);
  void append_stick(double v, ClusterParams params);
  void truncate_sticks(std::size_t count);
  /// Exchange the parameters of sticks c1 and c2 and relabel z accordingly.
  /// Stick fractions are left alone.
  void swap_labels(int c1, int c2);

  /// Largest occupied label, 0 when there are no observations.
  int max_label() const;
  /// Number of non-empty clusters.
  std::size_t occupied_count() const;

 private:
  void refresh_psi(std::size_t from);

  std::vector<double> v_;
  std::vector<double> psi_;
  std::vector<double> prefix_;
  std::vector<ClusterParams> clusters_;
  double tail_ = 1.0;
};

/// Occupancy counts n_c and n_{c,j,k} for sticks 1..C.
class ClusterCounts {
 public:
  ClusterCounts(std::size_t num_sticks, std::span<const int> categories);

  int n(int c) const { return n_[static_cast<std::size_t>(c - 1)]; }
  int nk(int c, std::size_t j, int k) const {
    return nk_[static_cast<std::size_t>(c - 1) * stride_ + offset_[j] + static_cast<std::size_t>(k)];
  }
  std::size_t num_sticks() const noexcept { return n_.size(); }
  const std::vector<int>& sizes() const noexcept { return n_; }
  /// sum_{l > c} n_l
  int tail_count(int c) const;

  void add(int c, std::span<const int> x_row);

 private:
  std::vector<int> n_;
  std::vector<int> nk_;
  std::vector<std::size_t> offset_;
  std::size_t stride_ = 0;
};

ClusterCounts cluster_counts(std::span<const int> z, std::size_t num_sticks, const ProfileDataset& data);
/// Sizes only; labels must lie in [1, num_sticks].
std::vector<int> cluster_sizes(std::span<const int> z, std::size_t num_sticks);

/// beta^T W_i for every observation.
std::vector<double> fixed_effect_predictor(std::span<const double> beta, const ProfileDataset& data);

/// log f_Y(Y_i | theta, beta, W_i) given the fixed-effect part of the predictor.
double log_response_obs(const ProfileDataset& data, std::size_t i, double theta, double fixed_part);
/// log prod_j phi[j][X_ij], with entries floored at 1e-300.
double log_covariate_obs(const ProfileDataset& data, std::size_t i, const ClusterParams& params);

/// Profile-regression log likelihood of observation i under stick c.
double log_likelihood_obs(std::size_t i, int c, const ChainState& state, const ProfileDataset& data);

/// Invariant violations of `state`, empty when consistent. The slice bound
/// U_i < psi_{Z_i} only holds right after the slice/allocation steps, so it
/// is checked on request.
std::vector<std::string> check_invariants(const ChainState& state, const ProfileDataset& data,
                                          bool check_slice);

struct MoveTally {
  int attempted = 0;
  int accepted = 0;
};

/// Diagnostics emitted after each sweep. Partition-posterior terms are only
/// present on sweeps where they were computed.
struct SweepRecord {
  std::uint64_t sweep = 0;
  double alpha = 0.0;
  std::size_t occupied = 0;
  std::size_t sticks = 0;
  double alpha_star = 0.0;
  std::optional<double> log_covariate;
  std::optional<double> log_response;
  std::optional<double> log_prior;
  std::optional<double> log_mpp;
  bool laplace_failed = false;
  std::array<MoveTally, 3> moves{};
};

}  // namespace fsbdp
