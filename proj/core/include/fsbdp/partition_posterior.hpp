#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsbdp/model.hpp"

namespace fsbdp {

/// log p(X | Z): Dirichlet-multinomial marginal of the covariates.
/// Clusters are visited in order of first appearance in z, so the result is
/// bit-identical under any relabelling.
double log_covariate_marginal(std::span<const int> z, const ProfileDataset& data, double dirichlet_a);

/// The objective h(eta) whose minimiser drives the Laplace approximation of
/// log p(Y | Z, W); eta = (theta of each occupied cluster, beta). Occupied
/// clusters are ordered by first appearance in z.
class ResponseObjective {
 public:
  ResponseObjective(std::span<const int> z, const ProfileDataset& data, const HyperParams& hyper);

  std::size_t dimension() const noexcept { return occupied_ + fixed_; }
  std::size_t occupied() const noexcept { return occupied_; }
  std::size_t size() const noexcept { return group_.size(); }

  double value(std::span<const double> eta) const;
  std::vector<double> gradient(std::span<const double> eta) const;
  /// Row-major dimension() x dimension().
  std::vector<double> hessian(std::span<const double> eta) const;

 private:
  const ProfileDataset* data_;
  double nu_;
  double sigma_theta_;
  double sigma_beta_;
  std::size_t occupied_ = 0;
  std::size_t fixed_ = 0;
  std::vector<std::size_t> group_;
  // Per-cluster sizes and response sums; enough on their own when there are no fixed effects.
  std::vector<double> cluster_n_;
  std::vector<double> cluster_ones_;
};

struct LaplaceOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
};

struct LaplaceResult {
  /// -n h(eta_hat) + 1/2 log|Sigma| - (C* + L)/2 log n; absent on failure.
  std::optional<double> log_marginal;
  /// Constants dropped above: (d/2) log 2 pi plus the t-prior normalisers.
  double log_normaliser = 0.0;
  std::vector<double> mode;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string failure;

  bool ok() const noexcept { return log_marginal.has_value(); }
  /// Approximation of the fully normalised log p(Y | Z, W).
  std::optional<double> log_marginal_normalised() const {
    if (!log_marginal) return std::nullopt;
    return *log_marginal + log_normaliser;
  }
};

/// Damped Newton minimisation of h from eta = 0, then the Laplace formula.
/// Non-convergence or a non-positive-definite Hessian at the mode is
/// reported through `failure`, never patched.
LaplaceResult log_response_marginal_laplace(std::span<const int> z, const ProfileDataset& data,
                                            const HyperParams& hyper, const LaplaceOptions& options = {});

/// log p(Z) for fixed concentration alpha_star:
/// n! Gamma(a) / Gamma(a + n) prod_j a^{a_j} / (j^{a_j} a_j!), a_j = #{c : n_c = j}.
double log_partition_prior(std::span<const int> z, double alpha_star);
/// Same, from the non-empty cluster sizes.
double log_partition_prior_from_sizes(std::span<const int> sizes, double alpha_star);
/// Re-evaluate a log partition prior at a different concentration.
double rescale_log_partition_prior(double log_prior, std::size_t n, std::size_t occupied, double from_alpha,
                                   double to_alpha);

struct MppTerms {
  double log_covariate = 0.0;
  std::optional<double> log_response;
  double log_prior = 0.0;
  std::string failure;

  std::optional<double> total() const {
    if (!log_response) return std::nullopt;
    return log_covariate + *log_response + log_prior;
  }
};

/// log p(Z | D, W) up to a constant, split into its three factors.
MppTerms log_mpp(std::span<const int> z, const ProfileDataset& data, const HyperParams& hyper, double alpha_star,
                 const LaplaceOptions& options = {});

}  // namespace fsbdp
