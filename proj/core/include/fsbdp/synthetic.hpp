#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fsbdp/model.hpp"
#include "fsbdp/rng.hpp"

namespace fsbdp {

struct SyntheticDataset {
  ProfileDataset data;
  /// Generating cluster of each observation, 1-based.
  std::vector<int> truth;
  /// Concentrations drawn per stick (dataset 2 only).
  std::vector<double> alpha_draws;
};

/// Five well-separated clusters of binary covariates with a Bernoulli response.
/// Cluster c has P(Y = 1) = kDataset1ResponseProb[c] and
/// P(X_j = 0) = kDataset1CovariateZeroProb[j][c].
inline constexpr std::array<double, 5> kDataset1ResponseProb{0.1, 0.3, 0.5, 0.7, 0.9};
inline constexpr std::array<double, 5> kDataset1Theta{-2.19, -0.84, 0.0, 0.84, 2.19};
inline constexpr std::array<std::array<double, 5>, 10> kDataset1CovariateZeroProb{{
    {0.9, 0.9, 0.1, 0.1, 0.1},
    {0.9, 0.9, 0.9, 0.1, 0.1},
    {0.9, 0.9, 0.1, 0.1, 0.1},
    {0.9, 0.9, 0.9, 0.1, 0.1},
    {0.1, 0.9, 0.1, 0.1, 0.9},
    {0.1, 0.9, 0.9, 0.1, 0.9},
    {0.1, 0.9, 0.1, 0.1, 0.9},
    {0.1, 0.9, 0.9, 0.1, 0.9},
    {0.9, 0.9, 0.1, 0.9, 0.9},
    {0.1, 0.1, 0.9, 0.1, 0.1},
}};

/// `per_cluster` observations from each of the five clusters, in cluster order.
SyntheticDataset generate_dataset1(RngStream& rng, std::size_t per_cluster = 200);

struct Dataset2Options {
  std::size_t n = 2000;
  std::size_t covariates = 10;
  int categories = 5;
  std::size_t fixed_effects = 10;
  /// Per-stick concentration ~ Gamma(shape, scale).
  double alpha_shape = 9.0;
  double alpha_scale = 0.5;
};

/// Sequential stick-breaking generator: each observation draws u ~ U(0,1) and
/// takes the first stick whose cumulative weight exceeds u; when the sticks run
/// out a new one is broken with its own alpha ~ Gamma(9, scale 0.5). Exactly
/// one observation is allocated per pass. Cluster parameters then follow t_7(0,1) / Dirichlet(1,...,1) priors and
/// W ~ N(0, I).
SyntheticDataset generate_dataset2(RngStream& rng, const Dataset2Options& options = {});

/// Tiny fixed-shape datasets for enumeration tests:
///   "n1": one observation, one binary covariate;
///   "n3": three observations, two binary covariates, truth (1,1,2);
///   "n8": eight observations, one ternary covariate, truth of three clusters.
SyntheticDataset generate_toy(RngStream& rng, const std::string& name);

}  // namespace fsbdp
