#include "fsbdp/synthetic.hpp"

#include <stdexcept>

#include "fsbdp/distributions.hpp"
#include "fsbdp/numeric.hpp"

namespace fsbdp {

namespace {

int bernoulli(RngStream& rng, double p) { return rng.uniform() < p ? 1 : 0; }

int categorical(RngStream& rng, const std::vector<double>& p) {
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    if (u < p[k]) return static_cast<int>(k);
    u -= p[k];
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

SyntheticDataset generate_dataset1(RngStream& rng, std::size_t per_cluster) {
  constexpr std::size_t J = kDataset1CovariateZeroProb.size();
  constexpr std::size_t C = kDataset1ResponseProb.size();
  const std::size_t n = per_cluster * C;
  std::vector<int> x;
  std::vector<int> y;
  std::vector<int> truth;
  x.reserve(n * J);
  y.reserve(n);
  truth.reserve(n);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t r = 0; r < per_cluster; ++r) {
      truth.push_back(static_cast<int>(c) + 1);
      y.push_back(bernoulli(rng, kDataset1ResponseProb[c]));
      for (std::size_t j = 0; j < J; ++j) x.push_back(bernoulli(rng, 1.0 - kDataset1CovariateZeroProb[j][c]));
    }
  }
  SyntheticDataset out;
  out.data = ProfileDataset(std::vector<int>(J, 2), 0, std::move(x), std::move(y), {});
  out.truth = std::move(truth);
  return out;
}

SyntheticDataset generate_dataset2(RngStream& rng, const Dataset2Options& options) {
  if (options.categories < 2) throw std::invalid_argument("categories must be at least 2");
  SyntheticDataset out;
  const std::size_t n = options.n;

  // Allocation by sequential stick breaking with a fresh alpha per stick.
  std::vector<double> cumulative;
  double remaining = 1.0;
  out.truth.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t c = 0;
    for (;; ++c) {
      if (c == cumulative.size()) {
        const double alpha = draw_gamma(rng, options.alpha_shape, 1.0 / options.alpha_scale);
        out.alpha_draws.push_back(alpha);
        const double v = draw_beta(rng, 1.0, alpha);
        const double psi = v * remaining;
        remaining *= 1.0 - v;
        cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + psi);
      }
      if (u < cumulative[c]) break;
    }
    out.truth.push_back(static_cast<int>(c) + 1);
  }
  const std::size_t sticks = cumulative.size();

  std::vector<double> theta(sticks);
  std::vector<std::vector<std::vector<double>>> phi(sticks);
  for (std::size_t c = 0; c < sticks; ++c) {
    theta[c] = draw_student_t_scaled(rng, 7.0, 1.0);
    for (std::size_t j = 0; j < options.covariates; ++j) {
      phi[c].push_back(draw_dirichlet_symmetric(rng, 1.0, static_cast<std::size_t>(options.categories)));
    }
  }
  const std::size_t L = options.fixed_effects;
  std::vector<double> beta(L);
  for (double& b : beta) b = draw_student_t_scaled(rng, 7.0, 1.0);
  std::vector<double> w(n * L);
  for (double& v : w) v = rng.normal();
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lambda = theta[static_cast<std::size_t>(out.truth[i] - 1)];
    for (std::size_t l = 0; l < L; ++l) lambda += beta[l] * w[i * L + l];
    y[i] = bernoulli(rng, logistic(lambda));
  }
  std::vector<int> x(n * options.covariates);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& profile = phi[static_cast<std::size_t>(out.truth[i] - 1)];
    for (std::size_t j = 0; j < options.covariates; ++j) x[i * options.covariates + j] = categorical(rng, profile[j]);
  }
  out.data = ProfileDataset(std::vector<int>(options.covariates, options.categories), L, std::move(x), std::move(y),
                            std::move(w));
  return out;
}

SyntheticDataset generate_toy(RngStream& rng, const std::string& name) {
  SyntheticDataset out;
  std::vector<int> categories;
  if (name == "n1") {
    categories = {2};
    out.truth = {1};
  } else if (name == "n3") {
    categories = {2, 2};
    out.truth = {1, 1, 2};
  } else if (name == "n8") {
    categories = {3};
    out.truth = {1, 1, 1, 2, 2, 2, 3, 3};
  } else {
    throw std::invalid_argument("unknown toy dataset '" + name + "' (expected n1, n3 or n8)");
  }
  const std::size_t n = out.truth.size();
  std::vector<int> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    y.push_back(bernoulli(rng, 0.5));
    for (int k : categories) x.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k))));
  }
  out.data = ProfileDataset(std::move(categories), 0, std::move(x), std::move(y), {});
  return out;
}

}  // namespace fsbdp
