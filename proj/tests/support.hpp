#pragma once

// Test-only oracles and generators. Nothing here calls the library code it is
// used to check.

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "fsbdp/model.hpp"
#include "fsbdp/rng.hpp"
#include "fsbdp/sampler.hpp"

namespace fsbdp::testing {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;  // standard error of the mean, iid draws
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.variance = ss / (n - 1.0);
  m.se = std::sqrt(m.variance / n);
  return m;
}

/// Standard error of the mean of an autocorrelated series by batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t size = x.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < size; ++k) s += x[b * size + k];
    means.push_back(s / static_cast<double>(size));
  }
  return moments(means).se;
}

/// Pearson chi-square goodness of fit; returns the upper-tail p value.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& probs) {
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = total * probs[k];
    stat += (observed[k] - e) * (observed[k] - e) / e;
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline std::vector<double> oracle_weights(const std::vector<double>& v) {
  std::vector<double> psi;
  double rest = 1.0;
  for (double x : v) {
    psi.push_back(x * rest);
    rest *= 1.0 - x;
  }
  return psi;
}

inline double oracle_log_t(double x, double nu, double sigma) {
  boost::math::students_t t(nu);
  return std::log(boost::math::pdf(t, x / sigma) / sigma);
}

/// log [likelihood x prod_i psi_{Z_i} x stick prior x parameter priors],
/// written out directly from the model definition.
inline double oracle_log_joint(const ChainState& s, const ProfileDataset& d, const HyperParams& h) {
  const std::vector<double> psi = oracle_weights(s.v());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = static_cast<std::size_t>(s.z[i] - 1);
    const ClusterParams& p = s.clusters()[c];
    double eta = p.theta;
    for (std::size_t l = 0; l < d.num_fixed_effects(); ++l) eta += s.beta[l] * d.w_row(i)[l];
    const double prob1 = 1.0 / (1.0 + std::exp(-eta));
    total += std::log(d.y(i) == 1 ? prob1 : 1.0 - prob1);
    for (std::size_t j = 0; j < d.num_covariates(); ++j) total += std::log(p.phi[j][static_cast<std::size_t>(d.x(i, j))]);
    total += std::log(psi[c]);
  }
  boost::math::beta_distribution<double> stick(1.0, s.alpha);
  for (std::size_t c = 0; c < s.num_sticks(); ++c) {
    total += std::log(boost::math::pdf(stick, s.v()[c]));
    const ClusterParams& p = s.clusters()[c];
    total += oracle_log_t(p.theta, h.nu, h.sigma_theta);
    for (const auto& simplex : p.phi) {
      const double k = static_cast<double>(simplex.size());
      total += std::lgamma(k * h.dirichlet_a) - k * std::lgamma(h.dirichlet_a);
      for (double q : simplex) total += (h.dirichlet_a - 1.0) * std::log(q);
    }
  }
  for (double b : s.beta) total += oracle_log_t(b, h.nu, h.sigma_beta);
  return total;
}

inline ProfileDataset random_dataset(RngStream& rng, std::size_t n, const std::vector<int>& categories,
                                     std::size_t fixed) {
  std::vector<int> x;
  std::vector<int> y;
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    y.push_back(rng.uniform() < 0.5 ? 1 : 0);
    for (int k : categories) x.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k))));
    for (std::size_t l = 0; l < fixed; ++l) w.push_back(rng.normal());
  }
  return ProfileDataset(categories, fixed, std::move(x), std::move(y), std::move(w));
}

/// Random state with `sticks` sticks, V in (0.02, 0.98), labels spread over
/// the first `occupied_span` sticks (some may stay empty).
inline ChainState random_state(RngStream& rng, const ProfileDataset& d, const HyperParams& h, std::size_t sticks,
                               std::size_t occupied_span, double alpha) {
  ChainState s;
  s.alpha = alpha;
  for (std::size_t c = 0; c < sticks; ++c) {
    s.append_stick(0.02 + 0.96 * rng.uniform(), draw_cluster_prior(h, d.categories(), rng));
  }
  s.z.resize(d.size());
  for (int& z : s.z) z = 1 + static_cast<int>(rng.uniform_index(occupied_span));
  s.u.assign(d.size(), 0.0);
  for (std::size_t l = 0; l < d.num_fixed_effects(); ++l) s.beta.push_back(rng.normal());
  return s;
}

inline std::vector<double> sorted_thetas(const ChainState& s) {
  std::vector<double> t;
  for (const auto& c : s.clusters()) t.push_back(c.theta);
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace fsbdp::testing
