#include "fsbdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "fsbdp/distributions.hpp"
#include "fsbdp/numeric.hpp"

namespace fsbdp {

namespace {

constexpr double kPhiFloor = 1e-300;

template <typename T>
void hash_values(std::uint64_t& h, const std::vector<T>& values) {
  const auto n = static_cast<std::uint64_t>(values.size());
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&n), sizeof n), h);
  if (!values.empty()) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T)), h);
  }
}

}  // namespace

ProfileDataset::ProfileDataset(std::vector<int> categories, std::size_t num_fixed_effects, std::vector<int> x,
                               std::vector<int> y, std::vector<double> w)
    : categories_(std::move(categories)),
      num_fixed_(num_fixed_effects),
      x_(std::move(x)),
      y_(std::move(y)),
      w_(std::move(w)) {
  const std::size_t n = y_.size();
  const std::size_t J = categories_.size();
  for (std::size_t j = 0; j < J; ++j) {
    if (categories_[j] < 2) {
      throw std::invalid_argument("covariate " + std::to_string(j + 1) + " declares fewer than 2 categories");
    }
  }
  if (x_.size() != n * J) throw std::invalid_argument("covariate matrix does not have n rows of J values");
  if (w_.size() != n * num_fixed_) {
    throw std::invalid_argument("fixed-effect matrix does not have n rows of L values");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (y_[i] != 0 && y_[i] != 1) {
      throw std::invalid_argument("row " + std::to_string(i + 1) + ": response must be 0 or 1");
    }
    for (std::size_t j = 0; j < J; ++j) {
      const int v = x_[i * J + j];
      if (v < 0 || v >= categories_[j]) {
        throw std::invalid_argument("row " + std::to_string(i + 1) + ", covariate " + std::to_string(j + 1) +
                                    ": category " + std::to_string(v) + " outside [0, " +
                                    std::to_string(categories_[j]) + ")");
      }
    }
  }
  for (std::size_t k = 0; k < w_.size(); ++k) {
    if (!std::isfinite(w_[k])) {
      throw std::invalid_argument("row " + std::to_string(k / num_fixed_ + 1) + ": non-finite fixed effect");
    }
  }
}

std::uint64_t ProfileDataset::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_values(h, categories_);
  const auto L = static_cast<std::uint64_t>(num_fixed_);
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&L), sizeof L), h);
  hash_values(h, x_);
  hash_values(h, y_);
  hash_values(h, w_);
  return h;
}

void HyperParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  check(dirichlet_a, "dirichlet_a");
  check(nu, "nu");
  check(sigma_theta, "sigma_theta");
  check(sigma_beta, "sigma_beta");
  check(alpha_shape, "alpha_shape");
  check(alpha_rate, "alpha_rate");
  if (alpha_fixed) check(*alpha_fixed, "alpha_fixed");
}

// ---------------------------------------------------------------------------
// ChainState

void ChainState::refresh_psi(std::size_t from) {
  double prefix = from == 0 ? 1.0 : prefix_[from - 1] * (1.0 - v_[from - 1]);
  for (std::size_t c = from; c < v_.size(); ++c) {
    prefix_[c] = prefix;
    psi_[c] = v_[c] * prefix;
    prefix *= 1.0 - v_[c];
  }
  tail_ = prefix;
}

void ChainState::set_v(int c, double value) {
  const auto idx = static_cast<std::size_t>(c - 1);
  v_.at(idx) = value;
  refresh_psi(idx);
}

void ChainState::set_all_v(std::vector<double> values) {
  if (values.size() != clusters_.size()) throw std::invalid_argument("set_all_v: stick count mismatch");
  v_ = std::move(values);
  psi_.resize(v_.size());
  prefix_.resize(v_.size());
  refresh_psi(0);
}

void ChainState::append_stick(double v, ClusterParams params) {
  v_.push_back(v);
  psi_.push_back(0.0);
  prefix_.push_back(0.0);
  clusters_.push_back(std::move(params));
  refresh_psi(v_.size() - 1);
}

void ChainState::truncate_sticks(std::size_t count) {
  if (count > v_.size()) throw std::invalid_argument("truncate_sticks: cannot grow");
  v_.resize(count);
  psi_.resize(count);
  prefix_.resize(count);
  clusters_.resize(count);
  refresh_psi(count);
  if (count == 0) tail_ = 1.0;
}

void ChainState::swap_labels(int c1, int c2) {
  if (c1 == c2) return;
  std::swap(cluster(c1), cluster(c2));
  for (int& label : z) {
    if (label == c1) {
      label = c2;
    } else if (label == c2) {
      label = c1;
    }
  }
}

int ChainState::max_label() const {
  int m = 0;
  for (int label : z) m = std::max(m, label);
  return m;
}

std::size_t ChainState::occupied_count() const {
  std::vector<char> seen(num_sticks() + 1, 0);
  std::size_t count = 0;
  for (int label : z) {
    auto idx = static_cast<std::size_t>(label);
    if (idx >= seen.size()) seen.resize(idx + 1, 0);
    if (!seen[idx]) {
      seen[idx] = 1;
      ++count;
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Counts

ClusterCounts::ClusterCounts(std::size_t num_sticks, std::span<const int> categories)
    : n_(num_sticks, 0), offset_(categories.size(), 0) {
  std::size_t off = 0;
  for (std::size_t j = 0; j < categories.size(); ++j) {
    offset_[j] = off;
    off += static_cast<std::size_t>(categories[j]);
  }
  stride_ = off;
  nk_.assign(num_sticks * stride_, 0);
}

int ClusterCounts::tail_count(int c) const {
  int total = 0;
  for (std::size_t l = static_cast<std::size_t>(c); l < n_.size(); ++l) total += n_[l];
  return total;
}

void ClusterCounts::add(int c, std::span<const int> x_row) {
  const auto idx = static_cast<std::size_t>(c - 1);
  ++n_[idx];
  for (std::size_t j = 0; j < x_row.size(); ++j) {
    ++nk_[idx * stride_ + offset_[j] + static_cast<std::size_t>(x_row[j])];
  }
}

ClusterCounts cluster_counts(std::span<const int> z, std::size_t num_sticks, const ProfileDataset& data) {
  ClusterCounts counts(num_sticks, data.categories());
  for (std::size_t i = 0; i < z.size(); ++i) counts.add(z[i], data.x_row(i));
  return counts;
}

std::vector<int> cluster_sizes(std::span<const int> z, std::size_t num_sticks) {
  std::vector<int> n(num_sticks, 0);
  for (int label : z) ++n[static_cast<std::size_t>(label - 1)];
  return n;
}

// ---------------------------------------------------------------------------
// Likelihood

std::vector<double> fixed_effect_predictor(std::span<const double> beta, const ProfileDataset& data) {
  std::vector<double> eta(data.size(), 0.0);
  if (beta.empty()) return eta;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto w = data.w_row(i);
    double acc = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) acc += beta[l] * w[l];
    eta[i] = acc;
  }
  return eta;
}

double log_response_obs(const ProfileDataset& data, std::size_t i, double theta, double fixed_part) {
  return log_density_bernoulli_logit(data.y(i), theta + fixed_part);
}

double log_covariate_obs(const ProfileDataset& data, std::size_t i, const ClusterParams& params) {
  double acc = 0.0;
  for (std::size_t j = 0; j < data.num_covariates(); ++j) {
    acc += std::log(std::max(params.phi[j][static_cast<std::size_t>(data.x(i, j))], kPhiFloor));
  }
  return acc;
}

double log_likelihood_obs(std::size_t i, int c, const ChainState& state, const ProfileDataset& data) {
  const ClusterParams& params = state.cluster(c);
  double fixed_part = 0.0;
  const auto w = data.w_row(i);
  for (std::size_t l = 0; l < w.size(); ++l) fixed_part += state.beta[l] * w[l];
  return log_response_obs(data, i, params.theta, fixed_part) + log_covariate_obs(data, i, params);
}

std::vector<std::string> check_invariants(const ChainState& state, const ProfileDataset& data,
                                          bool check_slice) {
  std::vector<std::string> problems;
  const std::size_t C = state.num_sticks();
  if (state.z.size() != data.size()) problems.emplace_back("allocation vector length differs from n");
  if (state.clusters().size() != C) problems.emplace_back("cluster parameter count differs from stick count");
  if (!(state.alpha > 0.0)) problems.emplace_back("alpha is not positive");
  if (state.beta.size() != data.num_fixed_effects()) problems.emplace_back("beta has wrong length");
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    if (state.z[i] < 1 || static_cast<std::size_t>(state.z[i]) > C) {
      problems.push_back("label of observation " + std::to_string(i + 1) + " outside [1, C]");
    }
  }
  double prefix = 1.0;
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double v = state.v()[c];
    const double psi = state.psi()[c];
    if (!(v > 0.0 && v < 1.0)) problems.push_back("V_" + std::to_string(c + 1) + " outside (0,1)");
    if (!(psi > 0.0 && psi < 1.0)) problems.push_back("psi_" + std::to_string(c + 1) + " outside (0,1)");
    const double expect = v * prefix;
    if (std::abs(expect - psi) > 1e-12) problems.push_back("psi_" + std::to_string(c + 1) + " stale");
    prefix *= 1.0 - v;
    sum += psi;
    const ClusterParams& params = state.clusters()[c];
    if (params.phi.size() != data.num_covariates()) {
      problems.push_back("cluster " + std::to_string(c + 1) + " has wrong covariate count");
      continue;
    }
    for (std::size_t j = 0; j < params.phi.size(); ++j) {
      double s = 0.0;
      for (double p : params.phi[j]) s += p;
      if (params.phi[j].size() != static_cast<std::size_t>(data.categories()[j]) || std::abs(s - 1.0) > 1e-12) {
        problems.push_back("cluster " + std::to_string(c + 1) + " covariate " + std::to_string(j + 1) +
                           " is not a simplex");
      }
    }
  }
  if (C > 0 && !(sum < 1.0)) problems.emplace_back("weights sum to 1 or more");
  if (check_slice && state.u.size() == state.z.size()) {
    for (std::size_t i = 0; i < state.z.size(); ++i) {
      const int c = state.z[i];
      if (c < 1 || static_cast<std::size_t>(c) > C) continue;
      if (!(state.u[i] > 0.0 && state.u[i] < state.psi_at(c))) {
        problems.push_back("slice variable " + std::to_string(i + 1) + " outside (0, psi_Z)");
      }
    }
  }
  return problems;
}

}  // namespace fsbdp
