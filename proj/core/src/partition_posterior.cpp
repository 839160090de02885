#include "fsbdp/partition_posterior.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "fsbdp/distributions.hpp"
#include "fsbdp/numeric.hpp"

namespace fsbdp {

namespace {

/// Labels of z mapped to 0..C*-1 in order of first appearance.
std::vector<std::size_t> canonical_groups(std::span<const int> z, std::size_t& occupied) {
  std::unordered_map<int, std::size_t> index;
  std::vector<std::size_t> group(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto [it, inserted] = index.emplace(z[i], index.size());
    group[i] = it->second;
  }
  occupied = index.size();
  return group;
}

double t_grad(double x, double nu, double sigma) {
  return -(nu + 1.0) * x / (nu * sigma * sigma + x * x);
}

double t_second(double x, double nu, double sigma) {
  const double s2 = nu * sigma * sigma;
  const double d = s2 + x * x;
  return -(nu + 1.0) * (s2 - x * x) / (d * d);
}

double sigmoid(double x) { return logistic(x); }

}  // namespace

double log_covariate_marginal(std::span<const int> z, const ProfileDataset& data, double dirichlet_a) {
  if (!(dirichlet_a > 0.0)) throw std::invalid_argument("dirichlet_a must be positive");
  if (z.size() != data.size()) throw std::invalid_argument("z and data differ in length");
  std::size_t occupied = 0;
  const auto group = canonical_groups(z, occupied);
  const std::size_t J = data.num_covariates();
  std::vector<std::size_t> offset(J);
  std::size_t stride = 0;
  for (std::size_t j = 0; j < J; ++j) {
    offset[j] = stride;
    stride += static_cast<std::size_t>(data.categories()[j]);
  }
  std::vector<int> n(occupied, 0);
  std::vector<int> nk(occupied * stride, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    ++n[group[i]];
    for (std::size_t j = 0; j < J; ++j) ++nk[group[i] * stride + offset[j] + static_cast<std::size_t>(data.x(i, j))];
  }
  const double lg_a = log_gamma(dirichlet_a);
  double total = 0.0;
  for (std::size_t c = 0; c < occupied; ++c) {
    for (std::size_t j = 0; j < J; ++j) {
      const int K = data.categories()[j];
      const double Ka = K * dirichlet_a;
      double term = log_gamma(Ka) - K * lg_a - log_gamma(Ka + n[c]);
      for (int k = 0; k < K; ++k) term += log_gamma(dirichlet_a + nk[c * stride + offset[j] + static_cast<std::size_t>(k)]);
      total += term;
    }
  }
  return total;
}

ResponseObjective::ResponseObjective(std::span<const int> z, const ProfileDataset& data, const HyperParams& hyper)
    : data_(&data),
      nu_(hyper.nu),
      sigma_theta_(hyper.sigma_theta),
      sigma_beta_(hyper.sigma_beta),
      fixed_(data.num_fixed_effects()) {
  if (z.size() != data.size()) throw std::invalid_argument("z and data differ in length");
  group_ = canonical_groups(z, occupied_);
  cluster_n_.assign(occupied_, 0.0);
  cluster_ones_.assign(occupied_, 0.0);
  for (std::size_t i = 0; i < group_.size(); ++i) {
    cluster_n_[group_[i]] += 1.0;
    cluster_ones_[group_[i]] += data.y(i);
  }
}

double ResponseObjective::value(std::span<const double> eta) const {
  double ll = 0.0;
  if (fixed_ == 0) {
    for (std::size_t c = 0; c < occupied_; ++c) {
      ll += cluster_ones_[c] * eta[c] - cluster_n_[c] * log1p_exp(eta[c]);
    }
  } else {
    for (std::size_t i = 0; i < group_.size(); ++i) {
      double lambda = eta[group_[i]];
      const auto w = data_->w_row(i);
      for (std::size_t l = 0; l < fixed_; ++l) lambda += eta[occupied_ + l] * w[l];
      ll += data_->y(i) * lambda - log1p_exp(lambda);
    }
  }
  for (std::size_t c = 0; c < occupied_; ++c) ll += log_kernel_student_t(eta[c], nu_, sigma_theta_);
  for (std::size_t l = 0; l < fixed_; ++l) ll += log_kernel_student_t(eta[occupied_ + l], nu_, sigma_beta_);
  return -ll / static_cast<double>(size());
}

std::vector<double> ResponseObjective::gradient(std::span<const double> eta) const {
  const std::size_t d = dimension();
  std::vector<double> g(d, 0.0);
  if (fixed_ == 0) {
    for (std::size_t c = 0; c < occupied_; ++c) g[c] = cluster_ones_[c] - cluster_n_[c] * sigmoid(eta[c]);
  } else {
    for (std::size_t i = 0; i < group_.size(); ++i) {
      double lambda = eta[group_[i]];
      const auto w = data_->w_row(i);
      for (std::size_t l = 0; l < fixed_; ++l) lambda += eta[occupied_ + l] * w[l];
      const double r = data_->y(i) - sigmoid(lambda);
      g[group_[i]] += r;
      for (std::size_t l = 0; l < fixed_; ++l) g[occupied_ + l] += r * w[l];
    }
  }
  for (std::size_t c = 0; c < occupied_; ++c) g[c] += t_grad(eta[c], nu_, sigma_theta_);
  for (std::size_t l = 0; l < fixed_; ++l) g[occupied_ + l] += t_grad(eta[occupied_ + l], nu_, sigma_beta_);
  const double scale = -1.0 / static_cast<double>(size());
  for (double& v : g) v *= scale;
  return g;
}

std::vector<double> ResponseObjective::hessian(std::span<const double> eta) const {
  const std::size_t d = dimension();
  std::vector<double> h(d * d, 0.0);
  if (fixed_ == 0) {
    for (std::size_t c = 0; c < occupied_; ++c) {
      const double p = sigmoid(eta[c]);
      h[c * d + c] = cluster_n_[c] * p * (1.0 - p);
    }
  } else {
    for (std::size_t i = 0; i < group_.size(); ++i) {
      const std::size_t c = group_[i];
      double lambda = eta[c];
      const auto w = data_->w_row(i);
      for (std::size_t l = 0; l < fixed_; ++l) lambda += eta[occupied_ + l] * w[l];
      const double p = sigmoid(lambda);
      const double q = p * (1.0 - p);
      h[c * d + c] += q;
      for (std::size_t l = 0; l < fixed_; ++l) {
        const std::size_t a = occupied_ + l;
        h[c * d + a] += q * w[l];
        h[a * d + c] += q * w[l];
        for (std::size_t m = 0; m < fixed_; ++m) h[a * d + occupied_ + m] += q * w[l] * w[m];
      }
    }
  }
  for (std::size_t c = 0; c < occupied_; ++c) h[c * d + c] -= t_second(eta[c], nu_, sigma_theta_);
  for (std::size_t l = 0; l < fixed_; ++l) {
    const std::size_t a = occupied_ + l;
    h[a * d + a] -= t_second(eta[a], nu_, sigma_beta_);
  }
  const double scale = 1.0 / static_cast<double>(size());
  for (double& v : h) v *= scale;
  return h;
}

LaplaceResult log_response_marginal_laplace(std::span<const int> z, const ProfileDataset& data,
                                            const HyperParams& hyper, const LaplaceOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("Laplace approximation needs at least one observation");
  const ResponseObjective objective(z, data, hyper);
  const std::size_t d = objective.dimension();
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::VectorXd;

  LaplaceResult result;
  result.log_normaliser = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
                          static_cast<double>(objective.occupied()) * log_normaliser_student_t(hyper.nu, hyper.sigma_theta) +
                          static_cast<double>(data.num_fixed_effects()) * log_normaliser_student_t(hyper.nu, hyper.sigma_beta);

  std::vector<double> eta(d, 0.0);
  double h = objective.value(eta);
  std::vector<double> grad = objective.gradient(eta);
  auto norm = [](const std::vector<double>& g) {
    return Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size())).norm();
  };
  double gnorm = norm(grad);
  int iter = 0;
  while (gnorm >= options.gradient_tolerance) {
    if (iter >= options.max_iterations) {
      result.failure = "Newton did not converge in " + std::to_string(options.max_iterations) + " iterations";
      break;
    }
    ++iter;
    const std::vector<double> hess = objective.hessian(eta);
    Matrix H = Eigen::Map<const Matrix>(hess.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const Vector g = Eigen::Map<const Vector>(grad.data(), static_cast<Eigen::Index>(d));
    // Levenberg damping only while the Hessian is not positive definite along the path.
    Vector step;
    double damping = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      Matrix damped = H;
      damped.diagonal().array() += damping;
      Eigen::LLT<Matrix> llt(damped);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(-g);
        break;
      }
      damping = damping == 0.0 ? 1e-8 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff()) : damping * 10.0;
    }
    if (step.size() == 0) {
      result.failure = "could not factorise damped Hessian";
      break;
    }
    double t = 1.0;
    bool moved = false;
    std::vector<double> trial(d);
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t k = 0; k < d; ++k) trial[k] = eta[k] + t * step[static_cast<Eigen::Index>(k)];
      const double h_trial = objective.value(trial);
      if (std::isfinite(h_trial) && h_trial <= h) {
        eta = trial;
        h = h_trial;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      result.failure = "step halving failed to decrease h";
      break;
    }
    grad = objective.gradient(eta);
    gnorm = norm(grad);
  }
  result.mode = eta;
  result.iterations = iter;
  result.gradient_norm = gnorm;
  if (!result.failure.empty()) return result;
  if (!std::isfinite(h)) {
    result.failure = "non-finite objective at the mode";
    return result;
  }

  const std::vector<double> hess = objective.hessian(eta);
  const Matrix H = Eigen::Map<const Matrix>(hess.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    result.failure = "Hessian of h is not positive definite at the mode";
    return result;
  }
  double log_det = 0.0;
  const Matrix& L = llt.matrixLLT();
  for (Eigen::Index k = 0; k < L.rows(); ++k) log_det += 2.0 * std::log(L(k, k));
  const double n = static_cast<double>(data.size());
  result.log_marginal = -n * h - 0.5 * log_det - 0.5 * static_cast<double>(d) * std::log(n);
  return result;
}

double log_partition_prior_from_sizes(std::span<const int> sizes, double alpha_star) {
  if (!(alpha_star > 0.0)) throw std::invalid_argument("alpha_star must be positive");
  std::map<int, int> multiplicity;
  long n = 0;
  for (int s : sizes) {
    if (s <= 0) continue;
    ++multiplicity[s];
    n += s;
  }
  const double nd = static_cast<double>(n);
  double total = log_gamma(nd + 1.0) + log_gamma(alpha_star) - log_gamma(alpha_star + nd);
  const double log_alpha = std::log(alpha_star);
  for (const auto& [j, a] : multiplicity) {
    total += a * log_alpha - a * std::log(static_cast<double>(j)) - log_gamma(a + 1.0);
  }
  return total;
}

double log_partition_prior(std::span<const int> z, double alpha_star) {
  std::size_t occupied = 0;
  const auto group = canonical_groups(z, occupied);
  std::vector<int> sizes(occupied, 0);
  for (std::size_t g : group) ++sizes[g];
  return log_partition_prior_from_sizes(sizes, alpha_star);
}

double rescale_log_partition_prior(double log_prior, std::size_t n, std::size_t occupied, double from_alpha,
                                   double to_alpha) {
  if (!(from_alpha > 0.0) || !(to_alpha > 0.0)) throw std::invalid_argument("concentrations must be positive");
  const double nd = static_cast<double>(n);
  const double k = static_cast<double>(occupied);
  auto alpha_part = [&](double a) { return log_gamma(a) - log_gamma(a + nd) + k * std::log(a); };
  return log_prior - alpha_part(from_alpha) + alpha_part(to_alpha);
}

MppTerms log_mpp(std::span<const int> z, const ProfileDataset& data, const HyperParams& hyper, double alpha_star,
                 const LaplaceOptions& options) {
  MppTerms terms;
  terms.log_covariate = log_covariate_marginal(z, data, hyper.dirichlet_a);
  terms.log_prior = log_partition_prior(z, alpha_star);
  if (data.size() == 0) {
    terms.log_response = 0.0;
    return terms;
  }
  const LaplaceResult laplace = log_response_marginal_laplace(z, data, hyper, options);
  terms.log_response = laplace.log_marginal;
  terms.failure = laplace.failure;
  return terms;
}

}  // namespace fsbdp
