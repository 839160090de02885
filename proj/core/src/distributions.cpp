#include "fsbdp/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fsbdp/numeric.hpp"

namespace fsbdp {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be finite and positive, got " +
                                std::to_string(value));
  }
}

constexpr double kTiny = std::numeric_limits<double>::min();

}  // namespace

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % bound);
}

double RngStream::normal() {
  for (;;) {
    const double a = 2.0 * uniform() - 1.0;
    const double b = 2.0 * uniform() - 1.0;
    const double s = a * a + b * b;
    if (s < 1.0 && s > 0.0) return a * std::sqrt(-2.0 * std::log(s) / s);
  }
}

RngStream RngStream::substream(std::uint64_t k) const {
  return RngStream(mix_seed(seed_ ^ mix_seed(k + 1)));
}

double draw_log_gamma_variate(RngStream& rng, double shape) {
  require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a), kept on the log scale.
    return draw_log_gamma_variate(rng, shape + 1.0) + std::log(rng.uniform()) / shape;
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d) + std::log(v);
  }
}

double draw_gamma(RngStream& rng, double shape, double rate) {
  require_positive(rate, "gamma rate");
  const double g = std::exp(draw_log_gamma_variate(rng, shape)) / rate;
  return std::max(g, kTiny);
}

double draw_beta(RngStream& rng, double a, double b) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double lx = draw_log_gamma_variate(rng, a);
  const double ly = draw_log_gamma_variate(rng, b);
  const double v = logistic(lx - ly);
  return std::clamp(v, kTiny, std::nextafter(1.0, 0.0));
}

std::vector<double> draw_dirichlet(RngStream& rng, std::span<const double> concentrations) {
  if (concentrations.empty()) throw std::invalid_argument("dirichlet: no categories");
  for (double a : concentrations) require_positive(a, "dirichlet concentration");
  if (concentrations.size() == 1) return {1.0};
  std::vector<double> logs(concentrations.size());
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] = draw_log_gamma_variate(rng, concentrations[k]);
  const double total = log_sum_exp(logs);
  std::vector<double> p(logs.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logs[k] - total);
  return p;
}

std::vector<double> draw_dirichlet_symmetric(RngStream& rng, double a, std::size_t k) {
  const std::vector<double> conc(k, a);
  return draw_dirichlet(rng, conc);
}

double draw_student_t_scaled(RngStream& rng, double nu, double sigma) {
  require_positive(nu, "t degrees of freedom");
  require_positive(sigma, "t scale");
  const double z = rng.normal();
  // chi^2_nu = 2 * Gamma(nu / 2, 1)
  const double chi2 = 2.0 * std::exp(draw_log_gamma_variate(rng, 0.5 * nu));
  return sigma * z / std::sqrt(chi2 / nu);
}

double draw_normal(RngStream& rng, double mean, double sd) {
  require_positive(sd, "normal sd");
  return mean + sd * rng.normal();
}

std::size_t draw_categorical_log(RngStream& rng, std::span<const double> log_weights) {
  if (log_weights.empty()) throw std::invalid_argument("categorical: no candidates");
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m)) throw std::invalid_argument("categorical: no finite weight");
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - m);
  double target = rng.uniform() * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    target -= std::exp(log_weights[k] - m);
    if (target <= 0.0) return k;
  }
  // Rounding can leave a sliver of mass; give it to the last positive weight.
  for (std::size_t k = log_weights.size(); k-- > 0;) {
    if (std::isfinite(log_weights[k])) return k;
  }
  return log_weights.size() - 1;
}

double log_density_beta(double x, double a, double b) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

double log_density_gamma(double x, double shape, double rate) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_density_dirichlet(std::span<const double> p, std::span<const double> concentrations) {
  if (p.size() != concentrations.size()) throw std::invalid_argument("dirichlet: size mismatch");
  double total_conc = 0.0;
  double out = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    require_positive(concentrations[k], "dirichlet concentration");
    if (!(p[k] > 0.0)) return -std::numeric_limits<double>::infinity();
    total_conc += concentrations[k];
    out += (concentrations[k] - 1.0) * std::log(p[k]) - log_gamma(concentrations[k]);
  }
  return out + log_gamma(total_conc);
}

double log_kernel_student_t(double x, double nu, double sigma) {
  const double r = x / sigma;
  return -0.5 * (nu + 1.0) * std::log1p(r * r / nu);
}

double log_normaliser_student_t(double nu, double sigma) {
  require_positive(nu, "t degrees of freedom");
  require_positive(sigma, "t scale");
  return log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         std::log(sigma);
}

double log_density_student_t_scaled(double x, double nu, double sigma) {
  return log_normaliser_student_t(nu, sigma) + log_kernel_student_t(x, nu, sigma);
}

double log_density_bernoulli_logit(int y, double eta) {
  return (y == 1 ? eta : 0.0) - log1p_exp(eta);
}

}  // namespace fsbdp
