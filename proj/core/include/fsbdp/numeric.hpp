#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace fsbdp {

/// Natural log of the gamma function for x > 0.
///
/// Lanczos approximation (g = 607/128, 15 terms) with reflection below 0.5.
/// Reentrant, unlike glibc's lgamma which writes the global `signgam`.
double log_gamma(double x);

inline double log_beta_fn(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Inverse logit.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_sum_exp(std::span<const double> values);

/// 64-bit FNV-1a, used to fingerprint datasets across runs.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace fsbdp
