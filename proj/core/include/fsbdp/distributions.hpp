#pragma once

#include <span>
#include <vector>

#include "fsbdp/rng.hpp"

namespace fsbdp {

// Samplers. Non-positive or non-finite parameters throw std::invalid_argument.

/// Beta(a, b), result strictly inside (0, 1).
double draw_beta(RngStream& rng, double a, double b);
/// Gamma with shape/rate parametrisation; valid for any shape > 0.
double draw_gamma(RngStream& rng, double shape, double rate);
/// Dirichlet with the given concentrations; the result sums to 1.
std::vector<double> draw_dirichlet(RngStream& rng, std::span<const double> concentrations);
/// Symmetric Dirichlet(a, ..., a) of length k.
std::vector<double> draw_dirichlet_symmetric(RngStream& rng, double a, std::size_t k);
/// Student-t with `nu` degrees of freedom, location 0 and scale `sigma`.
double draw_student_t_scaled(RngStream& rng, double nu, double sigma);
double draw_normal(RngStream& rng, double mean, double sd);
/// Index drawn with probability proportional to exp(log_weights[k]).
std::size_t draw_categorical_log(RngStream& rng, std::span<const double> log_weights);

/// Log of a Gamma(shape, 1) variate, computed without underflow for small shapes.
double draw_log_gamma_variate(RngStream& rng, double shape);

// Normalised log densities.

double log_density_beta(double x, double a, double b);
double log_density_gamma(double x, double shape, double rate);
double log_density_dirichlet(std::span<const double> p, std::span<const double> concentrations);
double log_density_student_t_scaled(double x, double nu, double sigma);
/// log P(Y = y) for a Bernoulli with logit-linear predictor `eta`.
double log_density_bernoulli_logit(int y, double eta);

/// Student-t log kernel -(nu+1)/2 log((nu + x^2/sigma^2)/nu); the density
/// without its normalising constant.
double log_kernel_student_t(double x, double nu, double sigma);
/// The constant dropped by log_kernel_student_t.
double log_normaliser_student_t(double nu, double sigma);

}  // namespace fsbdp
