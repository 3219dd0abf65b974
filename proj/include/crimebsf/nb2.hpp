#pragma once
// Negative binomial in mean/shape form: Var[Y] = mu + mu^2 / phi.

#include <random>

namespace crimebsf {

// Throws ComputeError when mu or phi is not positive or y is negative.
double nb2_logpmf(int y, double mu, double phi);

// lgamma(y + phi) - lgamma(phi) - lgamma(y + 1), accurate for large phi.
double nb2_log_coef(int y, double phi);

// digamma(y + phi) - digamma(phi), accurate for large phi.
double nb2_digamma_diff(int y, double phi);

// log(1 + exp(x)) without overflow.
double softplus(double x);

// Gamma-Poisson mixture draw.
int nb2_sample(std::mt19937_64& rng, double mu, double phi);

}  // namespace crimebsf
