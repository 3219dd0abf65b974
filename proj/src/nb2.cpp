#include "crimebsf/nb2.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <string>

#include "crimebsf/errors.hpp"

namespace crimebsf {

namespace {

// Use the finite products when lgamma/digamma differences would cancel.
bool use_product(int y, double phi) { return y <= 100 || phi > 1e4 * y; }

}  // namespace

double nb2_log_coef(int y, double phi) {
    if (use_product(y, phi)) {
        double s = 0.0;
        for (int j = 0; j < y; ++j) s += std::log((phi + j) / (j + 1.0));
        return s;
    }
    return std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0);
}

double nb2_digamma_diff(int y, double phi) {
    if (use_product(y, phi)) {
        double s = 0.0;
        for (int j = 0; j < y; ++j) s += 1.0 / (phi + j);
        return s;
    }
    return boost::math::digamma(y + phi) - boost::math::digamma(phi);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double nb2_logpmf(int y, double mu, double phi) {
    if (!(mu > 0.0) || !(phi > 0.0) || !std::isfinite(mu) || !std::isfinite(phi))
        throw ComputeError("nb2_logpmf: mu and phi must be positive and finite (mu=" + std::to_string(mu) +
                           ", phi=" + std::to_string(phi) + ")");
    if (y < 0) throw ComputeError("nb2_logpmf: negative count");
    // log(mu + phi) = log(phi) + sp
    const double t = std::log(mu) - std::log(phi);
    const double sp = softplus(t);
    return nb2_log_coef(y, phi) + y * (t - sp) - phi * sp;
}

int nb2_sample(std::mt19937_64& rng, double mu, double phi) {
    if (!(mu > 0.0) || !(phi > 0.0)) throw ComputeError("nb2_sample: mu and phi must be positive");
    std::gamma_distribution<double> gamma(phi, mu / phi);
    const double lambda = gamma(rng);
    if (!(lambda > 0.0)) return 0;
    std::poisson_distribution<int> pois(lambda);
    return pois(rng);
}

}  // namespace crimebsf
