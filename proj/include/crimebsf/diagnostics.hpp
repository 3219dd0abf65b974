#pragma once
// Spatial autocorrelation, overdispersion and convergence statistics.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crimebsf {

struct TestResult {
    std::string name;
    double statistic = 0.0;
    std::string reference_distribution;
    std::optional<double> p_value;
    std::string verdict;
};

// (N / sum W) z'Wz / z'z on mean-centered values.
double morans_i(const Eigen::VectorXd& values, const Eigen::MatrixXd& W);

// Same form on raw residuals, without centering.
double morans_i_residuals(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& W);

// Reference interval for the residual statistic under random relabeling of
// units. Not a formal test; reported alongside the raw statistic.
struct PermutationInterval {
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
    double mean = 0.0;
    int replicates = 0;
};
PermutationInterval residual_moran_permutation(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& W,
                                               int replicates, std::uint64_t seed);

// Moran's I with a one-sided permutation p-value (upper tail).
TestResult moran_permutation_test(const Eigen::VectorXd& values, const Eigen::MatrixXd& W, int replicates,
                                  std::uint64_t seed, double alpha = 0.05);
// sum (y - ybar)^2 / ybar against chi-square(N - 1).
TestResult potthoff_whittinghill(const std::vector<double>& y, double alpha = 0.05);

// (sum [(y - mu)^2 - y])^2 / (2 sum mu^2) against chi-square(1), mu from a Poisson fit.
TestResult lagrange_multiplier(const std::vector<double>& y, const Eigen::VectorXd& mu, double alpha = 0.05);

// Fitted means of a Poisson GLM with intercept (IRLS).
Eigen::VectorXd poisson_glm_fit(const std::vector<double>& y, const Eigen::MatrixXd& X);

// Split R-hat per column; each chain is iterations x parameters.
std::vector<double> gelman_rubin(const std::vector<Eigen::MatrixXd>& chains);

}  // namespace crimebsf
