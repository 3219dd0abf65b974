#pragma once
// No-U-turn sampler with multinomial trajectory sampling, dual-averaging
// step size adaptation and windowed diagonal metric adaptation.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace crimebsf {

// Returns log density; fills the gradient when the pointer is non-null.
using LogDensityFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct NutsConfig {
    int warmup = 1000;
    int iterations = 1000;
    int max_depth = 10;
    double target_accept = 0.8;
    double gamma = 0.05;
    double kappa = 0.75;
    double t0 = 10.0;
    double max_delta_h = 1000.0;
    int init_buffer = 75;
    int term_buffer = 50;
    int base_window = 25;
};

struct NutsChain {
    Eigen::MatrixXd draws;           // iterations x dim, unconstrained
    std::vector<char> divergent;     // per post-warmup iteration
    std::vector<int> tree_depth;
    int warmup_divergences = 0;
    int divergences = 0;
    int max_depth_hits = 0;
    double step_size = 0.0;
    double mean_accept = 0.0;
    Eigen::VectorXd inv_metric;
    std::int64_t gradient_evals = 0;
};

NutsChain run_nuts(const LogDensityFn& logp, const Eigen::VectorXd& init, const NutsConfig& cfg,
                   std::mt19937_64& rng);

// Stable Welford accumulator for the metric estimate.
class WelfordVariance {
public:
    explicit WelfordVariance(Eigen::Index dim = 0) { restart(dim); }
    void restart(Eigen::Index dim);
    void add(const Eigen::VectorXd& x);
    [[nodiscard]] long count() const { return n_; }
    [[nodiscard]] Eigen::VectorXd sample_variance() const;

private:
    long n_ = 0;
    Eigen::VectorXd mean_, m2_;
};

}  // namespace crimebsf
