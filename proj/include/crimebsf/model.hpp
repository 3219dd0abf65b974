#pragma once
// Model specification, QR decorrelation, posterior sampling and prediction.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crimebsf/connectivity.hpp"
#include "crimebsf/log_posterior.hpp"
#include "crimebsf/nuts.hpp"
#include "crimebsf/parallel.hpp"

namespace crimebsf {

struct SamplerSettings {
    int chains = 4;
    int warmup = 15000;
    int iterations = 5000;
    std::uint64_t seed = 1;
    double max_rhat = 1.05;
    double max_divergence_fraction = 0.001;
    // Throw when R-hat or the divergence fraction exceed their limits.
    bool require_convergence = true;
    int max_depth = 10;
    double target_accept = 0.8;
    Backend backend = Backend::OpenMP;

    static SamplerSettings paper() { return {}; }
    static SamplerSettings desk() {
        SamplerSettings s;
        s.warmup = 1000;
        s.iterations = 1000;
        return s;
    }
};

struct ModelSpec {
    Variant variant = Variant::BSF;
    std::string feature_selection = "Full";
    ConnectivityKind connectivity = ConnectivityKind::Contiguity;
    double corehood_radius_m = 804.672;
    double eigen_threshold = 0.25;
    SamplerSettings sampler;
    PriorConfig prior;

    [[nodiscard]] std::string label() const;
};

struct QrTransform {
    Eigen::MatrixXd Q_star;      // N x P, columns with unit sample variance
    Eigen::MatrixXd R_star;      // P x P upper triangular
    Eigen::MatrixXd R_star_inv;  // maps beta_tilde to beta

    [[nodiscard]] Eigen::VectorXd to_beta(const Eigen::VectorXd& beta_tilde) const { return R_star_inv * beta_tilde; }
    [[nodiscard]] Eigen::VectorXd to_beta_tilde(const Eigen::VectorXd& beta) const { return R_star * beta; }
};

// Thin QR with positive diagonal; X = Q_star R_star.
QrTransform qr_decorrelate(const Eigen::MatrixXd& X);

// Everything the sampler needs besides the spec.
struct ModelInputs {
    std::vector<int> y;
    Eigen::MatrixXd X;  // standardized features, N x P
    std::vector<std::string> feature_names;
    Eigen::MatrixXd E;        // eigenbasis (empty for NB_RIDGE)
    Eigen::VectorXd lambdas;  // its eigenvalues
    Eigen::MatrixXd Q;        // Laplacian of the connectivity matrix (BSF)
};

struct PosteriorSamples {
    Variant variant = Variant::NB_RIDGE;
    std::vector<std::string> names;  // columns of draws (constrained scale, beta on feature scale)
    Eigen::MatrixXd draws;           // S x D
    Eigen::MatrixXd pointwise_loglik;  // S x N
    std::vector<int> chain_ids;      // per draw
    std::uint64_t seed = 0;
    int chains = 0;
    int iterations = 0;
    int num_beta = 0;
    int num_gamma = 0;
    std::vector<double> rhat;  // per column of draws
    double max_rhat = 0.0;
    int divergences = 0;
    int warmup_divergences = 0;
    int max_depth_hits = 0;
    std::vector<double> step_sizes;
    double runtime_seconds = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::optional<Eigen::Index> column(const std::string& name) const;
    [[nodiscard]] Eigen::VectorXd beta0() const { return draws.col(0); }
    [[nodiscard]] Eigen::MatrixXd beta() const { return draws.middleCols(1, num_beta); }
    [[nodiscard]] Eigen::VectorXd phi() const;
    [[nodiscard]] Eigen::MatrixXd gamma() const;
    [[nodiscard]] std::vector<std::string> beta_names() const;
};

// Builds the log posterior on the decorrelated design.
LogPosterior make_log_posterior(const ModelSpec& spec, const ModelInputs& in, const QrTransform& qr,
                                Backend backend = Backend::Serial);

PosteriorSamples sample_posterior(const ModelSpec& spec, const ModelInputs& in);

struct Prediction {
    Eigen::VectorXd mean;     // posterior mean of mu
    Eigen::VectorXd lower;    // 5% quantile
    Eigen::VectorXd upper;    // 95% quantile
    Eigen::VectorXd fixed;    // posterior mean of exp(beta0 + X beta)
    Eigen::VectorXd random;   // posterior mean of exp(E gamma); ones when E is omitted
    Eigen::MatrixXd mu_draws; // S x N
};

// X_new must be standardized with the training statistics, columns in fit order.
Prediction predict(const PosteriorSamples& fit, const Eigen::MatrixXd& X_new, const Eigen::MatrixXd* E_new = nullptr);

// Empirical quantile with linear interpolation.
double quantile(std::vector<double> v, double q);

}  // namespace crimebsf
