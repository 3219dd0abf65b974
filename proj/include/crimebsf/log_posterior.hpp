#pragma once
// Joint log density of the four model variants on the unconstrained scale.
//
// Parameter layout:
//   [beta0, beta_tilde (P), log tau, log phi, gamma (L), log rho, logit(nu / 2), log omega]
// where gamma and log rho are absent for NB_RIDGE, the nu slot exists only for
// ESF and the omega slot only for RE_ESF. Jacobians of the transforms are included.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "crimebsf/parallel.hpp"

namespace crimebsf {

enum class Variant { NB_RIDGE, BSF, ESF, RE_ESF };

std::string to_string(Variant v);
std::optional<Variant> parse_variant(const std::string& s);

struct PriorConfig {
    // rho ~ Gamma(shape, rate) when true, Gamma(shape, scale) otherwise (BSF).
    bool rho_rate_parameterization = true;
    double rho_shape = 0.5;
    double rho_param = 2000.0;
    double phi_scale = 5.0;   // phi ~ half-Cauchy(0, phi_scale)
    double tau_scale = 1.0;   // tau ~ half-Cauchy(0, tau_scale)
    double nu_shape = 2.0;    // nu ~ Gamma(nu_shape, rate nu_rate) truncated to (0, nu_max)
    double nu_rate = 0.1;
    double nu_max = 2.0;
    double omega_inv_shape = 2.0;  // 1/omega ~ Gamma(shape, rate)
    double omega_inv_rate = 5.0;
};

struct ModelData {
    std::vector<int> y;
    Eigen::MatrixXd X;        // N x P design (the decorrelated one when fitting)
    Eigen::MatrixXd E;        // N x L (empty for NB_RIDGE)
    Eigen::VectorXd lambdas;  // L eigenvalues (ESF, RE_ESF)
    Eigen::MatrixXd K;        // L x L, E'QE (BSF)
};

struct ModelParams {
    double beta0 = 0.0;
    Eigen::VectorXd beta;  // on the scale of ModelData::X
    double tau = 1.0;
    double phi = 1.0;
    Eigen::VectorXd gamma;
    double rho = 1.0;
    double nu = 1.0;
    double omega = 1.0;
};

// RE-ESF variance multipliers (sum lambda / sum lambda^omega) * lambda^omega.
Eigen::VectorXd reesf_multipliers(const Eigen::VectorXd& lambdas, double omega);

class LogPosterior {
public:
    LogPosterior(Variant variant, ModelData data, PriorConfig prior = {}, Backend backend = Backend::Serial);

    [[nodiscard]] Variant variant() const { return variant_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int num_beta() const { return P_; }
    [[nodiscard]] int num_gamma() const { return L_; }
    [[nodiscard]] const ModelData& data() const { return data_; }
    [[nodiscard]] const PriorConfig& prior() const { return prior_; }
    [[nodiscard]] std::vector<std::string> parameter_names() const;

    // Offsets into the unconstrained vector.
    [[nodiscard]] int idx_beta0() const { return 0; }
    [[nodiscard]] int idx_beta() const { return 1; }
    [[nodiscard]] int idx_log_tau() const { return 1 + P_; }
    [[nodiscard]] int idx_log_phi() const { return 2 + P_; }
    [[nodiscard]] int idx_gamma() const { return 3 + P_; }
    [[nodiscard]] int idx_log_rho() const { return 3 + P_ + L_; }
    [[nodiscard]] int idx_nu() const { return 4 + P_ + L_; }
    [[nodiscard]] int idx_log_omega() const { return 4 + P_ + L_; }

    // Log density and gradient; may return a non-finite value (no throw).
    double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;

    // Log density; throws ComputeError naming the offending block when non-finite.
    [[nodiscard]] double log_density(const Eigen::VectorXd& theta) const;

    // Sum of the count log likelihood alone.
    [[nodiscard]] double log_likelihood(const Eigen::VectorXd& theta) const;
    [[nodiscard]] Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& theta) const;
    [[nodiscard]] Eigen::VectorXd linear_predictor(const Eigen::VectorXd& theta) const;

    [[nodiscard]] ModelParams unpack(const Eigen::VectorXd& theta) const;
    [[nodiscard]] Eigen::VectorXd pack(const ModelParams& p) const;

private:
    struct Terms {
        double likelihood, beta, tau, phi, gamma, hyper;
    };
    Terms terms(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::VectorXd* pointwise) const;

    Variant variant_;
    ModelData data_;
    PriorConfig prior_;
    Backend backend_;
    int N_ = 0, P_ = 0, L_ = 0, dim_ = 0;
    std::vector<double> y_real_;
    std::vector<int> y_index_;
    std::vector<int> distinct_;
    Eigen::VectorXd log_lambdas_;
};

}  // namespace crimebsf
