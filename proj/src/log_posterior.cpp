#include "crimebsf/log_posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/special_functions/digamma.hpp>

#include "crimebsf/errors.hpp"
#include "crimebsf/kernels.hpp"
#include "crimebsf/nb2.hpp"

namespace crimebsf {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::NB_RIDGE: return "NB_RIDGE";
        case Variant::BSF: return "BSF";
        case Variant::ESF: return "ESF";
        case Variant::RE_ESF: return "RE_ESF";
    }
    return "?";
}

std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "NB_RIDGE" || s == "nb_ridge" || s == "NB") return Variant::NB_RIDGE;
    if (s == "BSF" || s == "bsf") return Variant::BSF;
    if (s == "ESF" || s == "esf") return Variant::ESF;
    if (s == "RE_ESF" || s == "re_esf" || s == "RE-ESF") return Variant::RE_ESF;
    return std::nullopt;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

// log(1 + (x/s)^2) and its derivative with respect to log x.
double half_cauchy_log(double x, double s, double* d_logx) {
    const double r = x / s;
    *d_logx = -2.0 * r * r / (1.0 + r * r);
    return -std::log1p(r * r);
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

Eigen::VectorXd reesf_multipliers(const Eigen::VectorXd& lambdas, double omega) {
    const Eigen::VectorXd logl = lambdas.array().log();
    const Eigen::VectorXd scaled = omega * logl;
    const double log_s0 = log_sum_exp(scaled);
    const double log_sum = std::log(lambdas.sum());
    return (scaled.array() + (log_sum - log_s0)).exp();
}

LogPosterior::LogPosterior(Variant variant, ModelData data, PriorConfig prior, Backend backend)
    : variant_(variant), data_(std::move(data)), prior_(prior), backend_(backend) {
    N_ = static_cast<int>(data_.y.size());
    P_ = static_cast<int>(data_.X.cols());
    if (N_ == 0) throw InputError("no observations");
    if (data_.X.rows() != N_) throw InputError("design matrix rows do not match counts");
    if (variant_ != Variant::NB_RIDGE) {
        L_ = static_cast<int>(data_.E.cols());
        if (L_ == 0) throw InputError(to_string(variant_) + " requires an eigenbasis");
        if (data_.E.rows() != N_) throw InputError("eigenbasis rows do not match counts");
    }
    if (variant_ == Variant::BSF && (data_.K.rows() != L_ || data_.K.cols() != L_))
        throw InputError("BSF requires the L x L matrix E'QE");
    if (variant_ == Variant::ESF || variant_ == Variant::RE_ESF) {
        if (data_.lambdas.size() != L_) throw InputError("eigenvalue count does not match the eigenbasis");
        if ((data_.lambdas.array() <= 0.0).any()) throw InputError("eigenvalues must be positive");
        log_lambdas_ = data_.lambdas.array().log();
    }
    dim_ = 3 + P_;
    if (variant_ != Variant::NB_RIDGE) dim_ += L_ + 1;
    if (variant_ == Variant::ESF || variant_ == Variant::RE_ESF) dim_ += 1;

    std::map<int, int> index;
    for (int v : data_.y) {
        if (v < 0) throw InputError("negative count");
        index.emplace(v, 0);
    }
    for (auto& [v, k] : index) {
        k = static_cast<int>(distinct_.size());
        distinct_.push_back(v);
    }
    y_real_.reserve(data_.y.size());
    for (int v : data_.y) {
        y_real_.push_back(v);
        y_index_.push_back(index[v]);
    }
}

std::vector<std::string> LogPosterior::parameter_names() const {
    std::vector<std::string> n{"beta0"};
    for (int j = 0; j < P_; ++j) n.push_back("beta_tilde[" + std::to_string(j) + "]");
    n.push_back("log_tau");
    n.push_back("log_phi");
    if (variant_ != Variant::NB_RIDGE) {
        for (int l = 0; l < L_; ++l) n.push_back("gamma[" + std::to_string(l) + "]");
        n.push_back("log_rho");
    }
    if (variant_ == Variant::ESF) n.push_back("logit_nu");
    if (variant_ == Variant::RE_ESF) n.push_back("log_omega");
    return n;
}

ModelParams LogPosterior::unpack(const Eigen::VectorXd& theta) const {
    ModelParams p;
    p.beta0 = theta(0);
    p.beta = theta.segment(1, P_);
    p.tau = std::exp(theta(idx_log_tau()));
    p.phi = std::exp(theta(idx_log_phi()));
    if (variant_ != Variant::NB_RIDGE) {
        p.gamma = theta.segment(idx_gamma(), L_);
        p.rho = std::exp(theta(idx_log_rho()));
    }
    if (variant_ == Variant::ESF) p.nu = prior_.nu_max * sigmoid(theta(idx_nu()));
    if (variant_ == Variant::RE_ESF) p.omega = std::exp(theta(idx_log_omega()));
    return p;
}

Eigen::VectorXd LogPosterior::pack(const ModelParams& p) const {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(dim_);
    t(0) = p.beta0;
    if (p.beta.size() == P_) t.segment(1, P_) = p.beta;
    t(idx_log_tau()) = std::log(p.tau);
    t(idx_log_phi()) = std::log(p.phi);
    if (variant_ != Variant::NB_RIDGE) {
        if (p.gamma.size() == L_) t.segment(idx_gamma(), L_) = p.gamma;
        t(idx_log_rho()) = std::log(p.rho);
    }
    if (variant_ == Variant::ESF) {
        const double u = p.nu / prior_.nu_max;
        t(idx_nu()) = std::log(u / (1.0 - u));
    }
    if (variant_ == Variant::RE_ESF) t(idx_log_omega()) = std::log(p.omega);
    return t;
}

Eigen::VectorXd LogPosterior::linear_predictor(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd eta = data_.X * theta.segment(1, P_);
    eta.array() += theta(0);
    if (variant_ != Variant::NB_RIDGE) eta.noalias() += data_.E * theta.segment(idx_gamma(), L_);
    return eta;
}

LogPosterior::Terms LogPosterior::terms(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                                        Eigen::VectorXd* pointwise) const {
    Terms t{};
    if (grad) grad->setZero(dim_);
    const double log_phi = theta(idx_log_phi());
    const double phi = std::exp(log_phi);

    // Likelihood.
    const Eigen::VectorXd eta = linear_predictor(theta);
    std::vector<double> lg(distinct_.size()), dg(distinct_.size());
    const bool phi_ok = phi > 0.0 && std::isfinite(phi);
    for (std::size_t k = 0; k < distinct_.size(); ++k) {
        const int v = distinct_[k];
        lg[k] = phi_ok ? nb2_log_coef(v, phi) : std::numeric_limits<double>::quiet_NaN();
        if (grad && phi_ok) dg[k] = nb2_digamma_diff(v, phi);
    }
    Eigen::VectorXd ll(N_), d_eta(N_), d_phi;
    if (grad) d_phi.resize(N_);
    kernels::Nb2Inputs in{y_real_, y_index_, std::span<const double>(eta.data(), static_cast<std::size_t>(N_)), lg, dg,
                          phi};
    kernels::Nb2Outputs out{std::span<double>(ll.data(), static_cast<std::size_t>(N_)),
                            std::span<double>(d_eta.data(), static_cast<std::size_t>(N_)),
                            grad ? std::span<double>(d_phi.data(), static_cast<std::size_t>(N_)) : std::span<double>()};
    kernels::nb2_terms(backend_, in, out);
    t.likelihood = ll.sum();
    if (pointwise) *pointwise = ll;
    if (grad) {
        (*grad)(0) += d_eta.sum();
        grad->segment(1, P_).noalias() += data_.X.transpose() * d_eta;
        if (variant_ != Variant::NB_RIDGE) grad->segment(idx_gamma(), L_).noalias() += data_.E.transpose() * d_eta;
        (*grad)(idx_log_phi()) += phi * d_phi.sum();
    }

    // beta0 ~ N(0, 1)
    const double b0 = theta(0);
    t.beta = -0.5 * b0 * b0;
    if (grad) (*grad)(0) += -b0;

    // beta_tilde | tau ~ N(0, tau^2), tau ~ C+(0, s)
    const double log_tau = theta(idx_log_tau());
    const double tau = std::exp(log_tau);
    const auto bt = theta.segment(1, P_);
    const double ss = bt.squaredNorm();
    const double inv_tau2 = std::exp(-2.0 * log_tau);
    t.beta += -P_ * log_tau - 0.5 * ss * inv_tau2;
    double dhc = 0.0;
    t.tau = half_cauchy_log(tau, prior_.tau_scale, &dhc) + log_tau;
    if (grad) {
        grad->segment(1, P_) += -bt * inv_tau2;
        (*grad)(idx_log_tau()) += -P_ + ss * inv_tau2 + dhc + 1.0;
    }

    // phi ~ C+(0, s)
    t.phi = half_cauchy_log(phi, prior_.phi_scale, &dhc) + log_phi;
    if (grad) (*grad)(idx_log_phi()) += dhc + 1.0;

    if (variant_ == Variant::NB_RIDGE) return t;

    const auto g = theta.segment(idx_gamma(), L_);
    const double log_rho = theta(idx_log_rho());
    const double rho = std::exp(log_rho);
    const int ir = idx_log_rho();

    if (variant_ == Variant::BSF) {
        // gamma ~ N(0, (rho K)^-1), rho ~ Gamma(a, b)
        const Eigen::VectorXd Kg = data_.K * g;
        const double q = g.dot(Kg);
        t.gamma = 0.5 * L_ * log_rho - 0.5 * rho * q;
        const double a = prior_.rho_shape;
        const double b = prior_.rho_rate_parameterization ? prior_.rho_param : 1.0 / prior_.rho_param;
        t.hyper = a * log_rho - b * rho;
        if (grad) {
            grad->segment(idx_gamma(), L_) += -rho * Kg;
            (*grad)(ir) += 0.5 * L_ - 0.5 * rho * q + a - b * rho;
        }
        return t;
    }

    if (variant_ == Variant::ESF) {
        // gamma_l ~ N(0, rho^2 lambda_l), rho^-2 ~ Gamma(nu/2, nu/2), nu ~ Gamma(a, b) on (0, nu_max)
        const double z = theta(idx_nu());
        const double u = sigmoid(z);
        const double nu = prior_.nu_max * u;
        const double s = std::exp(-2.0 * log_rho);
        const double wsum = (g.array().square() / data_.lambdas.array()).sum();
        t.gamma = -L_ * log_rho - 0.5 * wsum * s - 0.5 * log_lambdas_.sum();
        const double h = 0.5 * nu;
        t.hyper = h * std::log(h) - std::lgamma(h) - nu * log_rho - h * s;
        t.hyper += (prior_.nu_shape - 1.0) * std::log(nu) - prior_.nu_rate * nu;
        // Jacobian of nu = nu_max * sigmoid(z)
        t.hyper += std::log(prior_.nu_max) + std::log(u) + std::log1p(-u);
        if (grad) {
            grad->segment(idx_gamma(), L_) += -(g.array() / data_.lambdas.array()).matrix() * s;
            (*grad)(ir) += -L_ + wsum * s - nu + nu * s;
            const double d_nu = 0.5 * std::log(h) + 0.5 - 0.5 * boost::math::digamma(h) - log_rho - 0.5 * s +
                                (prior_.nu_shape - 1.0) / nu - prior_.nu_rate;
            (*grad)(idx_nu()) += d_nu * prior_.nu_max * u * (1.0 - u) + (1.0 - 2.0 * u);
        }
        return t;
    }

    // RE_ESF: gamma_l ~ N(0, rho^2 Lambda_l(omega)), rho ~ C+(0, 1), 1/omega ~ Gamma(a, b)
    const double w = theta(idx_log_omega());
    const double omega = std::exp(w);
    const Eigen::VectorXd scaled = omega * log_lambdas_;
    const double log_s0 = log_sum_exp(scaled);
    const double log_sum = std::log(data_.lambdas.sum());
    const Eigen::VectorXd log_mult = scaled.array() + (log_sum - log_s0);
    const Eigen::VectorXd inv_mult = (-log_mult.array()).exp();
    const double s = std::exp(-2.0 * log_rho);
    const Eigen::ArrayXd g2 = g.array().square();
    t.gamma = -L_ * log_rho - 0.5 * log_mult.sum() - 0.5 * s * (g2 * inv_mult.array()).sum();
    t.hyper = half_cauchy_log(rho, 1.0, &dhc) + log_rho;
    const double a = prior_.omega_inv_shape;
    const double b = prior_.omega_inv_rate;
    t.hyper += -a * w - b * std::exp(-w);
    if (grad) {
        grad->segment(idx_gamma(), L_) += -(g.array() * inv_mult.array()).matrix() * s;
        (*grad)(ir) += -L_ + s * (g2 * inv_mult.array()).sum() + dhc + 1.0;
        // d log Lambda_l / d omega = log lambda_l - softmax-weighted mean of log lambda
        const Eigen::VectorXd wts = (scaled.array() - log_s0).exp();
        const double mean_log = wts.dot(log_lambdas_);
        const Eigen::ArrayXd dlog = log_lambdas_.array() - mean_log;
        const double d_omega = ((-0.5 + 0.5 * s * g2 * inv_mult.array()) * dlog).sum();
        (*grad)(idx_log_omega()) += omega * d_omega - a + b * std::exp(-w);
    }
    return t;
}

double LogPosterior::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    const Terms t = terms(theta, grad, nullptr);
    return t.likelihood + t.beta + t.tau + t.phi + t.gamma + t.hyper;
}

double LogPosterior::log_density(const Eigen::VectorXd& theta) const {
    if (theta.size() != dim_) throw InputError("parameter vector has the wrong length");
    const Terms t = terms(theta, nullptr, nullptr);
    const std::pair<const char*, double> blocks[] = {{"likelihood", t.likelihood}, {"beta", t.beta},
                                                     {"tau", t.tau},               {"phi", t.phi},
                                                     {"gamma", t.gamma},           {"hyperparameters", t.hyper}};
    for (const auto& [name, v] : blocks)
        if (!std::isfinite(v)) throw ComputeError(std::string("non-finite log density in block '") + name + "'");
    return t.likelihood + t.beta + t.tau + t.phi + t.gamma + t.hyper;
}

double LogPosterior::log_likelihood(const Eigen::VectorXd& theta) const { return terms(theta, nullptr, nullptr).likelihood; }

Eigen::VectorXd LogPosterior::pointwise_loglik(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd pw;
    terms(theta, nullptr, &pw);
    return pw;
}

}  // namespace crimebsf
