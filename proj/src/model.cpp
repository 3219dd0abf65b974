#include "crimebsf/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>

#include "crimebsf/csv.hpp"
#include "crimebsf/diagnostics.hpp"
#include "crimebsf/errors.hpp"

namespace crimebsf {

std::string ModelSpec::label() const {
    std::ostringstream os;
    os << feature_selection << "/" << to_string(variant) << "/" << to_string(connectivity) << "/r="
       << format_double(corehood_radius_m);
    return os.str();
}

QrTransform qr_decorrelate(const Eigen::MatrixXd& X) {
    const auto n = X.rows();
    const auto p = X.cols();
    QrTransform t;
    if (p == 0) {
        t.Q_star.resize(n, 0);
        t.R_star.resize(0, 0);
        t.R_star_inv.resize(0, 0);
        return t;
    }
    if (n <= p) throw InputError("QR decorrelation needs more units than features");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const double scale = R.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(std::abs(R(j, j)) > 1e-10 * scale))
            throw InputError("feature matrix is rank deficient at column " + std::to_string(j));
        if (R(j, j) < 0.0) {
            R.row(j) *= -1.0;
            Q.col(j) *= -1.0;
        }
    }
    const double s = std::sqrt(static_cast<double>(n - 1));
    t.Q_star = Q * s;
    t.R_star = R / s;
    t.R_star_inv = t.R_star.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    return t;
}

std::optional<Eigen::Index> PosteriorSamples::column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return static_cast<Eigen::Index>(j);
    return std::nullopt;
}

Eigen::VectorXd PosteriorSamples::phi() const { return draws.col(*column("phi")); }

Eigen::MatrixXd PosteriorSamples::gamma() const {
    if (num_gamma == 0) return Eigen::MatrixXd::Zero(draws.rows(), 0);
    return draws.middleCols(*column("gamma[0]"), num_gamma);
}

std::vector<std::string> PosteriorSamples::beta_names() const {
    std::vector<std::string> out;
    for (int j = 0; j < num_beta; ++j) {
        const std::string& n = names[static_cast<std::size_t>(1 + j)];
        out.push_back(n.substr(5, n.size() - 6));  // strip "beta[" and "]"
    }
    return out;
}

namespace {

void validate_inputs(const ModelSpec& spec, const ModelInputs& in) {
    const auto n = static_cast<Eigen::Index>(in.y.size());
    if (n == 0) throw InputError("no observations");
    if (in.X.rows() != n) throw InputError("feature rows do not match counts");
    if (static_cast<Eigen::Index>(in.feature_names.size()) != in.X.cols())
        throw InputError("feature names do not match feature columns");
    const auto& s = spec.sampler;
    if (s.chains < 2) throw InputError("sampler needs at least 2 chains");
    if (s.warmup <= 0 || s.iterations <= 0) throw InputError("warmup and iterations must be positive");
    if (spec.variant != Variant::NB_RIDGE) {
        if (in.E.cols() == 0) throw InputError(to_string(spec.variant) + " requires an eigenbasis");
        if (in.E.rows() != n) throw InputError("eigenbasis rows do not match counts");
    }
    if (spec.variant == Variant::BSF && (in.Q.rows() != n || in.Q.cols() != n))
        throw InputError("BSF requires the connectivity Laplacian");
}

std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

Eigen::VectorXd initial_point(const LogPosterior& lp, double ybar, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::VectorXd theta(lp.dim());
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = u(rng);
        theta(0) = std::log(ybar + 0.5) + 0.5 * u(rng);
        Eigen::VectorXd g;
        const double v = lp.evaluate(theta, &g);
        if (std::isfinite(v) && g.allFinite()) return theta;
    }
    throw ComputeError("no finite initial point found in 100 attempts");
}

}  // namespace

LogPosterior make_log_posterior(const ModelSpec& spec, const ModelInputs& in, const QrTransform& qr,
                                Backend backend) {
    ModelData d;
    d.y = in.y;
    d.X = qr.Q_star;
    if (spec.variant != Variant::NB_RIDGE) {
        d.E = in.E;
        d.lambdas = in.lambdas;
    }
    if (spec.variant == Variant::BSF) {
        Eigen::MatrixXd K = in.E.transpose() * in.Q * in.E;
        K = 0.5 * (K + K.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().maxCoeff();
        if (!(top > 0.0)) throw ComputeError("E'QE is zero; connectivity has no edges within the basis");
        if (es.eigenvalues().minCoeff() <= 1e-9 * top) K.diagonal().array() += 1e-8 * top;
        d.K = K;
    }
    return LogPosterior(spec.variant, std::move(d), spec.prior, backend);
}

PosteriorSamples sample_posterior(const ModelSpec& spec, const ModelInputs& in) {
    validate_inputs(spec, in);
    const auto t_start = std::chrono::steady_clock::now();
    const auto& ss = spec.sampler;
    const QrTransform qr = qr_decorrelate(in.X);
    const LogPosterior lp = make_log_posterior(spec, in, qr, Backend::Serial);
    double ybar = 0.0;
    for (int v : in.y) ybar += v;
    ybar /= static_cast<double>(in.y.size());

    NutsConfig cfg;
    cfg.warmup = ss.warmup;
    cfg.iterations = ss.iterations;
    cfg.max_depth = ss.max_depth;
    cfg.target_accept = ss.target_accept;
    const LogDensityFn f = [&lp](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return lp.evaluate(th, g); };

    std::vector<NutsChain> chains(static_cast<std::size_t>(ss.chains));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(ss.chains));
    const bool parallel = ss.backend == Backend::OpenMP;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (int c = 0; c < ss.chains; ++c) {
        try {
            auto rng = chain_rng(ss.seed, c);
            const Eigen::VectorXd init = initial_point(lp, ybar, rng);
            chains[static_cast<std::size_t>(c)] = run_nuts(f, init, cfg, rng);
        } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    PosteriorSamples out;
    out.variant = spec.variant;
    out.seed = ss.seed;
    out.chains = ss.chains;
    out.iterations = ss.iterations;
    const int P = lp.num_beta();
    const int L = lp.num_gamma();
    out.num_beta = P;
    out.num_gamma = L;
    out.names.push_back("beta0");
    for (const auto& n : in.feature_names) out.names.push_back("beta[" + n + "]");
    out.names.push_back("tau");
    out.names.push_back("phi");
    if (spec.variant != Variant::NB_RIDGE) {
        for (int l = 0; l < L; ++l) out.names.push_back("gamma[" + std::to_string(l) + "]");
        out.names.push_back("rho");
    }
    if (spec.variant == Variant::ESF) out.names.push_back("nu");
    if (spec.variant == Variant::RE_ESF) out.names.push_back("omega");

    const Eigen::Index S = static_cast<Eigen::Index>(ss.chains) * ss.iterations;
    const auto D = static_cast<Eigen::Index>(out.names.size());
    out.draws.resize(S, D);
    Eigen::MatrixXd unconstrained(S, lp.dim());
    for (int c = 0; c < ss.chains; ++c) {
        const auto& ch = chains[static_cast<std::size_t>(c)];
        unconstrained.middleRows(static_cast<Eigen::Index>(c) * ss.iterations, ss.iterations) = ch.draws;
        out.divergences += ch.divergences;
        out.warmup_divergences += ch.warmup_divergences;
        out.max_depth_hits += ch.max_depth_hits;
        out.step_sizes.push_back(ch.step_size);
        for (int i = 0; i < ss.iterations; ++i) out.chain_ids.push_back(c);
    }
    for (Eigen::Index s = 0; s < S; ++s) {
        const ModelParams p = lp.unpack(unconstrained.row(s).transpose());
        Eigen::Index k = 0;
        out.draws(s, k++) = p.beta0;
        if (P > 0) out.draws.block(s, k, 1, P) = qr.to_beta(p.beta).transpose();
        k += P;
        out.draws(s, k++) = p.tau;
        out.draws(s, k++) = p.phi;
        if (spec.variant != Variant::NB_RIDGE) {
            out.draws.block(s, k, 1, L) = p.gamma.transpose();
            k += L;
            out.draws(s, k++) = p.rho;
        }
        if (spec.variant == Variant::ESF) out.draws(s, k++) = p.nu;
        if (spec.variant == Variant::RE_ESF) out.draws(s, k++) = p.omega;
    }

    const auto N = static_cast<Eigen::Index>(in.y.size());
    out.pointwise_loglik.resize(S, N);
#pragma omp parallel for schedule(static) if (parallel)
    for (Eigen::Index s = 0; s < S; ++s)
        out.pointwise_loglik.row(s) = lp.pointwise_loglik(unconstrained.row(s).transpose()).transpose();
    if (!out.pointwise_loglik.allFinite()) throw ComputeError("non-finite pointwise log likelihood in posterior draws");
    if (!out.draws.allFinite()) throw ComputeError("non-finite posterior draws");

    std::vector<Eigen::MatrixXd> per_chain;
    for (int c = 0; c < ss.chains; ++c)
        per_chain.push_back(out.draws.middleRows(static_cast<Eigen::Index>(c) * ss.iterations, ss.iterations));
    if (ss.iterations >= 10) {
        out.rhat = gelman_rubin(per_chain);
        out.max_rhat = *std::max_element(out.rhat.begin(), out.rhat.end());
    }
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    const double div_frac = static_cast<double>(out.divergences) / static_cast<double>(S);
    if (div_frac > ss.max_divergence_fraction) {
        std::ostringstream os;
        os << out.divergences << " of " << S << " post-warmup transitions diverged (limit "
           << ss.max_divergence_fraction * 100 << "%); step sizes:";
        for (double e : out.step_sizes) os << " " << e;
        if (ss.require_convergence) throw ConvergenceError(os.str());
        out.warnings.push_back(os.str());
    }
    if (out.max_rhat > ss.max_rhat) {
        const auto worst = std::max_element(out.rhat.begin(), out.rhat.end()) - out.rhat.begin();
        std::ostringstream os;
        os << "R-hat " << out.max_rhat << " for '" << out.names[static_cast<std::size_t>(worst)] << "' exceeds "
           << ss.max_rhat << " after " << ss.warmup << "/" << ss.iterations << " iterations";
        if (ss.require_convergence) throw ConvergenceError(os.str());
        out.warnings.push_back(os.str());
    }
    return out;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw InputError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Prediction predict(const PosteriorSamples& fit, const Eigen::MatrixXd& X_new, const Eigen::MatrixXd* E_new) {
    if (X_new.cols() != fit.num_beta)
        throw InputError("prediction features have " + std::to_string(X_new.cols()) + " columns, fit expects " +
                         std::to_string(fit.num_beta));
    const bool spatial = E_new != nullptr && fit.num_gamma > 0;
    if (spatial && (E_new->cols() != fit.num_gamma || E_new->rows() != X_new.rows()))
        throw InputError("eigenbasis shape does not match the fit");
    const Eigen::Index S = fit.draws.rows();
    const Eigen::Index N = X_new.rows();
    Eigen::MatrixXd eta_f = (X_new * fit.beta().transpose()).transpose();  // S x N
    eta_f.colwise() += fit.beta0();
    Prediction p;
    const Eigen::MatrixXd fixed = eta_f.array().exp();
    Eigen::MatrixXd random = Eigen::MatrixXd::Ones(S, N);
    if (spatial) random = (fit.gamma() * E_new->transpose()).array().exp();
    p.mu_draws = fixed.cwiseProduct(random);
    p.mean = p.mu_draws.colwise().mean().transpose();
    p.fixed = fixed.colwise().mean().transpose();
    p.random = random.colwise().mean().transpose();
    p.lower.resize(N);
    p.upper.resize(N);
    std::vector<double> col(static_cast<std::size_t>(S));
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index s = 0; s < S; ++s) col[static_cast<std::size_t>(s)] = p.mu_draws(s, i);
        p.lower(i) = quantile(col, 0.05);
        p.upper(i) = quantile(col, 0.95);
    }
    return p;
}

}  // namespace crimebsf
