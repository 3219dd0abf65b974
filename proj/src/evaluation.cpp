#include "crimebsf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crimebsf/errors.hpp"
#include "crimebsf/nb2.hpp"

namespace crimebsf {

namespace {

double sample_variance(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

double y_mean(const std::vector<int>& y) {
    return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

}  // namespace

R2Result r2_nakagawa(const ModelFit& fit) {
    const auto& s = fit.samples;
    const double ybar = y_mean(fit.y);
    if (!(ybar > 0.0)) throw InputError("mean count is zero; R^2 undefined");
    const Eigen::Index S = s.draws.rows();
    const Eigen::MatrixXd fixed = fit.X * s.beta().transpose();  // N x S
    Eigen::MatrixXd random;
    const bool spatial = s.num_gamma > 0 && fit.E.cols() == s.num_gamma;
    if (spatial) random = fit.E * s.gamma().transpose();
    const Eigen::VectorXd phi = s.phi();
    R2Result r;
    double sf_sum = 0.0, sr_sum = 0.0, se_sum = 0.0;
    for (Eigen::Index k = 0; k < S; ++k) {
        const double sf = sample_variance(fixed.col(k));
        const double sr = spatial ? sample_variance(random.col(k)) : 0.0;
        const double se = std::log(1.0 + 1.0 / ybar + 1.0 / phi(k));
        const double tot = sf + sr + se;
        r.marginal += sf / tot;
        r.conditional += (sf + sr) / tot;
        sf_sum += sf;
        sr_sum += sr;
        se_sum += se;
    }
    r.marginal /= static_cast<double>(S);
    r.conditional /= static_cast<double>(S);
    const double tot = sf_sum + sr_sum + se_sum;
    r.marginal_of_means = sf_sum / tot;
    r.conditional_of_means = (sf_sum + sr_sum) / tot;
    return r;
}

GpdFit gpd_fit(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 2) throw InputError("gpd_fit needs at least 2 values");
    const double prior = 3.0;
    const std::size_t m = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    const double xstar = x[static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5)) - 1];
    const double xmax = x[n - 1];
    std::vector<double> theta(m), ltheta(m);
    for (std::size_t j = 0; j < m; ++j) {
        theta[j] = 1.0 / xmax + (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j + 1) - 0.5))) /
                                    prior / xstar;
        const double a = -theta[j];
        double k = 0.0;
        for (double v : x) k += std::log1p(a * v);
        k /= static_cast<double>(n);
        ltheta[j] = static_cast<double>(n) * (std::log(a / k) - k - 1.0);
    }
    double lmax = -std::numeric_limits<double>::infinity();
    for (double l : ltheta)
        if (std::isfinite(l)) lmax = std::max(lmax, l);
    double wsum = 0.0, theta_hat = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = std::isfinite(ltheta[j]) ? std::exp(ltheta[j] - lmax) : 0.0;
        wsum += w;
        theta_hat += w * theta[j];
    }
    theta_hat /= wsum;
    double k = 0.0;
    for (double v : x) k += std::log1p(-theta_hat * v);
    k /= static_cast<double>(n);
    GpdFit fit;
    fit.sigma = -k / theta_hat;
    const double a = 10.0;
    const double nn = static_cast<double>(n);
    fit.k = k * nn / (nn + a) + a * 0.5 / (nn + a);
    if (std::isnan(fit.k)) fit.k = std::numeric_limits<double>::infinity();
    return fit;
}

PsisWeights psis_smooth(const Eigen::VectorXd& log_ratios) {
    const Eigen::Index S = log_ratios.size();
    PsisWeights out;
    Eigen::VectorXd lw = log_ratios.array() - log_ratios.maxCoeff();
    const auto tail_len = static_cast<Eigen::Index>(
        std::ceil(std::min(0.2 * static_cast<double>(S), 3.0 * std::sqrt(static_cast<double>(S)))));
    if (tail_len >= 5 && tail_len < S) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(S));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return lw(a) < lw(b); });
        const std::size_t first_tail = static_cast<std::size_t>(S - tail_len);
        const double tail_min = lw(order[first_tail]);
        const double tail_max = lw(order.back());
        if (std::abs(tail_max - tail_min) >= std::numeric_limits<double>::epsilon() / 100.0) {
            const double cutoff = lw(order[first_tail - 1]);
            const double exp_cutoff = std::exp(cutoff);
            std::vector<double> x;
            x.reserve(static_cast<std::size_t>(tail_len));
            for (std::size_t j = first_tail; j < order.size(); ++j) x.push_back(std::exp(lw(order[j])) - exp_cutoff);
            const GpdFit g = gpd_fit(x);
            out.k = g.k;
            if (std::isfinite(g.k)) {
                for (Eigen::Index j = 0; j < tail_len; ++j) {
                    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail_len);
                    const double q = g.sigma * std::expm1(-g.k * std::log1p(-p)) / g.k + exp_cutoff;
                    lw(order[first_tail + static_cast<std::size_t>(j)]) = std::log(q);
                }
            }
        }
    }
    // Truncate at the largest raw log weight (zero after the shift).
    lw = lw.cwiseMin(0.0);
    out.log_weights = lw.array() - log_sum_exp(lw);
    return out;
}

LooResult psis_loo(const Eigen::MatrixXd& ll) {
    const Eigen::Index S = ll.rows();
    const Eigen::Index N = ll.cols();
    if (S < 100) throw InputError("PSIS-LOO needs at least 100 draws");
    LooResult r;
    r.pointwise.resize(N);
    r.pareto_k.resize(N);
    r.lpd.resize(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::VectorXd col = ll.col(i);
        if (!col.allFinite()) throw ComputeError("non-finite log likelihood for unit " + std::to_string(i));
        const PsisWeights w = psis_smooth(-col);
        r.pointwise(i) = log_sum_exp(w.log_weights + col);
        r.pareto_k(i) = w.k;
        r.lpd(i) = log_sum_exp(col) - std::log(static_cast<double>(S));
        if (w.k > 0.7) ++r.bad_k;
    }
    r.elpd = r.pointwise.sum();
    const double mean = r.pointwise.mean();
    r.se = std::sqrt(static_cast<double>(N) * (r.pointwise.array() - mean).square().sum() / static_cast<double>(N - 1));
    return r;
}

Decomposition decompose(const ModelFit& fit) {
    const bool spatial = fit.samples.num_gamma > 0;
    const Prediction p = predict(fit.samples, fit.X, spatial ? &fit.E : nullptr);
    Decomposition d;
    d.fixed = p.fixed;
    d.random = p.random;
    d.mu = p.mean;
    d.residual.resize(p.mean.size());
    for (Eigen::Index i = 0; i < p.mean.size(); ++i) d.residual(i) = fit.y[static_cast<std::size_t>(i)] - p.mean(i);
    return d;
}

EvaluationReport evaluate(const ModelFit& fit, int permutation_replicates) {
    EvaluationReport r;
    r.label = fit.spec.label();
    r.r2 = r2_nakagawa(fit);
    r.loo = psis_loo(fit.samples.pointwise_loglik);
    r.decomposition = decompose(fit);
    if (fit.W.rows() == static_cast<Eigen::Index>(fit.y.size()) && fit.W.sum() > 0.0) {
        r.residual_moran = morans_i_residuals(r.decomposition.residual, fit.W);
        if (permutation_replicates >= 2)
            r.residual_moran_reference =
                residual_moran_permutation(r.decomposition.residual, fit.W, permutation_replicates, fit.samples.seed);
    }
    r.max_rhat = fit.samples.max_rhat;
    r.divergences = fit.samples.divergences;
    r.runtime_seconds = fit.samples.runtime_seconds;
    return r;
}

std::vector<ComparisonRow> compare_models(const std::vector<const ModelFit*>& fits,
                                          const std::vector<EvaluationReport>& reports) {
    if (fits.size() != reports.size()) throw InputError("one report per fit expected");
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (fits[i]->y != fits[0]->y) throw InputError("fits were made on different count data");
        const auto& f = *fits[i];
        const auto& e = reports[i];
        rows.push_back({f.spec.feature_selection, f.spec.variant, f.spec.connectivity, f.spec.corehood_radius_m,
                        e.r2.marginal, e.r2.conditional, e.loo.elpd, e.loo.se, e.residual_moran, e.loo.bad_k});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.loo_elpd > b.loo_elpd; });
    return rows;
}

TransferReport fixed_effects_score(const ModelFit& fit, const Eigen::MatrixXd& X, const std::vector<int>& y) {
    if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw InputError("counts do not match feature rows");
    const Prediction p = predict(fit.samples, X, nullptr);
    const Eigen::VectorXd phi = fit.samples.phi();
    const Eigen::Index S = p.mu_draws.rows();
    const Eigen::Index N = X.rows();
    TransferReport t;
    t.prediction = p.mean;
    t.pointwise_log_score.resize(N);
    Eigen::VectorXd lp(S);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index s = 0; s < S; ++s) lp(s) = nb2_logpmf(y[static_cast<std::size_t>(i)], p.mu_draws(s, i), phi(s));
        t.pointwise_log_score(i) = log_sum_exp(lp) - std::log(static_cast<double>(S));
    }
    t.log_score = t.pointwise_log_score.sum();
    const double ybar = y_mean(y);
    double sse = 0.0, sst = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const double yi = y[static_cast<std::size_t>(i)];
        sse += (yi - p.mean(i)) * (yi - p.mean(i));
        sst += (yi - ybar) * (yi - ybar);
    }
    t.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    return t;
}

TransferReport transfer_evaluate(const ModelFit& fit_a, const RawFeatureTable& raw_b, const std::vector<int>& y_b) {
    std::string missing;
    for (const auto& n : fit_a.feature_names)
        if (!raw_b.column(n)) missing += " " + n;
    if (!missing.empty()) throw InputError("target city lacks features:" + missing);
    FeatureSelection sel;
    sel.names = fit_a.feature_names;
    sel.label = "transfer";
    const FeatureMatrix fm = select_features(raw_b, sel);
    if (fm.names != fit_a.feature_names)
        throw InputError("target city has constant columns among the fit's features");
    return fixed_effects_score(fit_a, fm.X, y_b);
}

}  // namespace crimebsf
