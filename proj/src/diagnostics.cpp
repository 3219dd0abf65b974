#include "crimebsf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "crimebsf/errors.hpp"

namespace crimebsf {

namespace {

void check_square(const Eigen::VectorXd& v, const Eigen::MatrixXd& W) {
    if (W.rows() != v.size() || W.cols() != v.size()) throw InputError("weights matrix does not match vector length");
}

double chi2_upper(double stat, double df) {
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, std::max(0.0, stat)));
}

std::string verdict(double p, double alpha) {
    return p < alpha ? "overdispersion: reject equidispersion at alpha=" + std::to_string(alpha)
                     : "no evidence against equidispersion at alpha=" + std::to_string(alpha);
}

}  // namespace

double morans_i(const Eigen::VectorXd& values, const Eigen::MatrixXd& W) {
    check_square(values, W);
    const Eigen::VectorXd z = values.array() - values.mean();
    const double zz = z.squaredNorm();
    if (!(zz > 0.0)) throw InputError("zero variance");
    const double s = W.sum();
    if (!(s > 0.0)) throw InputError("weights matrix has no positive entries");
    return static_cast<double>(values.size()) / s * z.dot(W * z) / zz;
}

double morans_i_residuals(const Eigen::VectorXd& r, const Eigen::MatrixXd& W) {
    check_square(r, W);
    const double rr = r.squaredNorm();
    if (!(rr > 0.0)) throw InputError("all residuals are zero");
    const double s = W.sum();
    if (!(s > 0.0)) throw InputError("weights matrix has no positive entries");
    return static_cast<double>(r.size()) / s * r.dot(W * r) / rr;
}

PermutationInterval residual_moran_permutation(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& W,
                                               int replicates, std::uint64_t seed) {
    if (replicates < 2) throw InputError("need at least 2 permutation replicates");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(residuals.size()));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> stats;
    Eigen::VectorXd r(residuals.size());
    for (int k = 0; k < replicates; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = residuals(perm[static_cast<std::size_t>(i)]);
        stats.push_back(morans_i_residuals(r, W));
    }
    std::sort(stats.begin(), stats.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(stats.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, stats.size() - 1);
        return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
    };
    PermutationInterval out;
    out.lower = q(0.025);
    out.upper = q(0.975);
    out.mean = std::accumulate(stats.begin(), stats.end(), 0.0) / static_cast<double>(stats.size());
    out.replicates = replicates;
    return out;
}

TestResult moran_permutation_test(const Eigen::VectorXd& values, const Eigen::MatrixXd& W, int replicates,
                                  std::uint64_t seed, double alpha) {
    if (replicates < 1) throw InputError("need at least 1 permutation replicate");
    TestResult t;
    t.name = "morans_i";
    t.statistic = morans_i(values, W);
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(values.size()));
    std::iota(perm.begin(), perm.end(), 0);
    Eigen::VectorXd v(values.size());
    int exceed = 0;
    for (int k = 0; k < replicates; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = values(perm[static_cast<std::size_t>(i)]);
        if (morans_i(v, W) >= t.statistic) ++exceed;
    }
    t.reference_distribution = "permutation(" + std::to_string(replicates) + ")";
    t.p_value = (exceed + 1.0) / (replicates + 1.0);
    t.verdict = *t.p_value < alpha ? "positive spatial autocorrelation at alpha=" + std::to_string(alpha)
                                   : "no evidence of positive spatial autocorrelation at alpha=" + std::to_string(alpha);
    return t;
}

TestResult potthoff_whittinghill(const std::vector<double>& y, double alpha) {
    if (y.size() < 2) throw InputError("need at least 2 counts");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    if (!(mean > 0.0)) throw InputError("all counts are zero");
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    TestResult t;
    t.name = "potthoff_whittinghill";
    t.statistic = ss / mean;
    const double df = static_cast<double>(y.size() - 1);
    t.reference_distribution = "chi-square(" + std::to_string(y.size() - 1) + ")";
    t.p_value = chi2_upper(t.statistic, df);
    t.verdict = verdict(*t.p_value, alpha);
    return t;
}

TestResult lagrange_multiplier(const std::vector<double>& y, const Eigen::VectorXd& mu, double alpha) {
    if (static_cast<Eigen::Index>(y.size()) != mu.size()) throw InputError("counts and fitted means differ in length");
    if ((mu.array() <= 0.0).any()) throw InputError("fitted means must be positive");
    double num = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - mu(static_cast<Eigen::Index>(i));
        num += e * e - y[i];
    }
    TestResult t;
    t.name = "lagrange_multiplier";
    t.statistic = num * num / (2.0 * mu.squaredNorm());
    t.reference_distribution = "chi-square(1)";
    t.p_value = chi2_upper(t.statistic, 1.0);
    t.verdict = verdict(*t.p_value, alpha);
    return t;
}

Eigen::VectorXd poisson_glm_fit(const std::vector<double>& y, const Eigen::MatrixXd& X) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (X.rows() != n) throw InputError("design rows do not match counts");
    Eigen::MatrixXd D(n, X.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(X.cols()) = X;
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    const double ybar = yv.mean();
    if (!(ybar > 0.0)) throw InputError("all counts are zero");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(D.cols());
    beta(0) = std::log(ybar);
    Eigen::VectorXd mu;
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd eta = D * beta;
        mu = eta.array().exp();
        const Eigen::VectorXd z = eta.array() + (yv.array() - mu.array()) / mu.array();
        const Eigen::VectorXd sw = mu.array().sqrt();
        const Eigen::MatrixXd A = sw.asDiagonal() * D;
        const Eigen::VectorXd b = sw.cwiseProduct(z);
        const Eigen::VectorXd next = A.colPivHouseholderQr().solve(b);
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        if (change < 1e-10) break;
    }
    mu = (D * beta).array().exp();
    if (!mu.allFinite()) throw ComputeError("Poisson GLM did not converge");
    return mu;
}

std::vector<double> gelman_rubin(const std::vector<Eigen::MatrixXd>& chains) {
    if (chains.size() < 2) throw InputError("gelman_rubin needs at least 2 chains");
    const auto len = chains[0].rows();
    const auto dim = chains[0].cols();
    for (const auto& c : chains)
        if (c.rows() != len || c.cols() != dim) throw InputError("chains must have equal shapes");
    if (len < 10) throw InputError("chains must have at least 10 draws");
    const Eigen::Index n = len / 2;
    const double m = 2.0 * static_cast<double>(chains.size());
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (Eigen::Index j = 0; j < dim; ++j) {
        std::vector<double> means, vars;
        for (const auto& c : chains) {
            for (const Eigen::Index start : {Eigen::Index{0}, len - n}) {
                const auto seg = c.col(j).segment(start, n);
                const double mean = seg.mean();
                means.push_back(mean);
                vars.push_back((seg.array() - mean).square().sum() / static_cast<double>(n - 1));
            }
        }
        const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
        const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
        double B = 0.0;
        for (double mu : means) B += (mu - grand) * (mu - grand);
        B *= static_cast<double>(n) / (m - 1.0);
        if (!(W > 0.0)) {
            out[static_cast<std::size_t>(j)] = B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
            continue;
        }
        const double nn = static_cast<double>(n);
        const double var_plus = (nn - 1.0) / nn * W + B / nn;
        out[static_cast<std::size_t>(j)] = std::sqrt(var_plus / W);
    }
    return out;
}

}  // namespace crimebsf
