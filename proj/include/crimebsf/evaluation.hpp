#pragma once
// Fit scoring: Nakagawa R^2, PSIS-LOO, decomposition, comparison tables and
// cross-city transfer.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "crimebsf/diagnostics.hpp"
#include "crimebsf/features.hpp"
#include "crimebsf/model.hpp"

namespace crimebsf {

struct ModelFit {
    ModelSpec spec;
    PosteriorSamples samples;
    std::string fingerprint;  // hash of counts, features and basis
    std::vector<std::string> core_ids;
    std::vector<std::string> feature_names;
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_sds;
    std::vector<int> y;
    std::vector<double> y_unrounded;
    Eigen::MatrixXd X;        // standardized training features
    Eigen::MatrixXd E;        // eigenbasis used (empty for NB_RIDGE)
    Eigen::VectorXd lambdas;
    Eigen::MatrixXd W;        // connectivity used for residual diagnostics
};

struct R2Result {
    double marginal = 0.0;     // posterior mean of per-draw ratios
    double conditional = 0.0;
    double marginal_of_means = 0.0;  // ratio of posterior-mean variances
    double conditional_of_means = 0.0;
};

R2Result r2_nakagawa(const ModelFit& fit);

struct GpdFit {
    double k = 0.0;
    double sigma = 0.0;
};

// Zhang-Stephens estimate with the weakly informative shrinkage of k towards 0.5.
GpdFit gpd_fit(const std::vector<double>& x_sorted);

// Pareto-smoothed log weights (normalized) for one unit's log importance ratios.
struct PsisWeights {
    Eigen::VectorXd log_weights;
    double k = 0.0;
};
PsisWeights psis_smooth(const Eigen::VectorXd& log_ratios);

struct LooResult {
    double elpd = 0.0;  // sum of pointwise values (negative numbers, larger is better)
    double se = 0.0;
    Eigen::VectorXd pointwise;
    Eigen::VectorXd pareto_k;
    Eigen::VectorXd lpd;  // in-sample log pointwise predictive density
    int bad_k = 0;        // k > 0.7
};

// Rows are draws, columns units.
LooResult psis_loo(const Eigen::MatrixXd& pointwise_loglik);

struct Decomposition {
    Eigen::VectorXd fixed;     // posterior mean of exp(beta0 + X beta)
    Eigen::VectorXd random;    // posterior mean of exp(E gamma)
    Eigen::VectorXd mu;        // posterior mean of mu
    Eigen::VectorXd residual;  // y - mu
};

Decomposition decompose(const ModelFit& fit);

struct EvaluationReport {
    std::string label;
    R2Result r2;
    LooResult loo;
    double residual_moran = 0.0;
    PermutationInterval residual_moran_reference;
    Decomposition decomposition;
    double max_rhat = 0.0;
    int divergences = 0;
    double runtime_seconds = 0.0;
};

EvaluationReport evaluate(const ModelFit& fit, int permutation_replicates = 199);

struct ComparisonRow {
    std::string selection;
    Variant variant;
    ConnectivityKind connectivity;
    double radius_m;
    double r2_marginal, r2_conditional, loo_elpd, loo_se, residual_moran;
    int bad_k;
};

// Throws when fits were made on different data. Rows sorted by LOO, best first.
std::vector<ComparisonRow> compare_models(const std::vector<const ModelFit*>& fits,
                                          const std::vector<EvaluationReport>& reports);

struct TransferReport {
    double r2 = 0.0;           // 1 - SSE / SST of the posterior-mean prediction
    double log_score = 0.0;    // sum_i log mean_s p(y_i | mu_si, phi_s)
    Eigen::VectorXd pointwise_log_score;
    Eigen::VectorXd prediction;
};

// Fixed-effects prediction of `fit` on a standardized design (E omitted).
TransferReport fixed_effects_score(const ModelFit& fit, const Eigen::MatrixXd& X, const std::vector<int>& y);

// Standardizes city B with its own statistics, then predicts with A's draws.
TransferReport transfer_evaluate(const ModelFit& fit_a, const RawFeatureTable& raw_b, const std::vector<int>& y_b);

}  // namespace crimebsf
