#include "crimebsf/spatial_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "crimebsf/csv.hpp"
#include "crimebsf/errors.hpp"

namespace crimebsf {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), X.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(X.cols()) = X;
    return out;
}

Eigen::MatrixXd residual_projector(const Eigen::MatrixXd& X) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (n <= p) throw InputError("projector needs more rows than columns");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        // Report the columns the pivoting pushed past the numerical rank.
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) cols += " " + std::to_string(perm(k));
        throw InputError("design matrix is rank deficient; dependent columns:" + cols);
    }
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd M = -Q * Q.transpose();
    M.diagonal().array() += 1.0;
    return 0.5 * (M + M.transpose());
}

std::vector<Eigen::Index> select_eigenvalues(const Eigen::VectorXd& lambdas, double threshold) {
    std::vector<Eigen::Index> idx;
    if (lambdas.size() == 0) return idx;
    const double lmax = lambdas.maxCoeff();
    if (!(lmax > 0.0)) return idx;
    for (Eigen::Index i = 0; i < lambdas.size(); ++i)
        if (lambdas(i) > 0.0 && lambdas(i) / lmax >= threshold) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return lambdas(a) > lambdas(b); });
    return idx;
}

EigenBasis moran_eigenbasis(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C, double threshold) {
    if (M.rows() != C.rows() || M.cols() != C.cols() || M.rows() != M.cols())
        throw InputError("projector and connectivity dimensions differ");
    if (!(threshold >= 0.0)) throw InputError("eigenvalue threshold must be non-negative");
    Eigen::MatrixXd A = M * C * M;
    A = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw ComputeError("eigendecomposition of MCM failed");
    const auto keep = select_eigenvalues(es.eigenvalues(), threshold);
    if (keep.empty()) throw ComputeError("no positive spatial autocorrelation basis");

    EigenBasis b;
    b.threshold = threshold;
    b.lambda_max = es.eigenvalues().maxCoeff();
    b.E.resize(A.rows(), static_cast<Eigen::Index>(keep.size()));
    b.lambdas.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto K = static_cast<Eigen::Index>(k);
        Eigen::VectorXd v = es.eigenvectors().col(keep[k]);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (std::abs(v(i)) > 1e-12) {
                if (v(i) < 0.0) v = -v;
                break;
            }
        }
        b.E.col(K) = v;
        b.lambdas(K) = es.eigenvalues()(keep[k]);
    }
    return b;
}

void write_eigenbasis_csv(const EigenBasis& b, const std::filesystem::path& lambdas_path,
                          const std::filesystem::path& vectors_path, const std::string& stamp) {
    std::ofstream l(lambdas_path);
    if (!l) throw ComputeError("cannot write '" + lambdas_path.string() + "'");
    if (!stamp.empty()) l << stamp << '\n';
    l << "index,lambda,lambda_ratio,lambda_max,threshold\n";
    for (Eigen::Index k = 0; k < b.lambdas.size(); ++k)
        l << k << ',' << format_double(b.lambdas(k)) << ',' << format_double(b.lambdas(k) / b.lambda_max) << ','
          << format_double(b.lambda_max) << ',' << format_double(b.threshold) << '\n';
    std::ofstream v(vectors_path);
    if (!v) throw ComputeError("cannot write '" + vectors_path.string() + "'");
    if (!stamp.empty()) v << stamp << '\n';
    for (Eigen::Index k = 0; k < b.E.cols(); ++k) v << (k ? "," : "") << 'e' << k;
    v << '\n';
    for (Eigen::Index i = 0; i < b.E.rows(); ++i) {
        for (Eigen::Index k = 0; k < b.E.cols(); ++k) v << (k ? "," : "") << format_double(b.E(i, k));
        v << '\n';
    }
}

EigenBasis read_eigenbasis_csv(const std::filesystem::path& lambdas_path, const std::filesystem::path& vectors_path) {
    const CsvTable l = CsvTable::read(lambdas_path);
    const CsvTable v = CsvTable::read(vectors_path);
    const auto L = static_cast<Eigen::Index>(l.rows());
    if (static_cast<Eigen::Index>(v.header().size()) != L)
        throw InputError(vectors_path.string() + ": expected " + std::to_string(L) + " eigenvector columns");
    EigenBasis b;
    b.lambdas.resize(L);
    const auto lc = l.require_column("lambda");
    const auto mc = l.require_column("lambda_max");
    const auto tc = l.require_column("threshold");
    for (Eigen::Index k = 0; k < L; ++k) b.lambdas(k) = l.number(static_cast<std::size_t>(k), lc);
    if (L > 0) {
        b.lambda_max = l.number(0, mc);
        b.threshold = l.number(0, tc);
    }
    b.E.resize(static_cast<Eigen::Index>(v.rows()), L);
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (Eigen::Index k = 0; k < L; ++k) b.E(static_cast<Eigen::Index>(i), k) = v.number(i, static_cast<std::size_t>(k));
    return b;
}

}  // namespace crimebsf
