#pragma once
// Moran eigenvector basis of MCM.

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace crimebsf {

struct EigenBasis {
    Eigen::MatrixXd E;        // N x L, orthonormal columns
    Eigen::VectorXd lambdas;  // descending
    double lambda_max = 0.0;
    double threshold = 0.25;
};

// Prepend a column of ones to X.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X);

// M = I - X (X'X)^{-1} X' via a thin QR of X. Throws InputError naming
// linearly dependent columns when X is rank deficient.
Eigen::MatrixXd residual_projector(const Eigen::MatrixXd& X);

// Eigenvectors of MCM with lambda > 0 and lambda / lambda_max >= threshold,
// sorted descending; the first nonzero entry of each vector is positive.
EigenBasis moran_eigenbasis(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C, double threshold = 0.25);

// Indices retained by the selection rule applied to an eigenvalue list.
std::vector<Eigen::Index> select_eigenvalues(const Eigen::VectorXd& lambdas, double threshold);

void write_eigenbasis_csv(const EigenBasis& b, const std::filesystem::path& lambdas_path,
                          const std::filesystem::path& vectors_path, const std::string& stamp = "");
EigenBasis read_eigenbasis_csv(const std::filesystem::path& lambdas_path, const std::filesystem::path& vectors_path);

}  // namespace crimebsf
