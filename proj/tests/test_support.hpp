#pragma once
// Fixture builders for the unit tests.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crimebsf/evaluation.hpp"
#include "crimebsf/geo_core.hpp"

namespace crimebsf::testing {

// rows x cols squares of side `cell` with `gap` between neighbors.
inline std::vector<SpatialUnit> grid_units(int rows, int cols, double cell, double gap = 0.0) {
    std::vector<SpatialUnit> out;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            SpatialUnit u;
            u.id = "u" + std::to_string(r) + "_" + std::to_string(c);
            const double x0 = c * (cell + gap), y0 = r * (cell + gap);
            u.geometry = make_rectangle(x0, y0, x0 + cell, y0 + cell);
            u.centroid = {x0 + cell / 2, y0 + cell / 2};
            out.push_back(u);
        }
    return out;
}

// Unique empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("crimebsf_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// A fit assembled from explicit draws: beta0 (S), beta (S x P), phi (S), gamma (S x L).
inline ModelFit manual_fit(const std::vector<int>& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& E,
                           const Eigen::VectorXd& beta0, const Eigen::MatrixXd& beta, const Eigen::VectorXd& phi,
                           const Eigen::MatrixXd& gamma) {
    ModelFit f;
    f.spec.variant = E.cols() > 0 ? Variant::BSF : Variant::NB_RIDGE;
    const auto S = beta0.size(), P = X.cols(), L = E.cols();
    auto& s = f.samples;
    s.variant = f.spec.variant;
    s.num_beta = static_cast<int>(P);
    s.num_gamma = static_cast<int>(L);
    s.names.push_back("beta0");
    for (Eigen::Index j = 0; j < P; ++j) s.names.push_back("beta[x" + std::to_string(j) + "]");
    s.names.push_back("phi");
    for (Eigen::Index l = 0; l < L; ++l) s.names.push_back("gamma[" + std::to_string(l) + "]");
    s.draws.resize(S, 2 + P + L);
    s.draws.col(0) = beta0;
    s.draws.middleCols(1, P) = beta;
    s.draws.col(1 + P) = phi;
    s.draws.rightCols(L) = gamma;
    s.chains = 1;
    s.iterations = static_cast<int>(S);
    s.chain_ids.assign(static_cast<std::size_t>(S), 0);
    f.y = y;
    f.y_unrounded.assign(y.begin(), y.end());
    f.X = X;
    f.E = E;
    for (Eigen::Index j = 0; j < P; ++j) f.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < y.size(); ++i) f.core_ids.push_back("c" + std::to_string(i));
    return f;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n01(rng);
    return m;
}

}  // namespace crimebsf::testing
