#pragma once
// Spatial relation matrices between cores and their graph Laplacian.

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crimebsf/geo_core.hpp"

namespace crimebsf {

enum class ConnectivityKind { Contiguity, Distance, Mobility };

std::string to_string(ConnectivityKind k);
std::optional<ConnectivityKind> parse_connectivity_kind(const std::string& s);

struct ConnectivityMatrix {
    ConnectivityKind kind = ConnectivityKind::Contiguity;
    Eigen::MatrixXd C;       // symmetric, nonnegative, zero diagonal
    double threshold_m = 0;  // longest MST edge (distance kind only)
    std::vector<std::string> warnings;
};

// c_ij = 1 when corehoods i != j share a member.
ConnectivityMatrix contiguity_matrix(const std::vector<Corehood>& corehoods);

// c_ij = 1 - (d_ij / 4t)^2 for d_ij <= t, t the longest edge of the Euclidean MST.
ConnectivityMatrix distance_matrix(const std::vector<Point>& centroids);

// Longest edge of the Euclidean minimum spanning tree (Prim, ties by index).
double mst_threshold(const Eigen::MatrixXd& dist);

// Average daily trips between cores, symmetrized, diagonal zeroed. Trip ends
// are resolved to the core unit containing them; unresolved trips are skipped.
ConnectivityMatrix mobility_matrix(const std::vector<Trip>& trips, const std::vector<SpatialUnit>& units,
                                   const std::vector<Corehood>& corehoods, int days);

// Q = D - C.
Eigen::MatrixXd laplacian(const Eigen::MatrixXd& C);

ConnectivityMatrix build_connectivity(ConnectivityKind kind, const CityDataset& city,
                                      const std::vector<Corehood>& corehoods);

// Dense CSV for N <= 2000, (i, j, value) coordinate list otherwise.
// `stamp` is written as a leading comment line when non-empty.
void write_connectivity_csv(const ConnectivityMatrix& c, const std::filesystem::path& path,
                            const std::string& stamp = "");
Eigen::MatrixXd read_connectivity_csv(const std::filesystem::path& path);

}  // namespace crimebsf
