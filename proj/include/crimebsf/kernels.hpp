#pragma once
// Data-parallel inner loops. Each kernel exists twice: `serial` is the
// reference implementation kept for testing, `omp` distributes the
// independent iterations over OpenMP threads. Reductions are never done
// inside the parallel region, so both variants are bit-identical for any
// thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "crimebsf/features.hpp"
#include "crimebsf/geometry.hpp"
#include "crimebsf/parallel.hpp"
#include "crimebsf/street_graph.hpp"

namespace crimebsf::kernels {

// Per-unit negative binomial terms at linear predictor eta.
//   lgamma_diff[k] = lgamma(v_k + phi) - lgamma(phi) - lgamma(v_k + 1)
//   digamma_diff[k] = digamma(v_k + phi) - digamma(phi)
// for the distinct count values v_k; y_index maps units to k.
struct Nb2Inputs {
    std::span<const double> y;
    std::span<const int> y_index;
    std::span<const double> eta;
    std::span<const double> lgamma_diff;
    std::span<const double> digamma_diff;
    double phi;
};

struct Nb2Outputs {
    std::span<double> loglik;    // log p(y_i | mu_i, phi)
    std::span<double> d_eta;     // d loglik / d eta_i
    std::span<double> d_phi;     // d loglik / d phi (may be empty)
};

// Indices of geometries within `radius` of each geometry (self included).
using Neighborhoods = std::vector<std::vector<std::size_t>>;

namespace serial {
void nb2_terms(const Nb2Inputs& in, const Nb2Outputs& out);
Neighborhoods within_distance(std::span<const MultiPolygon> geoms, std::span<const BBox> boxes, double radius);
Neighborhoods point_hits(std::span<const Point> points, std::span<const MultiPolygon> geoms,
                         std::span<const BBox> boxes, double buffer);
std::vector<FlaggedValue> walkability(std::span<const Point> locations, const PoiNetworkIndex& pois,
                                      const StreetGraph& graph, const WalkabilityConfig& cfg);
void euclidean_distances(std::span<const Point> pts, std::span<double> out_row_major);
}  // namespace serial

namespace omp {
void nb2_terms(const Nb2Inputs& in, const Nb2Outputs& out);
Neighborhoods within_distance(std::span<const MultiPolygon> geoms, std::span<const BBox> boxes, double radius);
Neighborhoods point_hits(std::span<const Point> points, std::span<const MultiPolygon> geoms,
                         std::span<const BBox> boxes, double buffer);
std::vector<FlaggedValue> walkability(std::span<const Point> locations, const PoiNetworkIndex& pois,
                                      const StreetGraph& graph, const WalkabilityConfig& cfg);
void euclidean_distances(std::span<const Point> pts, std::span<double> out_row_major);
}  // namespace omp

// Dispatch helpers.
inline Neighborhoods within_distance(Backend b, std::span<const MultiPolygon> g, std::span<const BBox> bx, double r) {
    return b == Backend::Serial ? serial::within_distance(g, bx, r) : omp::within_distance(g, bx, r);
}
inline Neighborhoods point_hits(Backend b, std::span<const Point> p, std::span<const MultiPolygon> g,
                                std::span<const BBox> bx, double buffer) {
    return b == Backend::Serial ? serial::point_hits(p, g, bx, buffer) : omp::point_hits(p, g, bx, buffer);
}
inline std::vector<FlaggedValue> walkability(Backend b, std::span<const Point> loc, const PoiNetworkIndex& pois,
                                             const StreetGraph& graph, const WalkabilityConfig& cfg) {
    return b == Backend::Serial ? serial::walkability(loc, pois, graph, cfg) : omp::walkability(loc, pois, graph, cfg);
}
inline void nb2_terms(Backend b, const Nb2Inputs& in, const Nb2Outputs& out) {
    if (b == Backend::Serial) serial::nb2_terms(in, out);
    else omp::nb2_terms(in, out);
}
inline void euclidean_distances(Backend b, std::span<const Point> pts, std::span<double> out) {
    if (b == Backend::Serial) serial::euclidean_distances(pts, out);
    else omp::euclidean_distances(pts, out);
}

}  // namespace crimebsf::kernels
