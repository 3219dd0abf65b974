#include "crimebsf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crimebsf::kernels {

namespace {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Written in t = eta - log(phi) so that large phi does not cancel.
inline void nb2_one(const Nb2Inputs& in, const Nb2Outputs& out, std::size_t i) {
    const double y = in.y[i];
    const double phi = in.phi;
    const double t = in.eta[i] - std::log(phi);
    const double sp = softplus(t);  // log((mu + phi) / phi)
    const int k = in.y_index[i];
    out.loglik[i] = in.lgamma_diff[k] + y * (t - sp) - phi * sp;
    // phi (y - mu) / (mu + phi), with the weight mu / (mu + phi) = exp(t - sp)
    const double w = std::exp(t - sp);
    out.d_eta[i] = y - (y + phi) * w;
    if (!out.d_phi.empty()) {
        // 1 - (y + phi) / (mu + phi) = (mu - y) / (mu + phi) = (w - y / (mu + phi))
        out.d_phi[i] = in.digamma_diff[k] - sp + (w - y * (1.0 - w) / phi);
    }
}

std::vector<std::size_t> neighbors_of(std::span<const MultiPolygon> geoms, std::span<const BBox> boxes,
                                      double radius, std::size_t i) {
    std::vector<std::size_t> out;
    const BBox probe = boxes[i].expanded(radius);
    for (std::size_t j = 0; j < geoms.size(); ++j) {
        if (j == i) {
            out.push_back(j);
            continue;
        }
        if (!probe.intersects(boxes[j])) continue;
        if (distance(geoms[i], geoms[j]) <= radius) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> hits_of(const Point& p, std::span<const MultiPolygon> geoms, std::span<const BBox> boxes,
                                 double buffer) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < geoms.size(); ++j) {
        if (!boxes[j].expanded(buffer).contains(p)) continue;
        if (distance(geoms[j], p) <= buffer) out.push_back(j);
    }
    return out;
}

FlaggedValue walk_one(const Point& loc, const PoiNetworkIndex& pois, const StreetGraph& graph,
                      const WalkabilityConfig& cfg) {
    const auto src = graph.snap(loc, cfg.snap_max_m);
    if (!src) return {0.0, true};
    const double offset = distance(loc, graph.node(*src));
    const auto dist = graph.dijkstra(*src, cfg.decay.d_zero);
    double score = 0.0;
    std::vector<double> d;
    for (const auto& cat : cfg.categories) {
        const auto& entries = pois.by_category[static_cast<std::size_t>(cat.category)];
        d.clear();
        for (const auto& e : entries) {
            const double nd = dist[e.node];
            if (std::isfinite(nd)) d.push_back(offset + nd + e.offset_m);
        }
        const std::size_t take = std::min(d.size(), cat.weights.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
        for (std::size_t i = 0; i < take; ++i) score += cat.weights[i] * cfg.decay(d[i]);
    }
    return {score, false};
}

}  // namespace

namespace serial {

void nb2_terms(const Nb2Inputs& in, const Nb2Outputs& out) {
    for (std::size_t i = 0; i < in.y.size(); ++i) nb2_one(in, out, i);
}

Neighborhoods within_distance(std::span<const MultiPolygon> geoms, std::span<const BBox> boxes, double radius) {
    Neighborhoods out(geoms.size());
    for (std::size_t i = 0; i < geoms.size(); ++i) out[i] = neighbors_of(geoms, boxes, radius, i);
    return out;
}

Neighborhoods point_hits(std::span<const Point> points, std::span<const MultiPolygon> geoms,
                         std::span<const BBox> boxes, double buffer) {
    Neighborhoods out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = hits_of(points[i], geoms, boxes, buffer);
    return out;
}

std::vector<FlaggedValue> walkability(std::span<const Point> locations, const PoiNetworkIndex& pois,
                                      const StreetGraph& graph, const WalkabilityConfig& cfg) {
    std::vector<FlaggedValue> out(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) out[i] = walk_one(locations[i], pois, graph, cfg);
    return out;
}

void euclidean_distances(std::span<const Point> pts, std::span<double> out) {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = distance(pts[i], pts[j]);
}

}  // namespace serial

namespace omp {

void nb2_terms(const Nb2Inputs& in, const Nb2Outputs& out) {
    const auto n = static_cast<std::ptrdiff_t>(in.y.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) nb2_one(in, out, static_cast<std::size_t>(i));
}

Neighborhoods within_distance(std::span<const MultiPolygon> geoms, std::span<const BBox> boxes, double radius) {
    Neighborhoods out(geoms.size());
    const auto n = static_cast<std::ptrdiff_t>(geoms.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = neighbors_of(geoms, boxes, radius, static_cast<std::size_t>(i));
    return out;
}

Neighborhoods point_hits(std::span<const Point> points, std::span<const MultiPolygon> geoms,
                         std::span<const BBox> boxes, double buffer) {
    Neighborhoods out(points.size());
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = hits_of(points[static_cast<std::size_t>(i)], geoms, boxes, buffer);
    return out;
}

std::vector<FlaggedValue> walkability(std::span<const Point> locations, const PoiNetworkIndex& pois,
                                      const StreetGraph& graph, const WalkabilityConfig& cfg) {
    std::vector<FlaggedValue> out(locations.size());
    const auto n = static_cast<std::ptrdiff_t>(locations.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = walk_one(locations[static_cast<std::size_t>(i)], pois, graph, cfg);
    return out;
}

void euclidean_distances(std::span<const Point> pts, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(pts.size());
    const std::size_t un = pts.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < un; ++j) out[ui * un + j] = distance(pts[ui], pts[j]);
    }
}

}  // namespace omp

}  // namespace crimebsf::kernels
