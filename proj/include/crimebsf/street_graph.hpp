#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crimebsf/geometry.hpp"

namespace crimebsf {

// Weighted undirected street network; edge weights are lengths in meters.
class StreetGraph {
public:
    struct Edge {
        std::size_t to;
        double length_m;
    };

    std::size_t add_node(const std::string& id, Point p);
    void add_edge(std::size_t a, std::size_t b, double length_m);

    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
    [[nodiscard]] std::size_t edge_count() const { return edge_count_; }
    [[nodiscard]] const Point& node(std::size_t i) const { return nodes_[i]; }
    [[nodiscard]] const std::string& node_id(std::size_t i) const { return ids_[i]; }
    [[nodiscard]] const std::vector<Edge>& neighbors(std::size_t i) const { return adj_[i]; }
    [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;

    // Nearest node within `max_m`, ties broken by lowest index.
    [[nodiscard]] std::optional<std::size_t> snap(const Point& p, double max_m) const;

    // Shortest-path distances from `source`, truncated at `cutoff_m` (unreached = +inf).
    [[nodiscard]] std::vector<double> dijkstra(std::size_t source, double cutoff_m) const;

    // Fraction of nodes in the largest connected component.
    [[nodiscard]] double largest_component_fraction() const;

private:
    std::vector<Point> nodes_;
    std::vector<std::string> ids_;
    std::vector<std::vector<Edge>> adj_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t edge_count_ = 0;
};

}  // namespace crimebsf
