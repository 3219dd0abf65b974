#include "crimebsf/street_graph.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <utility>

#include "crimebsf/errors.hpp"

namespace crimebsf {

std::size_t StreetGraph::add_node(const std::string& id, Point p) {
    if (index_.count(id)) throw InputError("duplicate street node id '" + id + "'");
    const std::size_t i = nodes_.size();
    nodes_.push_back(p);
    ids_.push_back(id);
    adj_.emplace_back();
    index_.emplace(id, i);
    return i;
}

void StreetGraph::add_edge(std::size_t a, std::size_t b, double length_m) {
    if (a >= nodes_.size() || b >= nodes_.size()) throw InputError("street edge references unknown node");
    if (!(length_m >= 0.0)) throw InputError("street edge with negative or NaN length");
    adj_[a].push_back({b, length_m});
    if (a != b) adj_[b].push_back({a, length_m});
    ++edge_count_;
}

std::optional<std::size_t> StreetGraph::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> StreetGraph::snap(const Point& p, double max_m) const {
    std::optional<std::size_t> best;
    double best_d = max_m;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double d = distance(p, nodes_[i]);
        if (d < best_d || (d == best_d && !best)) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<double> StreetGraph::dijkstra(std::size_t source, double cutoff_m) const {
    std::vector<double> dist(nodes_.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[source] = 0.0;
    pq.emplace(0.0, source);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const auto& e : adj_[u]) {
            const double nd = d + e.length_m;
            if (nd > cutoff_m) continue;
            if (nd < dist[e.to]) {
                dist[e.to] = nd;
                pq.emplace(nd, e.to);
            }
        }
    }
    return dist;
}

double StreetGraph::largest_component_fraction() const {
    if (nodes_.empty()) return 0.0;
    std::vector<int> comp(nodes_.size(), -1);
    std::size_t largest = 0;
    int label = 0;
    for (std::size_t s = 0; s < nodes_.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::size_t size = 0;
        std::vector<std::size_t> stack{s};
        comp[s] = label;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            ++size;
            for (const auto& e : adj_[u]) {
                if (comp[e.to] < 0) {
                    comp[e.to] = label;
                    stack.push_back(e.to);
                }
            }
        }
        largest = std::max(largest, size);
        ++label;
    }
    return static_cast<double>(largest) / static_cast<double>(nodes_.size());
}

}  // namespace crimebsf
