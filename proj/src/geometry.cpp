#include "crimebsf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crimebsf {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(const Point& p, const Point& a, const Point& b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(a, c, d)) return true;
    if (d2 == 0 && on_segment(b, c, d)) return true;
    if (d3 == 0 && on_segment(c, a, b)) return true;
    return d4 == 0 && on_segment(d, a, b);
}

// Strict interior test by ray casting; boundary handled by callers.
bool ring_contains(const Ring& ring, const Point& p) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xcross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xcross) inside = !inside;
        }
    }
    return inside;
}

double ring_boundary_distance(const Ring& ring, const Point& p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, point_segment_distance(p, ring[i], ring[(i + 1) % n]));
    }
    return best;
}

template <typename F>
void for_each_segment(const MultiPolygon& mp, F&& f) {
    auto visit = [&](const Ring& r) {
        const std::size_t n = r.size();
        for (std::size_t i = 0; i < n; ++i) f(r[i], r[(i + 1) % n]);
    };
    for (const auto& part : mp.parts) {
        visit(part.outer);
        for (const auto& h : part.holes) visit(h);
    }
}

bool ring_self_intersects(const Ring& ring) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) return true;
        }
    }
    return false;
}

}  // namespace

MultiPolygon make_rectangle(double x0, double y0, double x1, double y1) {
    MultiPolygon mp;
    mp.parts.push_back(Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}});
    return mp;
}

double ring_signed_area(const Ring& ring) {
    double s = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * s;
}

double area(const Polygon& poly) {
    double a = std::abs(ring_signed_area(poly.outer));
    for (const auto& h : poly.holes) a -= std::abs(ring_signed_area(h));
    return a;
}

double area(const MultiPolygon& mp) {
    double a = 0.0;
    for (const auto& p : mp.parts) a += area(p);
    return a;
}

Point centroid(const MultiPolygon& mp) {
    double cx = 0.0, cy = 0.0, total = 0.0;
    auto accumulate = [&](const Ring& r, double orientation) {
        const double sa = ring_signed_area(r);
        if (sa == 0.0) return;
        double rx = 0.0, ry = 0.0;
        const std::size_t n = r.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = r[i];
            const Point& b = r[(i + 1) % n];
            const double c = a.x * b.y - b.x * a.y;
            rx += (a.x + b.x) * c;
            ry += (a.y + b.y) * c;
        }
        // (rx, ry) / (6 sa) is the ring centroid; weight by |sa|.
        const double w = orientation * std::abs(sa);
        cx += w * rx / (6.0 * sa);
        cy += w * ry / (6.0 * sa);
        total += w;
    };
    for (const auto& p : mp.parts) {
        accumulate(p.outer, 1.0);
        for (const auto& h : p.holes) accumulate(h, -1.0);
    }
    if (total == 0.0) {
        // Degenerate: average of the vertices.
        std::size_t n = 0;
        for (const auto& p : mp.parts)
            for (const auto& v : p.outer) {
                cx += v.x;
                cy += v.y;
                ++n;
            }
        return n ? Point{cx / n, cy / n} : Point{};
    }
    return {cx / total, cy / total};
}

BBox bbox(const Ring& ring) {
    BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : ring) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

BBox bbox(const MultiPolygon& mp) {
    BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& part : mp.parts) {
        const BBox r = bbox(part.outer);
        b.min_x = std::min(b.min_x, r.min_x);
        b.min_y = std::min(b.min_y, r.min_y);
        b.max_x = std::max(b.max_x, r.max_x);
        b.max_y = std::max(b.max_y, r.max_y);
    }
    return b;
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return distance(p, a);
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, Point{a.x + t * dx, a.y + t * dy});
}

double segment_segment_distance(const Point& a, const Point& b, const Point& c, const Point& d) {
    if (segments_intersect(a, b, c, d)) return 0.0;
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                     point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

bool contains(const MultiPolygon& mp, const Point& p) {
    for (const auto& part : mp.parts) {
        if (ring_boundary_distance(part.outer, p) == 0.0) return true;
        if (!ring_contains(part.outer, p)) continue;
        bool in_hole = false;
        for (const auto& h : part.holes) {
            if (ring_boundary_distance(h, p) == 0.0) return true;
            if (ring_contains(h, p)) {
                in_hole = true;
                break;
            }
        }
        if (!in_hole) return true;
    }
    return false;
}

double distance(const MultiPolygon& mp, const Point& p) {
    if (contains(mp, p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for_each_segment(mp, [&](const Point& a, const Point& b) { best = std::min(best, point_segment_distance(p, a, b)); });
    return best;
}

double distance(const MultiPolygon& a, const MultiPolygon& b) {
    // Containment without boundary crossing.
    for (const auto& part : a.parts)
        if (!part.outer.empty() && contains(b, part.outer.front())) return 0.0;
    for (const auto& part : b.parts)
        if (!part.outer.empty() && contains(a, part.outer.front())) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for_each_segment(a, [&](const Point& p0, const Point& p1) {
        if (best == 0.0) return;
        for_each_segment(b, [&](const Point& q0, const Point& q1) {
            if (best == 0.0) return;
            best = std::min(best, segment_segment_distance(p0, p1, q0, q1));
        });
    });
    return best;
}

std::optional<std::string> validate(const MultiPolygon& mp) {
    if (mp.parts.empty()) return "empty geometry";
    auto check_ring = [](const Ring& r) -> std::optional<std::string> {
        if (r.size() < 3) return "ring with fewer than 3 vertices";
        for (const auto& p : r)
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) return "non-finite coordinate";
        if (ring_signed_area(r) == 0.0) return "zero-area ring";
        if (ring_self_intersects(r)) return "self-intersecting ring";
        return std::nullopt;
    };
    for (const auto& part : mp.parts) {
        if (auto e = check_ring(part.outer)) return e;
        for (const auto& h : part.holes)
            if (auto e = check_ring(h)) return "hole: " + *e;
    }
    return std::nullopt;
}

}  // namespace crimebsf
