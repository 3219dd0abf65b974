#pragma once
// Planar geometry in a projected metric CRS. Rings are stored open (the
// closing vertex is not repeated).

#include <optional>
#include <string>
#include <vector>

namespace crimebsf {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }

using Ring = std::vector<Point>;

struct Polygon {
    Ring outer;
    std::vector<Ring> holes;
};

struct BBox {
    double min_x, min_y, max_x, max_y;

    [[nodiscard]] BBox expanded(double r) const { return {min_x - r, min_y - r, max_x + r, max_y + r}; }
    [[nodiscard]] bool intersects(const BBox& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
    [[nodiscard]] bool contains(const Point& p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
};

// A unit geometry: one or more polygon parts.
struct MultiPolygon {
    std::vector<Polygon> parts;
};

MultiPolygon make_rectangle(double x0, double y0, double x1, double y1);

double ring_signed_area(const Ring& ring);
double area(const Polygon& poly);
double area(const MultiPolygon& mp);
Point centroid(const MultiPolygon& mp);
BBox bbox(const MultiPolygon& mp);
BBox bbox(const Ring& ring);

// Point inside or on the boundary.
bool contains(const MultiPolygon& mp, const Point& p);

double distance(const Point& a, const Point& b);
double point_segment_distance(const Point& p, const Point& a, const Point& b);
double segment_segment_distance(const Point& a, const Point& b, const Point& c, const Point& d);

// Zero when the point lies inside or on the boundary.
double distance(const MultiPolygon& mp, const Point& p);

// Zero when the geometries intersect (including touching or containment).
double distance(const MultiPolygon& a, const MultiPolygon& b);

// Empty when valid, otherwise a short reason.
std::optional<std::string> validate(const MultiPolygon& mp);

}  // namespace crimebsf
