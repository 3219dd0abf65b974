#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "crimebsf/errors.hpp"
#include "crimebsf/geo_core.hpp"
#include "test_support.hpp"

using namespace crimebsf;
using crimebsf::testing::grid_units;

namespace {

// Brute force: every pair of squares, distance between their closest points.
double square_gap(const SpatialUnit& a, const SpatialUnit& b) {
    const BBox p = bbox(a.geometry), q = bbox(b.geometry);
    const double dx = std::max({0.0, q.min_x - p.max_x, p.min_x - q.max_x});
    const double dy = std::max({0.0, q.min_y - p.max_y, p.min_y - q.max_y});
    return std::hypot(dx, dy);
}

CrimeEvent crime_at(double x, double y, CrimeCategory c = CrimeCategory::Property) {
    CrimeEvent e;
    e.id = "c";
    e.location = {x, y};
    e.category = c;
    e.date = std::chrono::sys_days{std::chrono::year{2019} / 6 / 1};
    return e;
}

}  // namespace

TEST_CASE("geometry basics") {
    const MultiPolygon sq = make_rectangle(0, 0, 10, 20);
    CHECK(area(sq) == doctest::Approx(200.0));
    CHECK(centroid(sq).x == doctest::Approx(5.0));
    CHECK(centroid(sq).y == doctest::Approx(10.0));
    CHECK(contains(sq, {10, 5}));
    CHECK_FALSE(contains(sq, {10.1, 5}));
    CHECK(distance(sq, Point{13, 24}) == doctest::Approx(5.0));
    CHECK(distance(sq, make_rectangle(10, 0, 11, 1)) == 0.0);
    CHECK(distance(sq, make_rectangle(13, 24, 14, 25)) == doctest::Approx(5.0));
    CHECK_FALSE(validate(sq).has_value());
    MultiPolygon bowtie;
    bowtie.parts.push_back({{{0, 0}, {1, 1}, {1, 0}, {0, 1}}, {}});
    CHECK(validate(bowtie).has_value());
}

TEST_CASE("corehood of an isolated unit is itself") {
    const auto units = grid_units(1, 1, 300);
    const auto ch = build_corehoods(units, kHalfMileM);
    REQUIRE(ch.size() == 1);
    CHECK(ch[0].members == std::vector<std::size_t>{0});
}

TEST_CASE("3x3 grid of 300 m squares at half a mile: every unit is in the center's corehood") {
    const auto units = grid_units(3, 3, 300);
    const auto ch = build_corehoods(units, kHalfMileM);
    CHECK(ch[4].members.size() == 9);
    // Brute-force gap check for every pair.
    for (std::size_t i = 0; i < units.size(); ++i) {
        std::vector<std::size_t> expect;
        for (std::size_t j = 0; j < units.size(); ++j)
            if (square_gap(units[i], units[j]) <= kHalfMileM) expect.push_back(j);
        CHECK(ch[i].members == expect);
    }
}

TEST_CASE("small radius: touching squares are members, gapped squares are not") {
    const auto touching = build_corehoods(grid_units(3, 3, 300), 100);
    CHECK(touching[0].members == std::vector<std::size_t>{0, 1, 3, 4});
    const auto gapped = build_corehoods(grid_units(3, 3, 300, 200), 100);
    CHECK(gapped[0].members == std::vector<std::size_t>{0});
    CHECK(boundary_cores(gapped).size() == 9);
}

TEST_CASE("corehood properties: reflexive, symmetric, monotone in radius") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 150.0);
    auto units = grid_units(6, 6, 300, 0);
    // Jitter the squares so gaps vary.
    for (auto& unit : units) {
        const double dx = u(rng), dy = u(rng);
        const BBox b = bbox(unit.geometry);
        unit.geometry = make_rectangle(b.min_x + dx, b.min_y + dy, b.max_x + dx - 100, b.max_y + dy - 100);
    }
    const double radii[] = {50, 200, 400, kHalfMileM, 1609.344};
    std::vector<std::vector<Corehood>> all;
    for (double r : radii) all.push_back(build_corehoods(units, r));
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto& ch = all[k];
        for (std::size_t i = 0; i < ch.size(); ++i) {
            CHECK(std::binary_search(ch[i].members.begin(), ch[i].members.end(), i));
            for (std::size_t j : ch[i].members)
                CHECK(std::binary_search(ch[j].members.begin(), ch[j].members.end(), i));
            if (k > 0)
                CHECK(std::includes(ch[i].members.begin(), ch[i].members.end(), all[k - 1][i].members.begin(),
                                    all[k - 1][i].members.end()));
        }
    }
}

TEST_CASE("corehood radius must be positive") { CHECK_THROWS_AS(build_corehoods(grid_units(2, 2, 10), 0.0), InputError); }

TEST_CASE("crime assignment: interior, shared edge, four-corner point") {
    const auto units = grid_units(2, 2, 300);
    SUBCASE("interior") {
        const auto a = assign_crimes({crime_at(150, 150)}, units);
        CHECK(a.property[0] == 1.0);
        CHECK(a.total()[1] == 0.0);
    }
    SUBCASE("boundary between two units") {
        const auto a = assign_crimes({crime_at(300, 100, CrimeCategory::Violent)}, units);
        CHECK(a.violent[0] == 0.5);
        CHECK(a.violent[1] == 0.5);
    }
    SUBCASE("four-corner point") {
        const auto a = assign_crimes({crime_at(300, 300)}, units);
        for (int i = 0; i < 4; ++i) CHECK(a.property[static_cast<std::size_t>(i)] == 0.25);
    }
    SUBCASE("outside every buffer") {
        const auto a = assign_crimes({crime_at(2000, 2000)}, units);
        CHECK(a.unassigned == 1.0);
        CHECK(a.unassigned_ids.size() == 1);
    }
}

TEST_CASE("crime weights are conserved") {
    const auto units = grid_units(4, 4, 250);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-100.0, 1100.0);
    std::uniform_int_distribution<int> snap(0, 4);
    std::vector<CrimeEvent> crimes;
    for (int k = 0; k < 2000; ++k) {
        // Put some crimes exactly on grid lines.
        double x = u(rng), y = u(rng);
        if (k % 3 == 0) x = 250.0 * snap(rng);
        if (k % 5 == 0) y = 250.0 * snap(rng);
        crimes.push_back(crime_at(x, y, k % 2 ? CrimeCategory::Violent : CrimeCategory::Property));
    }
    const auto a = assign_crimes(crimes, units);
    const auto t = a.total();
    double sum = a.unassigned;
    for (double v : t) sum += v;
    CHECK(std::abs(sum - 2000.0) < 1e-9);
}

TEST_CASE("date window is half-open") {
    const auto units = grid_units(1, 1, 300);
    auto c = crime_at(10, 10);
    const DateWindow w{std::chrono::sys_days{std::chrono::year{2019} / 1 / 1},
                       std::chrono::sys_days{std::chrono::year{2019} / 6 / 1}};
    const auto a = assign_crimes({c}, units, 30.0, w);
    CHECK(a.outside_window == 1);
    c.date = w.start;
    CHECK(assign_crimes({c}, units, 30.0, w).property[0] == 1.0);
}

TEST_CASE("round_counts rounds half to even") {
    CHECK(round_counts({0.5, 1.5, 2.25, 2.75, 0.0}) == std::vector<int>{0, 2, 2, 3, 0});
}

TEST_CASE("enumeration names round-trip") {
    for (auto c : {PoiCategory::Grocery, PoiCategory::Nightlife, PoiCategory::Books})
        CHECK(parse_poi_category(to_string(c)) == c);
    for (auto t : {TripType::HBW, TripType::HBO, TripType::NHB}) CHECK(parse_trip_type(to_string(t)) == t);
    CHECK_FALSE(parse_crime_category("arson_of_a_lawnmower").has_value());
}
