#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crimebsf/errors.hpp"
#include "crimebsf/features.hpp"
#include "crimebsf/kernels.hpp"
#include "crimebsf/synthgen.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace crimebsf;
using doctest::Approx;

namespace {

// Straight street of `n` nodes spaced `step` meters along the x axis.
StreetGraph line_graph(int n, double step) {
    StreetGraph g;
    for (int i = 0; i < n; ++i) g.add_node("n" + std::to_string(i), {i * step, 0.0});
    for (int i = 0; i + 1 < n; ++i) g.add_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), step);
    return g;
}

double walk(const std::vector<Poi>& pois, const StreetGraph& g, Point at = {0, 0}) {
    const auto cfg = WalkabilityConfig::standard();
    return walkability_block(at, build_poi_index(pois, g, cfg.snap_max_m), g, cfg).value;
}

}  // namespace

TEST_CASE("land-use mix examples") {
    CHECK(land_use_mix({1000, 0, 0}).value == 0.0);
    CHECK(land_use_mix({1, 1, 1}).value == Approx(1.0).epsilon(1e-15));
    CHECK(land_use_mix({5, 5, 0}).value == Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-15));
    const auto none = land_use_mix({0, 0, 0});
    CHECK(none.value == 0.0);
    CHECK(none.flagged);
}

TEST_CASE("land-use mix and HHI stay in range") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const double l = land_use_mix({u(rng), u(rng) * (k % 2), u(rng)}).value;
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
        std::vector<double> s(6);
        for (auto& v : s) v = u(rng) * (u(rng) < 0.7);
        s[0] += 1e-3;
        const double h = hhi_diversity(s);
        CHECK(h >= 0.0);
        CHECK(h <= 5.0 / 6.0 + 1e-15);
    }
}

TEST_CASE("HHI diversity examples") {
    const std::vector<double> one = {1, 0, 0, 0, 0, 0};
    const std::vector<double> sixths(6, 1.0 / 6.0);
    const std::vector<double> halves = {0.5, 0.5, 0, 0, 0, 0};
    CHECK(hhi_diversity(one) == 0.0);
    CHECK(hhi_diversity(sixths) == Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(hhi_diversity(halves) == Approx(0.5).epsilon(1e-15));
    const std::vector<double> zeros(6, 0.0);
    CHECK_THROWS_AS(hhi_diversity(zeros), InputError);
}

TEST_CASE("decay curve breakpoints, continuity and monotonicity") {
    const DecayCurve d;
    CHECK(d(0) == 1.0);
    CHECK(d(500) == 1.0);
    CHECK(d(1500) == Approx(0.1));
    CHECK(d(2400) == 0.0);
    CHECK(d(5000) == 0.0);
    for (double b : {500.0, 1500.0, 2400.0}) CHECK(std::abs(d(b - 1e-9) - d(b + 1e-9)) < 1e-9);
    double prev = 1.0;
    for (double x = 0; x < 3000; x += 7.3) {
        CHECK(d(x) <= prev);
        CHECK(d(x) == Approx(oracle::decay(x)).epsilon(1e-14));
        prev = d(x);
    }
}

TEST_CASE("walkability examples") {
    const StreetGraph g = line_graph(40, 50.0);
    CHECK(walk({}, g) == 0.0);
    CHECK(walk({{{100, 0}, PoiCategory::Grocery}}, g) == Approx(3.0));
    CHECK(walk({{{1500, 0}, PoiCategory::Grocery}}, g) == Approx(0.3));
    // Second grocery contributes nothing: one weight in the category.
    CHECK(walk({{{100, 0}, PoiCategory::Grocery}, {{150, 0}, PoiCategory::Grocery}}, g) == Approx(3.0));
    // Nightlife is not a walkability category.
    CHECK(walk({{{100, 0}, PoiCategory::Nightlife}}, g) == 0.0);
}

TEST_CASE("walkability uses network, not straight-line, distance") {
    // U-shaped street: the POI is 100 m away across the gap but 2100 m along the street.
    StreetGraph g;
    g.add_node("a", {0, 0});
    g.add_node("b", {0, 1000});
    g.add_node("c", {100, 1000});
    g.add_node("d", {100, 0});
    g.add_edge(0, 1, 1000);
    g.add_edge(1, 2, 100);
    g.add_edge(2, 3, 1000);
    const double got = walk({{{100, 0}, PoiCategory::Grocery}}, g);
    CHECK(got == Approx(3.0 * DecayCurve{}(2100.0)));
}

TEST_CASE("walkability is bounded by the sum of weights and flags unreachable blocks") {
    const auto cfg = WalkabilityConfig::standard();
    CHECK(cfg.max_score() == Approx(15.0));
    const StreetGraph g = line_graph(3, 50);
    std::vector<Poi> dense;
    for (int c = 0; c < 9; ++c)
        for (int k = 0; k < 12; ++k) dense.push_back({{50.0, 0.0}, static_cast<PoiCategory>(c)});
    CHECK(walk(dense, g) == Approx(15.0));
    const auto far = walkability_block({5000, 5000}, build_poi_index(dense, g, 200), g, cfg);
    CHECK(far.flagged);
    CHECK(far.value == 0.0);
}

TEST_CASE("block aggregates") {
    const std::vector<double> one = {3.0}, two = {0.0, 3.0}, areas = {100, 300};
    CHECK(corehood_walkability(one).value == 3.0);
    CHECK(corehood_walkability(two).value == 1.5);
    CHECK(avg_block_area(areas).value == 200.0);
    const std::vector<int> same = {2000, 2000, 2000};
    CHECK(building_age_diversity(same).value == 0.0);
    CHECK(population_density(50, 0.025e6).value == Approx(2000.0));
    CHECK(population_density(50, 0).flagged);
}

TEST_CASE("SD composites: poverty equal to unemployment, independent mobility") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    const int n = 4000;
    std::vector<double> un(n), pov(n), mob(n);
    for (int i = 0; i < n; ++i) {
        un[i] = n01(rng);
        pov[i] = un[i];
        mob[i] = n01(rng);
    }
    const auto sd = sd_composites(un, pov, mob);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(sd.loadings(0, 0) == Approx(r).epsilon(0.02));
    CHECK(sd.loadings(1, 0) == Approx(r).epsilon(0.02));
    CHECK(std::abs(sd.loadings(2, 0)) < 0.05);
    CHECK(std::abs(sd.loadings(2, 1)) == Approx(1.0).epsilon(0.01));

    // Orthonormal loadings; exact reconstruction of the correlation matrix.
    CHECK((sd.loadings.transpose() * sd.loadings - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::Matrix3d rec = sd.loadings * sd.eigenvalues.asDiagonal() * sd.loadings.transpose();
    CHECK((rec - sd.correlation).cwiseAbs().maxCoeff() < 1e-8);

    // Flipping the mobility column flips instability only.
    std::vector<double> neg(mob);
    for (auto& v : neg) v = -v;
    const auto flipped = sd_composites(un, pov, neg);
    CHECK((flipped.disadvantage - sd.disadvantage).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((flipped.instability + sd.instability).cwiseAbs().maxCoeff() < 1e-9);
}

// With a near-identity correlation matrix the eigenvectors are set by sampling
// noise, so only the spectrum is pinned.
TEST_CASE("SD composites of independent columns have unit eigenvalues") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n01;
    const int n = 20000;
    std::vector<double> a(n), b(n), c(n);
    for (int i = 0; i < n; ++i) {
        a[i] = n01(rng);
        b[i] = n01(rng);
        c[i] = n01(rng);
    }
    const auto sd = sd_composites(a, b, c);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(sd.eigenvalues(k) - 1.0) < 0.05);
    CHECK(sd.eigenvalues.sum() == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("ambient population") {
    const auto units = crimebsf::testing::grid_units(1, 2, 100);
    std::vector<Stay> stays = {{"p1", 0, {50, 50}, 2.0}};
    CHECK(ambient_population(stays, units, 1)[0] == 1.0);
    stays = {{"p1", 0, {50, 50}, 0.5}};
    CHECK(ambient_population(stays, units, 1)[0] == 0.0);
    stays.clear();
    for (const char* p : {"a", "b", "c"}) stays.push_back({p, 0, {50, 50}, 1.0});
    stays.push_back({"a", 1, {50, 50}, 3.0});
    stays.push_back({"a", 1, {60, 50}, 3.0});  // same person, same day: counted once
    CHECK(ambient_population(stays, units, 2)[0] == 2.0);
}

TEST_CASE("attractiveness counts NHB arrivals once per corehood") {
    const auto units = crimebsf::testing::grid_units(1, 3, 100);
    const auto ch = build_corehoods(units, 50);  // {0,1}, {0,1,2}, {1,2}
    std::vector<Trip> trips = {{"p", 0, {250, 50}, {50, 50}, TripType::NHB}};
    auto a = attractiveness(trips, units, ch);
    CHECK(a == std::vector<double>{1, 1, 0});
    trips[0].type = TripType::HBW;
    CHECK(attractiveness(trips, units, ch) == std::vector<double>{0, 0, 0});
    // Arrival on the edge shared by units 1 and 2 counts once in corehood 1.
    trips = {{"p", 0, {0, 0}, {200, 50}, TripType::NHB}};
    CHECK(attractiveness(trips, units, ch) == std::vector<double>{1, 1, 1});
}

TEST_CASE("feature selection parsing") {
    const auto core = FeatureSelection::parse("Core");
    CHECK(core.includes("nightlife_pois", FeatureGroup::Core));
    CHECK_FALSE(core.includes("disadvantage", FeatureGroup::SD));
    const auto sdbe = FeatureSelection::parse("SD+BE");
    CHECK(sdbe.includes("walkability", FeatureGroup::BE));
    CHECK(sdbe.includes("food_pois", FeatureGroup::Core));
    CHECK_FALSE(sdbe.includes("attractiveness", FeatureGroup::M));
    const auto list = FeatureSelection::parse("Features:walkability,disadvantage");
    CHECK(list.names.size() == 2);
    CHECK_THROWS_AS(FeatureSelection::parse("SD+XX"), InputError);
}

TEST_CASE("feature matrix: Core columns, Full columns and z-scoring") {
    SynthConfig cfg;
    cfg.rows = cfg.cols = 6;
    cfg.seed = 3;
    const auto s = generate_city(cfg);
    const auto ch = build_corehoods(s.city.units, kHalfMileM);
    const auto raw = compute_raw_features(s.city, ch);
    const auto core = select_features(raw, FeatureSelection::parse("Core"));
    CHECK(core.names == std::vector<std::string>{"residential_population", "nightlife_pois", "shops_pois",
                                                 "food_pois", "ambient_population"});
    const auto full = select_features(raw, FeatureSelection::parse("SD+BE+M"));
    // Equal-sized synthetic blocks make avg_block_area constant; it is dropped with a warning.
    CHECK(full.names.size() == feature_catalogue().size() - 1);
    REQUIRE(full.warnings.size() == 1);
    CHECK(full.warnings[0].find("avg_block_area") != std::string::npos);
    for (Eigen::Index j = 0; j < full.X.cols(); ++j) {
        const auto c = full.X.col(j);
        const double mean = c.mean();
        const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(c.size() - 1));
        CHECK(std::abs(mean) < 1e-8);
        CHECK(std::abs(sd - 1.0) < 1e-6);
        CHECK(c.allFinite());
    }
}

TEST_CASE("raw features are permutation-equivariant in unit order") {
    SynthConfig cfg;
    cfg.rows = cfg.cols = 5;
    cfg.seed = 8;
    const auto s = generate_city(cfg);
    CityDataset shuffled = s.city;
    // Reverse units, keeping blocks and census aligned.
    const std::size_t n = shuffled.units.size();
    std::reverse(shuffled.units.begin(), shuffled.units.end());
    std::reverse(shuffled.census.begin(), shuffled.census.end());
    const auto a = compute_raw_features(s.city, build_corehoods(s.city.units, kHalfMileM));
    const auto b = compute_raw_features(shuffled, build_corehoods(shuffled.units, kHalfMileM));
    for (std::size_t i = 0; i < n; ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        const auto R = static_cast<Eigen::Index>(n - 1 - i);
        CHECK(a.core_ids[i] == b.core_ids[n - 1 - i]);
        CHECK((a.values.row(I) - b.values.row(R)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("corehood walkability matches a brute-force recomputation on a 3x3 grid") {
    SynthConfig cfg;
    cfg.rows = cfg.cols = 3;
    cfg.cell_m = 400;
    cfg.seed = 12;
    cfg.poi_density = 3.0;
    const auto s = generate_city(cfg);
    const auto ch = build_corehoods(s.city.units, kHalfMileM);
    const auto raw = compute_raw_features(s.city, ch);
    const auto col = *raw.column("walkability");
    const auto apsp = oracle::all_pairs(s.city.street_graph);
    for (std::size_t c = 0; c < ch.size(); ++c) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t m : ch[c].members)
            for (std::size_t b : s.city.units[m].blocks) {
                sum += oracle::walkability(centroid(s.city.blocks[b].geometry), s.city.pois, s.city.street_graph, apsp);
                ++count;
            }
        CHECK(raw.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(col)) == Approx(sum / count).epsilon(1e-12));
    }
}

TEST_CASE("serial and OpenMP kernels agree bit for bit") {
    SynthConfig cfg;
    cfg.rows = cfg.cols = 6;
    cfg.seed = 21;
    const auto s = generate_city(cfg);
    std::vector<MultiPolygon> geoms;
    std::vector<Point> centroids;
    for (const auto& u : s.city.units) {
        geoms.push_back(u.geometry);
        centroids.push_back(u.centroid);
    }
    const auto boxes = unit_boxes(s.city.units);
    CHECK(kernels::serial::within_distance(geoms, boxes, 900) == kernels::omp::within_distance(geoms, boxes, 900));
    std::vector<Point> pts;
    for (const auto& c : s.city.crimes) pts.push_back(c.location);
    CHECK(kernels::serial::point_hits(pts, geoms, boxes, 30) == kernels::omp::point_hits(pts, geoms, boxes, 30));

    const auto wc = WalkabilityConfig::standard();
    const auto idx = build_poi_index(s.city.pois, s.city.street_graph, wc.snap_max_m);
    const auto ws = kernels::serial::walkability(centroids, idx, s.city.street_graph, wc);
    const auto wo = kernels::omp::walkability(centroids, idx, s.city.street_graph, wc);
    for (std::size_t i = 0; i < ws.size(); ++i) CHECK(ws[i].value == wo[i].value);

    std::vector<double> ds(centroids.size() * centroids.size()), dn(ds.size());
    kernels::serial::euclidean_distances(centroids, ds);
    kernels::omp::euclidean_distances(centroids, dn);
    CHECK(ds == dn);
}
