// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "crimebsf/geo_core.hpp"
#include "crimebsf/kernels.hpp"
#include "crimebsf/synthgen.hpp"

using namespace crimebsf;

namespace {

Backend backend(const benchmark::State& st) { return st.range(0) == 0 ? Backend::Serial : Backend::OpenMP; }

const SyntheticCity& city() {
    static const SyntheticCity c = [] {
        SynthConfig cfg;
        cfg.rows = 15;
        cfg.cols = 15;
        cfg.seed = 7;
        return generate_city(cfg);
    }();
    return c;
}

void BM_nb2_terms(benchmark::State& st) {
    const std::size_t n = 5000;
    std::mt19937_64 rng(1);
    std::poisson_distribution<int> pois(8.0);
    std::vector<double> y(n), eta(n), ll(n), de(n), dp(n);
    std::vector<int> idx(n);
    std::vector<double> lg(200), dg(200);
    const double phi = 3.0;
    for (std::size_t k = 0; k < lg.size(); ++k) {
        lg[k] = std::lgamma(k + phi) - std::lgamma(phi) - std::lgamma(k + 1.0);
        dg[k] = 0.0;
        for (std::size_t j = 0; j < k; ++j) dg[k] += 1.0 / (phi + static_cast<double>(j));
    }
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = std::min(pois(rng), 199);
        y[i] = idx[i];
        eta[i] = std::log(8.0) + 0.1 * std::sin(static_cast<double>(i));
    }
    const kernels::Nb2Inputs in{y, idx, eta, lg, dg, phi};
    const kernels::Nb2Outputs out{ll, de, dp};
    for (auto _ : st) {
        kernels::nb2_terms(backend(st), in, out);
        benchmark::DoNotOptimize(ll.data());
    }
}

void BM_within_distance(benchmark::State& st) {
    const auto& units = city().city.units;
    std::vector<MultiPolygon> g;
    for (const auto& u : units) g.push_back(u.geometry);
    const auto boxes = unit_boxes(units);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::within_distance(backend(st), g, boxes, kHalfMileM));
}

void BM_point_hits(benchmark::State& st) {
    const auto& c = city().city;
    std::vector<MultiPolygon> g;
    for (const auto& u : c.units) g.push_back(u.geometry);
    const auto boxes = unit_boxes(c.units);
    std::vector<Point> pts;
    for (const auto& t : c.trips) pts.push_back(t.destination);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::point_hits(backend(st), pts, g, boxes, 0.0));
}

void BM_walkability(benchmark::State& st) {
    const auto& c = city().city;
    const auto cfg = WalkabilityConfig::standard();
    const auto index = build_poi_index(c.pois, c.street_graph, cfg.snap_max_m);
    std::vector<Point> locs;
    for (std::size_t i = 0; i < c.blocks.size(); i += 8) locs.push_back(centroid(c.blocks[i].geometry));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::walkability(backend(st), locs, index, c.street_graph, cfg));
}

void BM_euclidean_distances(benchmark::State& st) {
    const auto& units = city().city.units;
    std::vector<Point> pts;
    for (const auto& u : units) pts.push_back(u.centroid);
    std::vector<double> out(pts.size() * pts.size());
    for (auto _ : st) {
        kernels::euclidean_distances(backend(st), pts, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_nb2_terms)->Arg(0)->Arg(1)->ArgName("omp");
BENCHMARK(BM_within_distance)->Arg(0)->Arg(1)->ArgName("omp");
BENCHMARK(BM_point_hits)->Arg(0)->Arg(1)->ArgName("omp");
BENCHMARK(BM_walkability)->Arg(0)->Arg(1)->ArgName("omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_euclidean_distances)->Arg(0)->Arg(1)->ArgName("omp");

BENCHMARK_MAIN();
