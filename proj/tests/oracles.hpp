#pragma once
// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the routine it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "crimebsf/connectivity.hpp"
#include "crimebsf/features.hpp"
#include "crimebsf/log_posterior.hpp"
#include "crimebsf/model.hpp"
#include "crimebsf/street_graph.hpp"

namespace crimebsf::oracle {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

// Direct NB2 log pmf from the gamma-function definition.
inline double nb2_log_pmf(int y, double mu, double phi) {
    return std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) + phi * std::log(phi / (mu + phi)) +
           y * std::log(mu / (mu + phi));
}

// log mean_s p(y | exp(beta0_s + x'beta_s), phi_s) for a fit that never saw y.
inline double exact_loo_term(const PosteriorSamples& s, int y, const Eigen::VectorXd& x) {
    const Eigen::VectorXd b0 = s.beta0();
    const Eigen::MatrixXd b = s.beta();
    const Eigen::VectorXd phi = s.phi();
    std::vector<double> lp(static_cast<std::size_t>(b0.size()));
    for (Eigen::Index k = 0; k < b0.size(); ++k)
        lp[static_cast<std::size_t>(k)] = nb2_log_pmf(y, std::exp(b0(k) + b.row(k).dot(x)), phi(k));
    const double m = *std::max_element(lp.begin(), lp.end());
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - m);
    return m + std::log(acc / static_cast<double>(lp.size()));
}

// Symmetric 0/1 matrix with zero diagonal; a ring keeps every row nonempty.
inline Eigen::MatrixXd random_connectivity(int n, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(density);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        C(i, j) = C(j, i) = 1.0;
        for (int k = i + 2; k < n; ++k)
            if (coin(rng)) C(i, k) = C(k, i) = 1.0;
    }
    return C;
}

// Eigenvalues of MCM kept by the selection rule, via the general
// (nonsymmetric) eigensolver, descending.
inline std::vector<double> brute_force_selection(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C,
                                                 double threshold) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M * C * M, false);
    std::vector<double> all;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) all.push_back(es.eigenvalues()(i).real());
    std::sort(all.begin(), all.end(), std::greater<>());
    std::vector<double> keep;
    for (double l : all)
        if (l > 0.0 && l / all.front() >= threshold) keep.push_back(l);
    return keep;
}

inline Eigen::MatrixXd graph_laplacian(const Eigen::MatrixXd& C) {
    Eigen::MatrixXd Q = -C;
    for (Eigen::Index i = 0; i < C.rows(); ++i) Q(i, i) = C.row(i).sum();
    return Q;
}

// Small random model of the given variant.
inline LogPosterior random_log_posterior(Variant v, std::mt19937_64& rng, PriorConfig prior = {}) {
    std::normal_distribution<double> n01;
    const int N = 30, P = 3, L = 5;
    ModelData d;
    d.X.resize(N, P);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < P; ++j) d.X(i, j) = n01(rng);
    std::poisson_distribution<int> pois(4.0);
    for (int i = 0; i < N; ++i) d.y.push_back(pois(rng) + (i % 7 == 0 ? 15 : 0));
    if (v != Variant::NB_RIDGE) {
        Eigen::MatrixXd A(N, L);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < L; ++j) A(i, j) = n01(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        d.E = qr.householderQ() * Eigen::MatrixXd::Identity(N, L);
        d.lambdas.resize(L);
        for (int j = 0; j < L; ++j) d.lambdas(j) = 3.0 / (1.0 + j);
        const Eigen::MatrixXd C = random_connectivity(N, 0.1, rng);
        d.K = d.E.transpose() * graph_laplacian(C) * d.E;
    } else {
        d.E.resize(N, 0);
    }
    return LogPosterior(v, d, prior);
}

inline Eigen::VectorXd random_theta(const LogPosterior& lp, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 0.7);
    Eigen::VectorXd t(lp.dim());
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = n(rng);
    t(lp.idx_beta0()) += 1.2;
    return t;
}

// Max over components of |g - fd| / max(|g|, |fd|, 1), central differences.
inline double gradient_error(const LogPosterior& lp, const Eigen::VectorXd& theta, double h = 1e-6) {
    Eigen::VectorXd g;
    lp.evaluate(theta, &g);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd a = theta, b = theta;
        a(i) += h;
        b(i) -= h;
        const double fd = (lp.evaluate(a, nullptr) - lp.evaluate(b, nullptr)) / (2.0 * h);
        worst = std::max(worst, std::abs(g(i) - fd) / std::max({std::abs(g(i)), std::abs(fd), 1.0}));
    }
    return worst;
}

// Land-use entropy in base 2, rescaled.
inline double lum(double a, double b, double c) {
    const double t = a + b + c;
    double h = 0.0;
    for (double v : {a, b, c})
        if (v > 0.0) h += -(v / t) * std::log2(v / t);
    return h / std::log2(3.0);
}

inline double hhi(const std::vector<double>& shares) {
    const double t = std::accumulate(shares.begin(), shares.end(), 0.0);
    double s = 0.0;
    for (double v : shares) s += (v / t) * (v / t);
    return 1.0 - s;
}

// Longest edge of the minimum spanning tree by Kruskal with union-find.
inline double kruskal_longest_edge(const std::vector<Point>& pts) {
    struct E {
        double w;
        std::size_t a, b;
    };
    std::vector<E> edges;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            edges.push_back({std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y), i, j});
    std::sort(edges.begin(), edges.end(), [](const E& l, const E& r) { return l.w < r.w; });
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    double longest = 0.0;
    std::size_t joined = 0;
    for (const auto& e : edges) {
        const auto ra = root(e.a), rb = root(e.b);
        if (ra == rb) continue;
        parent[ra] = rb;
        longest = e.w;
        if (++joined + 1 == pts.size()) break;
    }
    return longest;
}

inline Eigen::MatrixXd distance_connectivity(const std::vector<Point>& pts) {
    const double t = kruskal_longest_edge(pts);
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto& p = pts[static_cast<std::size_t>(i)];
            const auto& q = pts[static_cast<std::size_t>(j)];
            const double d = std::hypot(p.x - q.x, p.y - q.y);
            if (d <= t) C(i, j) = 1.0 - std::pow(d / (4.0 * t), 2);
        }
    return C;
}

// Piecewise decay with the default breakpoints.
inline double decay(double d) {
    if (d <= 500.0) return 1.0;
    if (d <= 1500.0) return 1.0 - 0.9 * std::pow((d - 500.0) / 1000.0, 2);
    if (d <= 2400.0) return 0.1 * (2400.0 - d) / 900.0;
    return 0.0;
}

// Floyd-Warshall on a street graph.
inline std::vector<std::vector<double>> all_pairs(const StreetGraph& g) {
    const std::size_t n = g.node_count();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0.0;
        for (const auto& e : g.neighbors(i)) d[i][e.to] = std::min(d[i][e.to], e.length_m);
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

inline std::size_t nearest_node(const StreetGraph& g, const Point& p) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const double d = std::hypot(g.node(i).x - p.x, g.node(i).y - p.y);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// Walkability with the default category weights, every distance from Floyd-Warshall.
inline double walkability(const Point& loc, const std::vector<Poi>& pois, const StreetGraph& g,
                          const std::vector<std::vector<double>>& apsp) {
    const std::vector<std::pair<PoiCategory, std::vector<double>>> weights = {
        {PoiCategory::Grocery, {3.0}},
        {PoiCategory::Food, {0.75, 0.45, 0.25, 0.25, 0.225, 0.225, 0.225, 0.225, 0.2, 0.2}},
        {PoiCategory::Shops, {0.5, 0.45, 0.4, 0.35, 0.3}},
        {PoiCategory::Schools, {1.0}},
        {PoiCategory::Entertainment, {1.0}},
        {PoiCategory::Parks, {1.0}},
        {PoiCategory::Coffee, {1.25, 0.75}},
        {PoiCategory::Banks, {1.0}},
        {PoiCategory::Books, {1.0}},
    };
    const std::size_t s = nearest_node(g, loc);
    const double s_off = std::hypot(g.node(s).x - loc.x, g.node(s).y - loc.y);
    double score = 0.0;
    for (const auto& [cat, w] : weights) {
        std::vector<double> d;
        for (const auto& p : pois) {
            if (p.category != cat) continue;
            const std::size_t t = nearest_node(g, p.location);
            d.push_back(s_off + apsp[s][t] + std::hypot(g.node(t).x - p.location.x, g.node(t).y - p.location.y));
        }
        std::sort(d.begin(), d.end());
        for (std::size_t i = 0; i < std::min(d.size(), w.size()); ++i) score += w[i] * decay(d[i]);
    }
    return score;
}

struct FormulaErrors {
    double lum = 0.0, hhi = 0.0, walkability = 0.0, distance = 0.0;
};

inline FormulaErrors feature_formula_errors(std::uint64_t seed = 13) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FormulaErrors out;

    for (int k = 0; k < 200; ++k) {
        LandUseAreas a = {u(rng) * 1e5, u(rng) * 1e5, u(rng) * 1e5};
        if (k % 5 == 0) a[static_cast<std::size_t>(k / 5 % 3)] = 0.0;
        out.lum = std::max(out.lum, std::abs(land_use_mix(a).value - lum(a[0], a[1], a[2])));
        std::vector<double> s(6);
        for (auto& v : s) v = u(rng) < 0.2 ? 0.0 : u(rng);
        s[static_cast<std::size_t>(k % 6)] += 0.01;
        out.hhi = std::max(out.hhi, std::abs(hhi_diversity(s) - hhi(s)));
    }

    // Perturbed 9 x 9 street lattice at 300 m with detours on some edges.
    StreetGraph g;
    const int n = 9;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g.add_node("n" + std::to_string(i) + "_" + std::to_string(j),
                       {j * 300.0 + 40.0 * (u(rng) - 0.5), i * 300.0 + 40.0 * (u(rng) - 0.5)});
    auto id = [&](int i, int j) { return static_cast<std::size_t>(i * n + j); };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j + 1 < n) g.add_edge(id(i, j), id(i, j + 1), 300.0 * (1.0 + 0.5 * u(rng)));
            if (i + 1 < n && u(rng) < 0.85) g.add_edge(id(i, j), id(i + 1, j), 300.0 * (1.0 + 0.5 * u(rng)));
        }
    std::vector<Poi> pois;
    for (int k = 0; k < 60; ++k)
        pois.push_back({{u(rng) * 2400.0, u(rng) * 2400.0}, static_cast<PoiCategory>(k % 10)});
    const auto apsp = all_pairs(g);
    WalkabilityConfig cfg = WalkabilityConfig::standard();
    cfg.snap_max_m = 1e9;
    const PoiNetworkIndex idx = build_poi_index(pois, g, cfg.snap_max_m);
    for (int k = 0; k < 40; ++k) {
        const Point loc{u(rng) * 2400.0, u(rng) * 2400.0};
        const double got = walkability_block(loc, idx, g, cfg).value;
        out.walkability = std::max(out.walkability, std::abs(got - walkability(loc, pois, g, apsp)));
    }

    std::vector<Point> pts;
    for (int k = 0; k < 40; ++k) pts.push_back({u(rng) * 5000.0, u(rng) * 5000.0});
    out.distance = (distance_matrix(pts).C - distance_connectivity(pts)).cwiseAbs().maxCoeff();
    return out;
}

}  // namespace crimebsf::oracle
