#include "crimebsf/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "crimebsf/config.hpp"
#include "crimebsf/csv.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/features.hpp"
#include "crimebsf/ingest.hpp"
#include "crimebsf/nb2.hpp"
#include "crimebsf/spatial_filter.hpp"

namespace crimebsf {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string unit_id(int r, int c) { return "u" + std::to_string(r) + "_" + std::to_string(c); }

// Base POI rates per unit, in PoiCategory order.
constexpr double kPoiRates[kPoiCategoryCount] = {0.6, 3.0, 3.0, 0.4, 0.6, 0.5, 1.0, 0.5, 0.3, 1.5};

void validate(const SynthConfig& cfg) {
    if (cfg.rows < 3 || cfg.cols < 3) throw InputError("synthetic grid must be at least 3x3");
    if (!(cfg.cell_m > 0.0)) throw InputError("cell_m must be positive");
    if (!(cfg.phi > 0.0)) throw InputError("phi must be positive");
    if (cfg.spatial_sd < 0.0) throw InputError("spatial_sd must be non-negative");
    if (cfg.days <= 0) throw InputError("days must be positive");
    if (cfg.work_prob < 0.0 || cfg.work_prob > 1.0 || cfg.other_prob < 0.0 || cfg.other_prob > 1.0)
        throw InputError("trip probabilities must lie in [0, 1]");
    if (cfg.poi_density < 0.0 || cfg.agents_per_1000 < 0.0) throw InputError("rates must be non-negative");
    std::set<std::string> known;
    for (const auto& [n, g] : feature_catalogue()) known.insert(n);
    for (const auto& [n, b] : cfg.beta)
        if (!known.count(n)) throw InputError("unknown generating feature '" + n + "'");
}

}  // namespace

SyntheticCity generate_city(const SynthConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unif(rng); };

    SyntheticCity out;
    CityDataset& city = out.city;
    city.name = cfg.name;
    city.mobility_days = cfg.days;
    const double cell = cfg.cell_m;
    const int R = cfg.rows, C = cfg.cols;

    // Units, blocks, parcels and census.
    for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) {
            SpatialUnit u;
            u.id = unit_id(r, c);
            const double x0 = c * cell, y0 = r * cell;
            u.geometry = make_rectangle(x0, y0, x0 + cell, y0 + cell);
            u.centroid = {x0 + 0.5 * cell, y0 + 0.5 * cell};
            u.residential_population = std::round(uniform(300.0, 3000.0));
            u.dwelling_units = std::round(u.residential_population / uniform(2.0, 3.5));

            const double era = uniform(1900.0, 2000.0);
            const double spread = uniform(2.0, 30.0);
            // Land-use propensities of this unit.
            std::array<double, 4> lu{};
            double lu_sum = 0.0;
            for (auto& v : lu) {
                std::gamma_distribution<double> g(0.7, 1.0);
                v = g(rng);
                lu_sum += v;
            }
            for (auto& v : lu) v /= lu_sum;
            for (int k = 0; k < 4; ++k) {
                Block b;
                b.id = "b" + std::to_string(r) + "_" + std::to_string(c) + "_" + std::to_string(k);
                b.unit_id = u.id;
                const double bx = x0 + (k % 2) * 0.5 * cell, by = y0 + (k / 2) * 0.5 * cell;
                b.geometry = make_rectangle(bx, by, bx + 0.5 * cell, by + 0.5 * cell);
                b.area_m2 = area(b.geometry);
                std::poisson_distribution<int> nb(5.0);
                const int n_buildings = 1 + nb(rng);
                for (int i = 0; i < n_buildings; ++i)
                    b.building_years.push_back(
                        static_cast<int>(std::clamp(std::round(era + spread * normal(rng)), 1801.0, 2024.0)));
                u.blocks.push_back(city.blocks.size());
                city.blocks.push_back(std::move(b));

                const double f = uniform(0.2, 0.8);
                const double split = by + f * 0.5 * cell;
                for (const auto& [ya, yb] : {std::pair{by, split}, std::pair{split, by + 0.5 * cell}}) {
                    const double pick = unif(rng);
                    int use = 0;
                    double acc = lu[0];
                    while (use < 3 && pick > acc) acc += lu[++use];
                    city.parcels.push_back({make_rectangle(bx, ya, bx + 0.5 * cell, yb), static_cast<LandUse>(use)});
                }
            }

            CensusRecord cr;
            const double a = normal(rng), b = normal(rng), e = normal(rng);
            cr.poverty_rate = logistic(-1.5 + 0.8 * a);
            cr.unemployment_rate = logistic(-2.5 + 0.6 * a + 0.4 * e);
            cr.residential_mobility_rate = logistic(-1.2 + 0.7 * b);
            const double conc = std::exp(normal(rng));
            double ssum = 0.0;
            for (double& s : cr.ethnic_shares) {
                std::gamma_distribution<double> g(conc, 1.0);
                s = g(rng) + 1e-6;
                ssum += s;
            }
            for (double& s : cr.ethnic_shares) s /= ssum;
            city.census.push_back(cr);
            city.units.push_back(std::move(u));
        }
    }

    // Lattice street graph fine enough that every block centroid is a node.
    const int sub = 4 * static_cast<int>(std::ceil(cell / 1000.0));
    const double step = cell / sub;
    const int nx = C * sub + 1, ny = R * sub + 1;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            city.street_graph.add_node("n" + std::to_string(i) + "_" + std::to_string(j), {i * step, j * step});
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const auto id = static_cast<std::size_t>(j * nx + i);
            if (i + 1 < nx) city.street_graph.add_edge(id, id + 1, step);
            if (j + 1 < ny) city.street_graph.add_edge(id, id + static_cast<std::size_t>(nx), step);
        }

    // POIs with a per-unit intensity.
    const double margin = 0.02 * cell;
    auto interior_point = [&](const SpatialUnit& u) {
        const BBox b = bbox(u.geometry);
        return Point{uniform(b.min_x + margin, b.max_x - margin), uniform(b.min_y + margin, b.max_y - margin)};
    };
    for (const auto& u : city.units) {
        const double intensity = std::exp(0.7 * normal(rng));
        for (std::size_t k = 0; k < kPoiCategoryCount; ++k) {
            std::poisson_distribution<int> pd(kPoiRates[k] * intensity * cfg.poi_density);
            const int n = pd(rng);
            for (int i = 0; i < n; ++i) city.pois.push_back({interior_point(u), static_cast<PoiCategory>(k)});
        }
    }

    // Agents: home unit by population, destinations by gravity.
    const std::size_t NU = city.units.size();
    std::vector<double> pull(NU);
    for (auto& p : pull) p = std::exp(0.8 * normal(rng));
    std::vector<double> pop(NU);
    double total_pop = 0.0;
    for (std::size_t i = 0; i < NU; ++i) total_pop += pop[i] = city.units[i].residential_population;
    std::discrete_distribution<std::size_t> home_dist(pop.begin(), pop.end());
    const int agents = static_cast<int>(std::round(total_pop / 1000.0 * cfg.agents_per_1000));
    std::vector<std::vector<double>> gravity(NU, std::vector<double>(NU));
    for (std::size_t i = 0; i < NU; ++i)
        for (std::size_t j = 0; j < NU; ++j)
            gravity[i][j] = pull[j] * std::exp(-distance(city.units[i].centroid, city.units[j].centroid) / (2.0 * cell));
    for (int a = 0; a < agents; ++a) {
        const std::string pid = "p" + std::to_string(a);
        const std::size_t home = home_dist(rng);
        std::discrete_distribution<std::size_t> dest(gravity[home].begin(), gravity[home].end());
        const Point home_pt = interior_point(city.units[home]);
        for (int d = 0; d < cfg.days; ++d) {
            city.stays.push_back({pid, d, home_pt, uniform(8.0, 14.0)});
            Point last = home_pt;
            if (unif(rng) < cfg.work_prob) {
                const Point w = interior_point(city.units[dest(rng)]);
                city.trips.push_back({pid, d, home_pt, w, TripType::HBW});
                city.stays.push_back({pid, d, w, uniform(4.0, 9.0)});
                last = w;
            }
            if (unif(rng) < cfg.other_prob) {
                const Point o = interior_point(city.units[dest(rng)]);
                const TripType type = last == home_pt ? TripType::HBO : TripType::NHB;
                city.trips.push_back({pid, d, last, o, type});
                city.stays.push_back({pid, d, o, uniform(0.25, 3.0)});
            }
        }
    }

    // Generating features through the regular pipeline.
    const auto corehoods = build_corehoods(city.units, cfg.radius_m);
    const RawFeatureTable raw = compute_raw_features(city, corehoods);
    TruthRecord& t = out.truth;
    t.seed = cfg.seed;
    t.beta0 = cfg.beta0;
    t.phi = cfg.phi;
    const auto N = static_cast<Eigen::Index>(NU);
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(N, cfg.beta0);
    if (!cfg.beta.empty()) {
        FeatureSelection sel;
        for (const auto& [n, b] : cfg.beta) sel.names.push_back(n);
        sel.label = "truth";
        const FeatureMatrix fm = select_features(raw, sel);
        if (fm.names.size() != cfg.beta.size()) throw InputError("a generating feature is constant on this city");
        t.feature_names = fm.names;
        t.X = fm.X;
        t.beta.resize(static_cast<Eigen::Index>(cfg.beta.size()));
        for (std::size_t j = 0; j < cfg.beta.size(); ++j) t.beta(static_cast<Eigen::Index>(j)) = cfg.beta[j].second;
        eta += t.X * t.beta;
    } else {
        t.X.resize(N, 0);
        t.beta.resize(0);
    }

    t.field = Eigen::VectorXd::Zero(N);
    if (cfg.spatial_field == SpatialField::Eigen && cfg.spatial_sd > 0.0) {
        const ConnectivityMatrix cm = build_connectivity(cfg.field_connectivity, city, corehoods);
        const EigenBasis basis = moran_eigenbasis(residual_projector(with_intercept(t.X)), cm.C);
        t.gamma.resize(basis.E.cols());
        for (Eigen::Index l = 0; l < t.gamma.size(); ++l) t.gamma(l) = normal(rng);
        if (cfg.field_prior == FieldPrior::Bsf) {
            const Eigen::MatrixXd K = basis.E.transpose() * laplacian(cm.C) * basis.E;
            Eigen::LLT<Eigen::MatrixXd> llt(K);
            if (llt.info() != Eigen::Success) throw ComputeError("field precision E'QE is not positive definite");
            t.gamma = llt.matrixU().solve(t.gamma);  // cov = (U'U)^-1
        }
        Eigen::VectorXd f = basis.E * t.gamma;
        const double sd = std::sqrt((f.array() - f.mean()).square().sum() / static_cast<double>(N - 1));
        const double scale = cfg.spatial_sd / sd;
        t.gamma *= scale;
        t.field = f * scale;
        eta += t.field;
    }
    t.mu = eta.array().exp();
    t.y.resize(NU);
    for (std::size_t i = 0; i < NU; ++i) t.y[i] = nb2_sample(rng, t.mu(static_cast<Eigen::Index>(i)), cfg.phi);

    // Crimes strictly inside their unit, farther than the assignment buffer from its edge.
    out.window.start = parse_date("2019-01-01");
    out.window.end = parse_date("2020-01-01");
    const int window_days = static_cast<int>((out.window.end - out.window.start).count());
    const double inner = std::min(100.0, 0.25 * cell);
    std::size_t crime_id = 0;
    for (std::size_t i = 0; i < NU; ++i) {
        const BBox b = bbox(city.units[i].geometry);
        for (int k = 0; k < t.y[i]; ++k) {
            CrimeEvent e;
            e.id = "c" + std::to_string(crime_id++);
            e.location = {uniform(b.min_x + inner, b.max_x - inner), uniform(b.min_y + inner, b.max_y - inner)};
            e.category = unif(rng) < 0.3 ? CrimeCategory::Violent : CrimeCategory::Property;
            e.date = out.window.start + std::chrono::days{static_cast<int>(unif(rng) * window_days) % window_days};
            city.crimes.push_back(std::move(e));
        }
    }
    return out;
}

void write_truth(const SyntheticCity& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& t = s.truth;
    {
        std::ofstream out(dir / "truth.csv");
        if (!out) throw ComputeError("cannot write truth.csv");
        out << "parameter,value\n";
        out << "seed," << t.seed << "\n";
        out << "beta0," << format_double(t.beta0) << "\n";
        for (std::size_t j = 0; j < t.feature_names.size(); ++j)
            out << "beta[" << t.feature_names[j] << "]," << format_double(t.beta(static_cast<Eigen::Index>(j))) << "\n";
        out << "phi," << format_double(t.phi) << "\n";
        for (Eigen::Index l = 0; l < t.gamma.size(); ++l)
            out << "gamma[" << l << "]," << format_double(t.gamma(l)) << "\n";
    }
    std::ofstream out(dir / "truth_units.csv");
    if (!out) throw ComputeError("cannot write truth_units.csv");
    out << "unit_id,mu,field,y\n";
    for (std::size_t i = 0; i < s.city.units.size(); ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        out << csv_escape(s.city.units[i].id) << ',' << format_double(t.mu(I)) << ',' << format_double(t.field(I))
            << ',' << t.y[i] << "\n";
    }
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    const auto kv = KeyValueConfig::load(path);
    static const std::set<std::string> keys = {
        "rows",          "cols",         "cell_m",      "seed",     "name",           "beta0",
        "beta",          "phi",          "spatial_field", "spatial_sd", "field_prior", "field_connectivity", "radius_m",
        "poi_density",   "agents_per_1000", "days",     "work_prob", "other_prob"};
    for (const auto& [k, v] : kv.values())
        if (!keys.count(k)) throw InputError(kv.origin() + ": unknown key '" + k + "'");
    SynthConfig c;
    c.rows = static_cast<int>(kv.get_int("rows", c.rows));
    c.cols = static_cast<int>(kv.get_int("cols", c.cols));
    c.cell_m = kv.get_double("cell_m", c.cell_m);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.name = kv.get_or("name", c.name);
    c.beta0 = kv.get_double("beta0", c.beta0);
    if (auto b = kv.get("beta")) {
        for (const auto& item : split(*b, ',')) {
            if (trim(item).empty()) continue;
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw InputError(kv.origin() + ": field 'beta' expects name:value pairs");
            try {
                c.beta.emplace_back(trim(parts[0]), std::stod(parts[1]));
            } catch (const std::exception&) {
                throw InputError(kv.origin() + ": field 'beta' has a malformed value '" + parts[1] + "'");
            }
        }
    }
    c.phi = kv.get_double("phi", c.phi);
    const std::string field = kv.get_or("spatial_field", "none");
    if (field == "none") c.spatial_field = SpatialField::None;
    else if (field == "eigen") c.spatial_field = SpatialField::Eigen;
    else throw InputError(kv.origin() + ": field 'spatial_field' must be none or eigen");
    c.spatial_sd = kv.get_double("spatial_sd", c.spatial_sd);
    const std::string prior = kv.get_or("field_prior", "iid");
    if (prior == "iid") c.field_prior = FieldPrior::Iid;
    else if (prior == "bsf") c.field_prior = FieldPrior::Bsf;
    else throw InputError(kv.origin() + ": field 'field_prior' must be iid or bsf");
    const std::string kind = kv.get_or("field_connectivity", "contiguity");
    auto k = parse_connectivity_kind(kind);
    if (!k) throw InputError(kv.origin() + ": field 'field_connectivity' has unknown value '" + kind + "'");
    c.field_connectivity = *k;
    c.radius_m = kv.get_double("radius_m", c.radius_m);
    c.poi_density = kv.get_double("poi_density", c.poi_density);
    c.agents_per_1000 = kv.get_double("agents_per_1000", c.agents_per_1000);
    c.days = static_cast<int>(kv.get_int("days", c.days));
    c.work_prob = kv.get_double("work_prob", c.work_prob);
    c.other_prob = kv.get_double("other_prob", c.other_prob);
    validate(c);
    return c;
}

}  // namespace crimebsf
