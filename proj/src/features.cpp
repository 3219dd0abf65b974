#include "crimebsf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crimebsf/config.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/kernels.hpp"

namespace crimebsf {

std::string to_string(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::Core: return "Core";
        case FeatureGroup::SD: return "SD";
        case FeatureGroup::BE: return "BE";
        case FeatureGroup::M: return "M";
    }
    return "?";
}

double DecayCurve::operator()(double d) const {
    if (d <= d_full) return 1.0;
    if (d <= d_knee) {
        const double u = (d - d_full) / (d_knee - d_full);
        return 1.0 - (1.0 - knee_value) * u * u;
    }
    if (d <= d_zero) return knee_value * (d_zero - d) / (d_zero - d_knee);
    return 0.0;
}

WalkabilityConfig WalkabilityConfig::standard() {
    WalkabilityConfig c;
    c.categories = {
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
    return c;
}

double WalkabilityConfig::max_score() const {
    double s = 0.0;
    for (const auto& c : categories) s += std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
    return s;
}

PoiNetworkIndex build_poi_index(const std::vector<Poi>& pois, const StreetGraph& graph, double snap_max_m) {
    PoiNetworkIndex idx;
    for (const auto& p : pois) {
        const auto node = graph.snap(p.location, snap_max_m);
        if (!node) continue;
        idx.by_category[static_cast<std::size_t>(p.category)].push_back({*node, distance(p.location, graph.node(*node))});
    }
    return idx;
}

FlaggedValue land_use_mix(const LandUseAreas& areas) {
    const double total = areas[0] + areas[1] + areas[2];
    if (!(total > 0.0)) return {0.0, true};
    double h = 0.0;
    for (double a : areas) {
        if (a <= 0.0) continue;
        const double p = a / total;
        h -= p * std::log(p);
    }
    return {std::clamp(h / std::log(3.0), 0.0, 1.0), false};
}

FlaggedValue walkability_block(const Point& location, const PoiNetworkIndex& pois, const StreetGraph& graph,
                               const WalkabilityConfig& cfg) {
    return kernels::serial::walkability(std::span<const Point>(&location, 1), pois, graph, cfg)[0];
}

FlaggedValue corehood_walkability(std::span<const double> block_scores) {
    if (block_scores.empty()) return {0.0, true};
    return {std::accumulate(block_scores.begin(), block_scores.end(), 0.0) / static_cast<double>(block_scores.size()),
            false};
}

FlaggedValue avg_block_area(std::span<const double> block_areas_m2) {
    if (block_areas_m2.empty()) return {0.0, true};
    return {std::accumulate(block_areas_m2.begin(), block_areas_m2.end(), 0.0) /
                static_cast<double>(block_areas_m2.size()),
            false};
}

FlaggedValue building_age_diversity(std::span<const int> years) {
    if (years.empty()) return {0.0, true};
    const double n = static_cast<double>(years.size());
    double mean = 0.0;
    for (int y : years) mean += y;
    mean /= n;
    double ss = 0.0;
    for (int y : years) ss += (y - mean) * (y - mean);
    return {std::sqrt(ss / n), false};
}

FlaggedValue population_density(double dwelling_units, double area_m2) {
    if (!(area_m2 > 0.0)) return {0.0, true};
    return {dwelling_units / (area_m2 / 1e6), false};
}

double hhi_diversity(std::span<const double> shares) {
    double total = 0.0;
    for (double s : shares) {
        if (s < 0.0) throw InputError("negative population share");
        total += s;
    }
    if (!(total > 0.0)) throw InputError("no population");
    double sq = 0.0;
    for (double s : shares) sq += (s / total) * (s / total);
    return 1.0 - sq;
}

SdComposites sd_composites(std::span<const double> unemployment, std::span<const double> poverty,
                           std::span<const double> residential_mobility) {
    const std::size_t n = unemployment.size();
    if (poverty.size() != n || residential_mobility.size() != n) throw InputError("sd_composites: length mismatch");
    if (n < 3) throw InputError("sd_composites needs at least 3 units");
    const std::span<const double> cols[3] = {unemployment, poverty, residential_mobility};
    const char* names[3] = {"unemployment_rate", "poverty_rate", "residential_mobility_rate"};
    Eigen::MatrixXd Z(n, 3);
    for (int j = 0; j < 3; ++j) {
        Eigen::Map<const Eigen::VectorXd> c(cols[j].data(), static_cast<Eigen::Index>(n));
        const double mean = c.mean();
        const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(n - 1));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw InputError(std::string("constant column: ") + names[j]);
        Z.col(j) = (c.array() - mean) / sd;
    }
    SdComposites out;
    out.correlation = (Z.transpose() * Z) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(out.correlation);
    if (es.info() != Eigen::Success) throw ComputeError("eigendecomposition of the correlation matrix failed");
    for (int k = 0; k < 3; ++k) {
        out.eigenvalues(k) = es.eigenvalues()(2 - k);
        out.loadings.col(k) = es.eigenvectors().col(2 - k);
    }
    if (out.loadings(1, 0) < 0.0) out.loadings.col(0) *= -1.0;
    if (out.loadings(2, 1) < 0.0) out.loadings.col(1) *= -1.0;
    if (out.loadings(0, 2) < 0.0) out.loadings.col(2) *= -1.0;
    out.disadvantage = Z * out.loadings.col(0);
    out.instability = Z * out.loadings.col(1);
    return out;
}

std::vector<double> ambient_population(const std::vector<Stay>& stays, const std::vector<SpatialUnit>& units,
                                       int days, double min_duration_hours) {
    if (days <= 0) throw InputError("ambient_population: days must be positive");
    const auto boxes = unit_boxes(units);
    // Distinct (unit, day, person) triples.
    std::set<std::tuple<std::size_t, int, std::string>> seen;
    for (const auto& s : stays) {
        if (s.duration_hours < min_duration_hours) continue;
        const auto u = locate_unit(units, boxes, s.location);
        if (u) seen.emplace(*u, s.day, s.person_id);
    }
    std::vector<double> out(units.size(), 0.0);
    for (const auto& t : seen) out[std::get<0>(t)] += 1.0;
    for (auto& v : out) v /= days;
    return out;
}

std::vector<double> attractiveness(const std::vector<Trip>& trips, const std::vector<SpatialUnit>& units,
                                   const std::vector<Corehood>& corehoods) {
    // Reverse membership: unit -> corehoods containing it.
    std::vector<std::vector<std::size_t>> in_corehoods(units.size());
    for (std::size_t c = 0; c < corehoods.size(); ++c)
        for (std::size_t m : corehoods[c].members) in_corehoods[m].push_back(c);

    std::vector<MultiPolygon> geoms;
    for (const auto& u : units) geoms.push_back(u.geometry);
    const auto boxes = unit_boxes(units);
    std::vector<Point> dest;
    for (const auto& t : trips)
        if (t.type == TripType::NHB) dest.push_back(t.destination);
    const auto hits = kernels::point_hits(Backend::OpenMP, dest, geoms, boxes, 0.0);

    std::vector<double> out(corehoods.size(), 0.0);
    std::vector<std::size_t> touched;
    for (const auto& h : hits) {
        touched.clear();
        for (std::size_t u : h) touched.insert(touched.end(), in_corehoods[u].begin(), in_corehoods[u].end());
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (std::size_t c : touched) out[c] += 1.0;
    }
    return out;
}

const std::vector<std::pair<std::string, FeatureGroup>>& feature_catalogue() {
    static const std::vector<std::pair<std::string, FeatureGroup>> cat = {
        {"residential_population", FeatureGroup::Core},
        {"nightlife_pois", FeatureGroup::Core},
        {"shops_pois", FeatureGroup::Core},
        {"food_pois", FeatureGroup::Core},
        {"ambient_population", FeatureGroup::Core},
        {"disadvantage", FeatureGroup::SD},
        {"instability", FeatureGroup::SD},
        {"ethnic_diversity", FeatureGroup::SD},
        {"land_use_mix", FeatureGroup::BE},
        {"walkability", FeatureGroup::BE},
        {"avg_block_area", FeatureGroup::BE},
        {"building_age_diversity", FeatureGroup::BE},
        {"population_density", FeatureGroup::BE},
        {"attractiveness", FeatureGroup::M},
    };
    return cat;
}

std::optional<std::size_t> RawFeatureTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return j;
    return std::nullopt;
}

RawFeatureTable compute_raw_features(const CityDataset& city, const std::vector<Corehood>& corehoods,
                                     const WalkabilityConfig& cfg, Backend backend) {
    const std::size_t nu = city.units.size();
    const std::size_t nc = corehoods.size();
    if (city.census.size() != nu) throw InputError("census records do not match units");
    const auto boxes = unit_boxes(city.units);

    RawFeatureTable t;
    const auto& cat = feature_catalogue();
    for (const auto& [name, g] : cat) {
        t.names.push_back(name);
        t.groups.push_back(g);
    }
    t.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(cat.size()));
    for (const auto& c : corehoods) t.core_ids.push_back(city.units[c.core].id);
    auto flag = [&](std::size_t row, const char* feature, const char* what) {
        t.flags.push_back(t.core_ids[row] + ":" + feature + ":" + what);
    };

    // Per-unit POI counters.
    std::vector<std::array<double, kPoiCategoryCount>> poi_counts(nu);
    for (auto& a : poi_counts) a.fill(0.0);
    for (const auto& p : city.pois)
        if (auto u = locate_unit(city.units, boxes, p.location))
            poi_counts[*u][static_cast<std::size_t>(p.category)] += 1.0;

    if (city.stays.empty()) t.warnings.push_back("no stays: ambient_population is zero for every core");
    const auto ambient = ambient_population(city.stays, city.units, city.mobility_days);
    const auto attract = attractiveness(city.trips, city.units, corehoods);

    // Parcels assigned to the unit containing their centroid.
    std::vector<LandUseAreas> unit_land(nu, LandUseAreas{0.0, 0.0, 0.0});
    for (const auto& p : city.parcels) {
        if (p.land_use == LandUse::Other) continue;
        if (auto u = locate_unit(city.units, boxes, centroid(p.geometry)))
            unit_land[*u][static_cast<std::size_t>(p.land_use)] += area(p.geometry);
    }

    // Block walkability.
    const auto poi_index = build_poi_index(city.pois, city.street_graph, cfg.snap_max_m);
    std::vector<Point> block_centroids;
    block_centroids.reserve(city.blocks.size());
    for (const auto& b : city.blocks) block_centroids.push_back(centroid(b.geometry));
    const auto block_walk = kernels::walkability(backend, block_centroids, poi_index, city.street_graph, cfg);
    std::size_t unreachable = 0;
    for (const auto& w : block_walk) unreachable += w.flagged ? 1 : 0;
    if (unreachable > 0)
        t.warnings.push_back(std::to_string(unreachable) + " blocks could not be snapped to the street graph");

    // Corehood rates for the SD composites.
    std::vector<double> unemp(nc), pov(nc), mob(nc);
    for (std::size_t r = 0; r < nc; ++r) {
        const auto& ch = corehoods[r];
        const std::size_t core = ch.core;
        const auto& cu = city.units[core];
        auto& row = t.values;
        const auto R = static_cast<Eigen::Index>(r);
        row(R, 0) = cu.residential_population;
        row(R, 1) = poi_counts[core][static_cast<std::size_t>(PoiCategory::Nightlife)];
        row(R, 2) = poi_counts[core][static_cast<std::size_t>(PoiCategory::Shops)];
        row(R, 3) = poi_counts[core][static_cast<std::size_t>(PoiCategory::Food)];
        row(R, 4) = ambient[core];

        double pop = 0.0;
        for (std::size_t m : ch.members) pop += city.units[m].residential_population;
        const bool weighted = pop > 0.0;
        if (!weighted) flag(r, "rates", "no_population");
        std::array<double, 6> pooled{};
        double wsum = 0.0;
        for (std::size_t m : ch.members) {
            const double w = weighted ? city.units[m].residential_population : 1.0;
            const auto& c = city.census[m];
            unemp[r] += w * c.unemployment_rate;
            pov[r] += w * c.poverty_rate;
            mob[r] += w * c.residential_mobility_rate;
            for (int k = 0; k < 6; ++k) pooled[k] += w * c.ethnic_shares[k];
            wsum += w;
        }
        unemp[r] /= wsum;
        pov[r] /= wsum;
        mob[r] /= wsum;
        try {
            row(R, 7) = hhi_diversity(pooled);
        } catch (const InputError&) {
            row(R, 7) = 0.0;
            flag(r, "ethnic_diversity", "no_population");
        }

        LandUseAreas land{0.0, 0.0, 0.0};
        std::vector<double> walks, block_areas;
        std::vector<int> years;
        double dwellings = 0.0, unit_area = 0.0;
        for (std::size_t m : ch.members) {
            for (int k = 0; k < 3; ++k) land[k] += unit_land[m][k];
            for (std::size_t b : city.units[m].blocks) {
                walks.push_back(block_walk[b].value);
                block_areas.push_back(city.blocks[b].area_m2);
                years.insert(years.end(), city.blocks[b].building_years.begin(), city.blocks[b].building_years.end());
            }
            dwellings += city.units[m].dwelling_units;
            unit_area += area(city.units[m].geometry);
        }
        const auto lum = land_use_mix(land);
        const auto walk = corehood_walkability(walks);
        const auto bla = avg_block_area(block_areas);
        const auto age = building_age_diversity(years);
        const auto dens = population_density(dwellings, unit_area);
        row(R, 8) = lum.value;
        row(R, 9) = walk.value;
        row(R, 10) = bla.value;
        row(R, 11) = age.value;
        row(R, 12) = dens.value;
        if (lum.flagged) flag(r, "land_use_mix", "no_landuse");
        if (walk.flagged) flag(r, "walkability", "no_blocks");
        if (bla.flagged) flag(r, "avg_block_area", "no_blocks");
        if (age.flagged) flag(r, "building_age_diversity", "no_buildings");
        if (dens.flagged) flag(r, "population_density", "no_area");
        row(R, 13) = attract[r];
    }

    if (nc >= 3) {
        try {
            const auto sd = sd_composites(unemp, pov, mob);
            t.values.col(5) = sd.disadvantage;
            t.values.col(6) = sd.instability;
        } catch (const InputError& e) {
            t.warnings.push_back(std::string("SD composites unavailable: ") + e.what());
        }
    } else {
        t.warnings.push_back("SD composites need at least 3 cores");
    }
    return t;
}

FeatureSelection FeatureSelection::parse(const std::string& text) {
    FeatureSelection s;
    s.label = trim(text);
    auto list_after_colon = [&](const std::string& prefix) {
        for (const auto& n : split(s.label.substr(prefix.size()), ','))
            if (!trim(n).empty()) s.names.push_back(trim(n));
        if (s.names.empty()) throw InputError("empty feature list in selection '" + s.label + "'");
    };
    if (s.label.rfind("Minimal:", 0) == 0) {
        list_after_colon("Minimal:");
        return s;
    }
    if (s.label.rfind("Features:", 0) == 0) {
        list_after_colon("Features:");
        return s;
    }
    s.groups.push_back(FeatureGroup::Core);
    if (s.label == "Full" || s.label == "All") {
        s.groups = {FeatureGroup::Core, FeatureGroup::SD, FeatureGroup::BE, FeatureGroup::M};
        return s;
    }
    for (const auto& tok : split(s.label, '+')) {
        const std::string g = trim(tok);
        if (g == "Core") continue;
        if (g == "SD") s.groups.push_back(FeatureGroup::SD);
        else if (g == "BE") s.groups.push_back(FeatureGroup::BE);
        else if (g == "M") s.groups.push_back(FeatureGroup::M);
        else throw InputError("unknown feature group '" + g + "' in selection '" + s.label + "'");
    }
    return s;
}

bool FeatureSelection::includes(const std::string& feature, FeatureGroup g) const {
    if (!names.empty()) return std::find(names.begin(), names.end(), feature) != names.end();
    return std::find(groups.begin(), groups.end(), g) != groups.end();
}

FeatureMatrix select_features(const RawFeatureTable& raw, const FeatureSelection& selection) {
    std::vector<std::size_t> cols;
    if (!selection.names.empty()) {
        std::vector<std::string> missing;
        for (const auto& n : selection.names) {
            if (auto c = raw.column(n)) cols.push_back(*c);
            else missing.push_back(n);
        }
        if (!missing.empty()) {
            std::string msg = "unknown features:";
            for (const auto& m : missing) msg += " " + m;
            throw InputError(msg);
        }
    } else {
        for (std::size_t j = 0; j < raw.names.size(); ++j)
            if (selection.includes(raw.names[j], raw.groups[j])) cols.push_back(j);
    }

    FeatureMatrix fm;
    fm.core_ids = raw.core_ids;
    fm.warnings = raw.warnings;
    const auto n = raw.values.rows();
    if (n < 2) throw InputError("need at least 2 cores to standardize features");
    std::vector<std::size_t> kept;
    std::vector<double> means, sds;
    for (std::size_t j : cols) {
        const auto c = raw.values.col(static_cast<Eigen::Index>(j));
        const double mean = c.mean();
        const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(n - 1));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            fm.warnings.push_back("constant column dropped: " + raw.names[j]);
            continue;
        }
        kept.push_back(j);
        means.push_back(mean);
        sds.push_back(sd);
    }
    fm.X.resize(n, static_cast<Eigen::Index>(kept.size()));
    fm.means.resize(static_cast<Eigen::Index>(kept.size()));
    fm.sds.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto K = static_cast<Eigen::Index>(k);
        fm.X.col(K) = (raw.values.col(static_cast<Eigen::Index>(kept[k])).array() - means[k]) / sds[k];
        fm.means(K) = means[k];
        fm.sds(K) = sds[k];
        fm.names.push_back(raw.names[kept[k]]);
        fm.groups.push_back(raw.groups[kept[k]]);
    }
    if (!fm.X.allFinite()) throw ComputeError("non-finite standardized feature values");
    return fm;
}

Eigen::MatrixXd standardize_with(const RawFeatureTable& raw, const std::vector<std::string>& names,
                                 const Eigen::VectorXd& means, const Eigen::VectorXd& sds) {
    if (means.size() != static_cast<Eigen::Index>(names.size()) || sds.size() != means.size())
        throw InputError("standardization statistics do not match feature names");
    std::vector<std::size_t> cols;
    std::string missing;
    for (const auto& n : names) {
        if (auto c = raw.column(n)) cols.push_back(*c);
        else missing += " " + n;
    }
    if (!missing.empty()) throw InputError("missing features:" + missing);
    Eigen::MatrixXd X(raw.values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto K = static_cast<Eigen::Index>(k);
        if (!(sds(K) > 0.0)) throw InputError("non-positive standard deviation for " + names[k]);
        X.col(K) = (raw.values.col(static_cast<Eigen::Index>(cols[k])).array() - means(K)) / sds(K);
    }
    return X;
}

FeatureMatrix assemble_features(const CityDataset& city, const std::vector<Corehood>& corehoods,
                                const FeatureSelection& selection, const WalkabilityConfig& cfg) {
    return select_features(compute_raw_features(city, corehoods, cfg), selection);
}

}  // namespace crimebsf
