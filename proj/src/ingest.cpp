#include "crimebsf/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crimebsf/csv.hpp"
#include "crimebsf/errors.hpp"

namespace crimebsf {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t ValidationReport::count(Kind k) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [k](const Entry& e) { return e.kind == k; }));
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os << "dropped: " << count(Kind::Dropped) << "\nrepaired: " << count(Kind::Repaired)
       << "\nwarnings: " << count(Kind::Warning) << "\n";
    for (const auto& e : entries) {
        const char* tag = e.kind == Kind::Dropped ? "DROPPED" : e.kind == Kind::Repaired ? "REPAIRED" : "WARNING";
        os << tag << "\t" << e.source << "\t" << e.message << "\n";
    }
    return os.str();
}

std::chrono::sys_days parse_date(const std::string& raw) {
    const std::string s = trim(raw);
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(s.substr(0, 10));
    in >> y >> dash1 >> m >> dash2 >> d;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (s.size() < 10 || !in || dash1 != '-' || dash2 != '-' || !ymd.ok())
        throw InputError("invalid ISO-8601 date '" + s + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

namespace {

json load_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(p.string() + ": malformed JSON: " + e.what());
    }
}

bool is_geographic_crs(const std::string& name) {
    static const char* geographic[] = {"4326", "CRS84", "crs84", "4269", "4258", "4674"};
    for (const char* g : geographic)
        if (name.find(g) != std::string::npos) return true;
    return false;
}

std::string reprojection_hint(const std::string& what) {
    return what + " is not a projected metric CRS; reproject the inputs to a metric CRS (e.g. a UTM zone) first";
}

Ring parse_ring(const json& coords, const std::string& where) {
    if (!coords.is_array()) throw InputError(where + ": ring is not an array");
    Ring r;
    for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
            throw InputError(where + ": malformed coordinate");
        r.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (r.size() >= 2 && r.front() == r.back()) r.pop_back();
    return r;
}

Polygon parse_polygon(const json& rings, const std::string& where) {
    if (!rings.is_array() || rings.empty()) throw InputError(where + ": polygon without rings");
    Polygon p;
    p.outer = parse_ring(rings[0], where);
    for (std::size_t i = 1; i < rings.size(); ++i) p.holes.push_back(parse_ring(rings[i], where));
    return p;
}

MultiPolygon parse_geometry(const json& g, const std::string& where) {
    if (!g.is_object() || !g.contains("type") || !g.contains("coordinates"))
        throw InputError(where + ": missing geometry");
    const std::string type = g["type"].get<std::string>();
    MultiPolygon mp;
    if (type == "Polygon") {
        mp.parts.push_back(parse_polygon(g["coordinates"], where));
    } else if (type == "MultiPolygon") {
        for (const auto& poly : g["coordinates"]) mp.parts.push_back(parse_polygon(poly, where));
    } else {
        throw InputError(where + ": unsupported geometry type '" + type + "'");
    }
    return mp;
}

std::string property_string(const json& props, const std::string& key, const std::string& where) {
    if (!props.contains(key) || props[key].is_null()) throw InputError(where + ": missing property '" + key + "'");
    const auto& v = props[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_double(v.get<double>());
    throw InputError(where + ": property '" + key + "' must be a string or number");
}

double property_number(const json& props, const std::string& key, const std::string& where) {
    if (!props.contains(key) || !props[key].is_number())
        throw InputError(where + ": property '" + key + "' must be a number");
    const double v = props[key].get<double>();
    if (!std::isfinite(v)) throw InputError(where + ": property '" + key + "' is not finite");
    return v;
}

struct FeatureRecord {
    MultiPolygon geometry;
    json properties;
    std::string where;
};

std::vector<FeatureRecord> load_features(const fs::path& path) {
    const json doc = load_json(path);
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection")
        throw InputError(path.string() + ": expected a GeoJSON FeatureCollection");
    if (doc.contains("crs")) {
        const std::string name = doc["crs"].dump();
        if (is_geographic_crs(name)) throw InputError(path.string() + ": " + reprojection_hint("declared CRS"));
    }
    std::vector<FeatureRecord> out;
    std::size_t i = 0;
    for (const auto& f : doc.at("features")) {
        const std::string where = path.string() + ": feature " + std::to_string(i++);
        FeatureRecord r;
        r.geometry = parse_geometry(f.value("geometry", json{}), where);
        r.properties = f.value("properties", json::object());
        r.where = where;
        out.push_back(std::move(r));
    }
    return out;
}

std::string loc(const CsvTable& t, std::size_t row) { return t.origin() + ":" + std::to_string(t.line(row)); }

void check_rate(double v, const CsvTable& t, std::size_t row, const std::string& field) {
    if (v < 0.0 || v > 1.0)
        throw InputError(loc(t, row) + ": field '" + field + "' must lie in [0,1], got " + format_double(v));
}

}  // namespace

IngestResult ingest_city(const fs::path& config_path) { return ingest_city(KeyValueConfig::load(config_path)); }

IngestResult ingest_city(const KeyValueConfig& cfg) {
    IngestResult res;
    CityDataset& city = res.city;
    ValidationReport& report = res.report;
    city.name = cfg.get_or("name", "city");

    if (auto crs = cfg.get("crs"); crs && is_geographic_crs(*crs))
        throw InputError(cfg.origin() + ": " + reprojection_hint("crs '" + *crs + "'"));

    res.window.start = parse_date(cfg.require("crime_window_start"));
    res.window.end = parse_date(cfg.require("crime_window_end"));
    if (!(res.window.start < res.window.end)) throw InputError(cfg.origin() + ": empty crime window");

    // Units
    const auto unit_path = cfg.path("units");
    std::map<std::string, std::size_t> unit_ids;
    for (auto& f : load_features(unit_path)) {
        SpatialUnit u;
        u.id = property_string(f.properties, "id", f.where);
        if (auto why = validate(f.geometry)) throw InputError(f.where + " (unit '" + u.id + "'): invalid geometry: " + *why);
        u.geometry = std::move(f.geometry);
        u.centroid = centroid(u.geometry);
        u.residential_population = property_number(f.properties, "residential_population", f.where);
        u.dwelling_units = property_number(f.properties, "dwelling_units", f.where);
        if (u.residential_population < 0.0 || u.dwelling_units < 0.0)
            throw InputError(f.where + ": negative population or dwelling count");
        if (!unit_ids.emplace(u.id, city.units.size()).second)
            throw InputError(f.where + ": duplicate unit id '" + u.id + "'");
        city.units.push_back(std::move(u));
    }
    if (city.units.empty()) throw InputError(unit_path.string() + ": no units");
    {
        BBox all = bbox(city.units.front().geometry);
        for (const auto& u : city.units) {
            const BBox b = bbox(u.geometry);
            all = {std::min(all.min_x, b.min_x), std::min(all.min_y, b.min_y), std::max(all.max_x, b.max_x),
                   std::max(all.max_y, b.max_y)};
        }
        const bool lonlat_range = all.min_x >= -180 && all.max_x <= 180 && all.min_y >= -90 && all.max_y <= 90;
        if (lonlat_range && (all.max_x - all.min_x) < 2.0 && (all.max_y - all.min_y) < 2.0)
            throw InputError(unit_path.string() + ": " + reprojection_hint("coordinates look like degrees; the data"));
    }

    // Blocks
    if (auto p = cfg.optional_path("blocks")) {
        std::set<std::string> seen;
        for (auto& f : load_features(*p)) {
            Block b;
            b.id = property_string(f.properties, "id", f.where);
            b.unit_id = property_string(f.properties, "unit_id", f.where);
            auto it = unit_ids.find(b.unit_id);
            if (it == unit_ids.end())
                throw InputError(f.where + ": field 'unit_id' references unknown unit '" + b.unit_id + "'");
            if (!seen.insert(b.id).second) throw InputError(f.where + ": duplicate block id '" + b.id + "'");
            if (auto why = validate(f.geometry)) throw InputError(f.where + " (block '" + b.id + "'): invalid geometry: " + *why);
            b.geometry = std::move(f.geometry);
            b.area_m2 = area(b.geometry);
            if (f.properties.contains("area_m2") && f.properties["area_m2"].is_number()) {
                const double declared = f.properties["area_m2"].get<double>();
                if (std::abs(declared - b.area_m2) > 1e-3 * b.area_m2)
                    report.repaired(f.where, "block '" + b.id + "' area_m2 replaced by geometry area");
            }
            if (f.properties.contains("building_years")) {
                for (const auto& y : f.properties["building_years"]) {
                    if (!y.is_number_integer()) throw InputError(f.where + ": field 'building_years' must hold integers");
                    const int year = y.get<int>();
                    if (year <= 1500 || year > 2100) {
                        report.dropped(f.where, "implausible construction year " + std::to_string(year));
                        continue;
                    }
                    b.building_years.push_back(year);
                }
            }
            city.units[it->second].blocks.push_back(city.blocks.size());
            city.blocks.push_back(std::move(b));
        }
    } else {
        report.warn(cfg.origin(), "no blocks file; block-based features will be flagged");
    }

    // Parcels
    if (auto p = cfg.optional_path("parcels")) {
        for (auto& f : load_features(*p)) {
            const std::string lu = property_string(f.properties, "land_use", f.where);
            auto use = parse_land_use(lu);
            if (!use) throw InputError(f.where + ": field 'land_use' has unknown value '" + lu + "'");
            if (auto why = validate(f.geometry)) {
                report.dropped(f.where, "invalid parcel geometry: " + *why);
                continue;
            }
            city.parcels.push_back({std::move(f.geometry), *use});
        }
    }

    // Census
    {
        const auto t = CsvTable::read(cfg.path("census"));
        const auto c_id = t.require_column("unit_id");
        const auto c_un = t.require_column("unemployment_rate");
        const auto c_pov = t.require_column("poverty_rate");
        const auto c_mob = t.require_column("residential_mobility_rate");
        std::array<std::size_t, 6> c_share{};
        for (int k = 0; k < 6; ++k) c_share[k] = t.require_column("share_" + std::to_string(k + 1));
        city.census.assign(city.units.size(), CensusRecord{});
        std::vector<bool> have(city.units.size(), false);
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::string id = trim(t.cell(r, c_id));
            auto it = unit_ids.find(id);
            if (it == unit_ids.end()) throw InputError(loc(t, r) + ": field 'unit_id' references unknown unit '" + id + "'");
            if (have[it->second]) throw InputError(loc(t, r) + ": duplicate census row for unit '" + id + "'");
            CensusRecord rec;
            rec.unemployment_rate = t.number(r, c_un);
            rec.poverty_rate = t.number(r, c_pov);
            rec.residential_mobility_rate = t.number(r, c_mob);
            check_rate(rec.unemployment_rate, t, r, "unemployment_rate");
            check_rate(rec.poverty_rate, t, r, "poverty_rate");
            check_rate(rec.residential_mobility_rate, t, r, "residential_mobility_rate");
            double sum = 0.0;
            for (int k = 0; k < 6; ++k) {
                rec.ethnic_shares[k] = t.number(r, c_share[k]);
                check_rate(rec.ethnic_shares[k], t, r, "share_" + std::to_string(k + 1));
                sum += rec.ethnic_shares[k];
            }
            if (sum == 0.0) {
                report.warn(loc(t, r), "unit '" + id + "' has all-zero ethnic shares");
            } else if (std::abs(sum - 1.0) > 1e-6) {
                for (auto& s : rec.ethnic_shares) s /= sum;
                report.repaired(loc(t, r), "ethnic shares of unit '" + id + "' summed to " + format_double(sum) +
                                               "; renormalized");
            }
            city.census[it->second] = rec;
            have[it->second] = true;
        }
        for (std::size_t i = 0; i < have.size(); ++i)
            if (!have[i]) throw InputError(t.origin() + ": no census row for unit '" + city.units[i].id + "'");
    }

    // Crimes
    {
        const auto t = CsvTable::read(cfg.path("crimes"));
        const auto c_id = t.require_column("id");
        const auto c_x = t.require_column("x");
        const auto c_y = t.require_column("y");
        const auto c_cat = t.require_column("category");
        const auto c_date = t.require_column("date");
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::string id = trim(t.cell(r, c_id));
            const auto x = t.optional_number(r, c_x);
            const auto y = t.optional_number(r, c_y);
            if (!x || !y) {
                report.dropped(loc(t, r), "crime '" + id + "' lacks coordinates");
                continue;
            }
            const auto cat = parse_crime_category(trim(t.cell(r, c_cat)));
            if (!cat) {
                report.dropped(loc(t, r), "crime '" + id + "' category '" + trim(t.cell(r, c_cat)) + "' is not UCR Part 1");
                continue;
            }
            CrimeEvent e;
            e.id = id;
            e.location = {*x, *y};
            e.category = *cat;
            try {
                e.date = parse_date(t.cell(r, c_date));
            } catch (const InputError& err) {
                throw InputError(loc(t, r) + ": field 'date': " + err.what());
            }
            city.crimes.push_back(std::move(e));
        }
    }

    // POIs
    if (auto p = cfg.optional_path("pois")) {
        std::map<std::string, PoiCategory> mapping;
        if (auto mp = cfg.optional_path("poi_categories")) {
            const auto m = CsvTable::read(*mp);
            const auto c_raw = m.require_column("raw_category");
            const auto c_cat = m.require_column("category");
            for (std::size_t r = 0; r < m.rows(); ++r) {
                auto cat = parse_poi_category(trim(m.cell(r, c_cat)));
                if (!cat) throw InputError(loc(m, r) + ": field 'category' has unknown value '" + m.cell(r, c_cat) + "'");
                mapping[trim(m.cell(r, c_raw))] = *cat;
            }
        }
        const auto t = CsvTable::read(*p);
        const auto c_x = t.require_column("x");
        const auto c_y = t.require_column("y");
        const auto c_cat = t.require_column("category");
        std::map<std::string, std::size_t> unmapped;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::string raw = trim(t.cell(r, c_cat));
            std::optional<PoiCategory> cat;
            if (auto it = mapping.find(raw); it != mapping.end()) cat = it->second;
            else cat = parse_poi_category(raw);
            if (!cat) {
                ++unmapped[raw];
                continue;
            }
            const auto x = t.optional_number(r, c_x);
            const auto y = t.optional_number(r, c_y);
            if (!x || !y) {
                report.dropped(loc(t, r), "POI lacks coordinates");
                continue;
            }
            city.pois.push_back({{*x, *y}, *cat});
        }
        for (const auto& [raw, n] : unmapped)
            report.dropped(t.origin(), std::to_string(n) + " POIs with unmapped category '" + raw + "'");
    }

    // Street graph
    if (auto np = cfg.optional_path("street_nodes")) {
        const auto nodes = CsvTable::read(*np);
        const auto c_id = nodes.require_column("node_id");
        const auto c_x = nodes.require_column("x");
        const auto c_y = nodes.require_column("y");
        for (std::size_t r = 0; r < nodes.rows(); ++r) {
            try {
                city.street_graph.add_node(trim(nodes.cell(r, c_id)), {nodes.number(r, c_x), nodes.number(r, c_y)});
            } catch (const InputError& e) {
                throw InputError(loc(nodes, r) + ": " + e.what());
            }
        }
        const auto edges = CsvTable::read(cfg.path("street_edges"));
        const auto c_a = edges.require_column("node_id_a");
        const auto c_b = edges.require_column("node_id_b");
        const auto c_len = edges.require_column("length_m");
        for (std::size_t r = 0; r < edges.rows(); ++r) {
            auto a = city.street_graph.find(trim(edges.cell(r, c_a)));
            auto b = city.street_graph.find(trim(edges.cell(r, c_b)));
            if (!a || !b) throw InputError(loc(edges, r) + ": edge references unknown node");
            const double len = edges.number(r, c_len);
            if (len < 0.0) throw InputError(loc(edges, r) + ": field 'length_m' is negative");
            city.street_graph.add_edge(*a, *b, len);
        }
        if (city.street_graph.node_count() > 0 && city.street_graph.largest_component_fraction() < 0.95)
            throw InputError(edges.origin() + ": largest connected street component covers less than 95% of nodes");
    } else {
        report.warn(cfg.origin(), "no street graph; walkability will be flagged for every block");
    }

    // Mobility
    std::set<int> days;
    if (auto p = cfg.optional_path("stays")) {
        const auto t = CsvTable::read(*p);
        const auto c_p = t.require_column("person_id");
        const auto c_d = t.require_column("day");
        const auto c_x = t.require_column("x");
        const auto c_y = t.require_column("y");
        const auto c_h = t.require_column("duration_hours");
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Stay s;
            s.person_id = trim(t.cell(r, c_p));
            s.day = static_cast<int>(t.integer(r, c_d));
            s.location = {t.number(r, c_x), t.number(r, c_y)};
            s.duration_hours = t.number(r, c_h);
            if (s.duration_hours < 0.0) {
                report.dropped(loc(t, r), "negative stay duration");
                continue;
            }
            days.insert(s.day);
            city.stays.push_back(std::move(s));
        }
    }
    if (auto p = cfg.optional_path("trips")) {
        const auto t = CsvTable::read(*p);
        const auto c_p = t.require_column("person_id");
        const auto c_d = t.require_column("day");
        const auto c_ox = t.require_column("origin_x");
        const auto c_oy = t.require_column("origin_y");
        const auto c_dx = t.require_column("dest_x");
        const auto c_dy = t.require_column("dest_y");
        const auto c_t = t.require_column("type");
        for (std::size_t r = 0; r < t.rows(); ++r) {
            auto type = parse_trip_type(trim(t.cell(r, c_t)));
            if (!type) {
                report.dropped(loc(t, r), "unknown trip type '" + t.cell(r, c_t) + "'");
                continue;
            }
            Trip tr;
            tr.person_id = trim(t.cell(r, c_p));
            tr.day = static_cast<int>(t.integer(r, c_d));
            tr.origin = {t.number(r, c_ox), t.number(r, c_oy)};
            tr.destination = {t.number(r, c_dx), t.number(r, c_dy)};
            tr.type = *type;
            days.insert(tr.day);
            city.trips.push_back(std::move(tr));
        }
    }
    city.mobility_days = static_cast<int>(cfg.get_int("mobility_days", std::max<long long>(1, static_cast<long long>(days.size()))));
    if (city.mobility_days <= 0) throw InputError(cfg.origin() + ": mobility_days must be positive");
    if (city.stays.empty()) report.warn(cfg.origin(), "no stays; ambient population is zero for every core");
    return res;
}

namespace {

json ring_json(const Ring& r) {
    json a = json::array();
    for (const auto& p : r) a.push_back({p.x, p.y});
    if (!r.empty()) a.push_back({r.front().x, r.front().y});
    return a;
}

json geometry_json(const MultiPolygon& mp) {
    auto poly = [](const Polygon& p) {
        json rings = json::array();
        rings.push_back(ring_json(p.outer));
        for (const auto& h : p.holes) rings.push_back(ring_json(h));
        return rings;
    };
    if (mp.parts.size() == 1) return {{"type", "Polygon"}, {"coordinates", poly(mp.parts[0])}};
    json parts = json::array();
    for (const auto& p : mp.parts) parts.push_back(poly(p));
    return {{"type", "MultiPolygon"}, {"coordinates", parts}};
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ComputeError("cannot write '" + p.string() + "'");
    out << text;
}

json collection(const std::string& crs) {
    return {{"type", "FeatureCollection"}, {"crs", {{"type", "name"}, {"properties", {{"name", crs}}}}}, {"features", json::array()}};
}

}  // namespace

fs::path write_city(const CityDataset& city, const DateWindow& window, const fs::path& dir, const std::string& crs) {
    fs::create_directories(dir);
    const auto d = [](double v) { return format_double(v); };

    json units = collection(crs);
    for (const auto& u : city.units)
        units["features"].push_back({{"type", "Feature"},
                                     {"properties", {{"id", u.id}, {"residential_population", u.residential_population}, {"dwelling_units", u.dwelling_units}}},
                                     {"geometry", geometry_json(u.geometry)}});
    write_text(dir / "units.geojson", units.dump());

    json blocks = collection(crs);
    for (const auto& b : city.blocks)
        blocks["features"].push_back({{"type", "Feature"},
                                      {"properties", {{"id", b.id}, {"unit_id", b.unit_id}, {"area_m2", b.area_m2}, {"building_years", b.building_years}}},
                                      {"geometry", geometry_json(b.geometry)}});
    write_text(dir / "blocks.geojson", blocks.dump());

    json parcels = collection(crs);
    for (const auto& p : city.parcels)
        parcels["features"].push_back({{"type", "Feature"}, {"properties", {{"land_use", to_string(p.land_use)}}}, {"geometry", geometry_json(p.geometry)}});
    write_text(dir / "parcels.geojson", parcels.dump());

    {
        std::ostringstream os;
        os << "unit_id,unemployment_rate,poverty_rate,residential_mobility_rate,share_1,share_2,share_3,share_4,share_5,share_6\n";
        for (std::size_t i = 0; i < city.units.size(); ++i) {
            const auto& c = city.census[i];
            os << csv_escape(city.units[i].id) << ',' << d(c.unemployment_rate) << ',' << d(c.poverty_rate) << ','
               << d(c.residential_mobility_rate);
            for (double s : c.ethnic_shares) os << ',' << d(s);
            os << '\n';
        }
        write_text(dir / "census.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "id,x,y,category,date\n";
        for (const auto& c : city.crimes)
            os << csv_escape(c.id) << ',' << d(c.location.x) << ',' << d(c.location.y) << ',' << to_string(c.category)
               << ',' << format_date(c.date) << '\n';
        write_text(dir / "crimes.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "id,x,y,category\n";
        for (std::size_t i = 0; i < city.pois.size(); ++i)
            os << "poi" << i << ',' << d(city.pois[i].location.x) << ',' << d(city.pois[i].location.y) << ','
               << to_string(city.pois[i].category) << '\n';
        write_text(dir / "pois.csv", os.str());
        std::ostringstream m;
        m << "raw_category,category\n";
        for (std::size_t k = 0; k < kPoiCategoryCount; ++k) {
            const auto name = to_string(static_cast<PoiCategory>(k));
            m << name << ',' << name << '\n';
        }
        write_text(dir / "poi_categories.csv", m.str());
    }
    {
        std::ostringstream nodes, edges;
        nodes << "node_id,x,y\n";
        edges << "node_id_a,node_id_b,length_m\n";
        const auto& g = city.street_graph;
        for (std::size_t i = 0; i < g.node_count(); ++i)
            nodes << csv_escape(g.node_id(i)) << ',' << d(g.node(i).x) << ',' << d(g.node(i).y) << '\n';
        for (std::size_t i = 0; i < g.node_count(); ++i)
            for (const auto& e : g.neighbors(i))
                if (e.to >= i) edges << csv_escape(g.node_id(i)) << ',' << csv_escape(g.node_id(e.to)) << ',' << d(e.length_m) << '\n';
        write_text(dir / "street_nodes.csv", nodes.str());
        write_text(dir / "street_edges.csv", edges.str());
    }
    {
        std::ostringstream os;
        os << "person_id,day,x,y,duration_hours\n";
        for (const auto& s : city.stays)
            os << csv_escape(s.person_id) << ',' << s.day << ',' << d(s.location.x) << ',' << d(s.location.y) << ','
               << d(s.duration_hours) << '\n';
        write_text(dir / "stays.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "person_id,day,origin_x,origin_y,dest_x,dest_y,type\n";
        for (const auto& t : city.trips)
            os << csv_escape(t.person_id) << ',' << t.day << ',' << d(t.origin.x) << ',' << d(t.origin.y) << ','
               << d(t.destination.x) << ',' << d(t.destination.y) << ',' << to_string(t.type) << '\n';
        write_text(dir / "trips.csv", os.str());
    }
    std::ostringstream cfg;
    cfg << "# city ingest configuration\n"
        << "name = " << city.name << "\n"
        << "crs = " << crs << "\n"
        << "units = units.geojson\nblocks = blocks.geojson\nparcels = parcels.geojson\n"
        << "census = census.csv\ncrimes = crimes.csv\npois = pois.csv\npoi_categories = poi_categories.csv\n"
        << "street_nodes = street_nodes.csv\nstreet_edges = street_edges.csv\n"
        << "stays = stays.csv\ntrips = trips.csv\n"
        << "crime_window_start = " << format_date(window.start) << "\n"
        << "crime_window_end = " << format_date(window.end) << "\n"
        << "mobility_days = " << city.mobility_days << "\n";
    const fs::path cfg_path = dir / "ingest.cfg";
    write_text(cfg_path, cfg.str());
    return cfg_path;
}

}  // namespace crimebsf
