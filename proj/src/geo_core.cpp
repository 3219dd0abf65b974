#include "crimebsf/geo_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crimebsf/errors.hpp"
#include "crimebsf/kernels.hpp"

namespace crimebsf {

std::optional<std::size_t> CityDataset::unit_index(const std::string& id) const {
    for (std::size_t i = 0; i < units.size(); ++i)
        if (units[i].id == id) return i;
    return std::nullopt;
}

std::vector<BBox> unit_boxes(const std::vector<SpatialUnit>& units) {
    std::vector<BBox> boxes;
    boxes.reserve(units.size());
    for (const auto& u : units) boxes.push_back(bbox(u.geometry));
    return boxes;
}

std::vector<Corehood> build_corehoods(const std::vector<SpatialUnit>& units, double radius_m) {
    if (units.empty()) throw InputError("no units");
    if (!(radius_m > 0.0)) throw InputError("corehood radius must be positive");
    std::vector<MultiPolygon> geoms;
    geoms.reserve(units.size());
    for (const auto& u : units) {
        if (auto why = validate(u.geometry)) throw InputError("invalid geometry for unit '" + u.id + "': " + *why);
        geoms.push_back(u.geometry);
    }
    const auto boxes = unit_boxes(units);
    auto members = kernels::within_distance(Backend::OpenMP, geoms, boxes, radius_m);
    std::vector<Corehood> out(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        out[i].core = i;
        out[i].members = std::move(members[i]);
        out[i].radius_m = radius_m;
    }
    return out;
}

std::vector<std::size_t> boundary_cores(const std::vector<Corehood>& corehoods, std::size_t min_members) {
    std::vector<std::size_t> out;
    for (const auto& c : corehoods)
        if (c.members.size() < min_members) out.push_back(c.core);
    return out;
}

std::vector<double> CrimeAssignment::total() const {
    std::vector<double> t(violent.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = violent[i] + property[i];
    return t;
}

CrimeAssignment assign_crimes(const std::vector<CrimeEvent>& crimes, const std::vector<SpatialUnit>& units,
                              double buffer_m, std::optional<DateWindow> window) {
    if (!(buffer_m >= 0.0)) throw InputError("crime buffer must be non-negative");
    CrimeAssignment out;
    out.violent.assign(units.size(), 0.0);
    out.property.assign(units.size(), 0.0);

    std::vector<const CrimeEvent*> kept;
    std::vector<Point> points;
    for (const auto& c : crimes) {
        if (window && !window->contains(c.date)) {
            ++out.outside_window;
            continue;
        }
        kept.push_back(&c);
        points.push_back(c.location);
    }
    out.considered = kept.size();

    std::vector<MultiPolygon> geoms;
    geoms.reserve(units.size());
    for (const auto& u : units) geoms.push_back(u.geometry);
    const auto boxes = unit_boxes(units);
    const auto hits = kernels::point_hits(Backend::OpenMP, points, geoms, boxes, buffer_m);

    for (std::size_t c = 0; c < kept.size(); ++c) {
        const auto& h = hits[c];
        if (h.empty()) {
            out.unassigned += 1.0;
            out.unassigned_ids.push_back(kept[c]->id);
            continue;
        }
        const double w = 1.0 / static_cast<double>(h.size());
        auto& target = kept[c]->category == CrimeCategory::Violent ? out.violent : out.property;
        for (std::size_t u : h) target[u] += w;
    }
    return out;
}

std::optional<std::size_t> locate_unit(const std::vector<SpatialUnit>& units, const std::vector<BBox>& boxes,
                                       const Point& p) {
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (!boxes[i].contains(p)) continue;
        if (contains(units[i].geometry, p)) return i;
    }
    return std::nullopt;
}

std::vector<int> round_counts(const std::vector<double>& totals) {
    std::vector<int> out(totals.size());
    for (std::size_t i = 0; i < totals.size(); ++i) {
        const double fl = std::floor(totals[i]);
        // Sums of 1/k weights carry rounding noise, so near-halves count as halves.
        if (std::abs(totals[i] - fl - 0.5) < 1e-9) {
            const auto lo = static_cast<int>(fl);
            out[i] = (lo % 2 == 0) ? lo : lo + 1;
        } else {
            out[i] = static_cast<int>(std::lround(totals[i]));
        }
    }
    return out;
}

std::string to_string(CrimeCategory c) { return c == CrimeCategory::Violent ? "violent" : "property"; }

std::string to_string(PoiCategory c) {
    static const char* names[] = {"grocery", "food",  "shops", "schools", "entertainment",
                                  "parks",   "coffee", "banks", "books",   "nightlife"};
    return names[static_cast<std::size_t>(c)];
}

std::string to_string(TripType t) {
    switch (t) {
        case TripType::HBW: return "HBW";
        case TripType::HBO: return "HBO";
        case TripType::NHB: return "NHB";
    }
    return "?";
}

std::string to_string(LandUse u) {
    switch (u) {
        case LandUse::Residential: return "residential";
        case LandUse::CommercialInstitutional: return "commercial_institutional";
        case LandUse::ParkRecreational: return "park_recreational";
        case LandUse::Other: return "other";
    }
    return "?";
}

namespace {
std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}
}  // namespace

std::optional<CrimeCategory> parse_crime_category(const std::string& raw) {
    static const std::map<std::string, CrimeCategory> table = {
        {"violent", CrimeCategory::Violent},
        {"property", CrimeCategory::Property},
        {"murder", CrimeCategory::Violent},
        {"homicide", CrimeCategory::Violent},
        {"rape", CrimeCategory::Violent},
        {"robbery", CrimeCategory::Violent},
        {"aggravated_assault", CrimeCategory::Violent},
        {"burglary", CrimeCategory::Property},
        {"larceny", CrimeCategory::Property},
        {"larceny_theft", CrimeCategory::Property},
        {"motor_vehicle_theft", CrimeCategory::Property},
        {"arson", CrimeCategory::Property},
    };
    auto it = table.find(lower(raw));
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::optional<PoiCategory> parse_poi_category(const std::string& raw) {
    const std::string s = lower(raw);
    for (std::size_t i = 0; i < kPoiCategoryCount; ++i) {
        const auto c = static_cast<PoiCategory>(i);
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<TripType> parse_trip_type(const std::string& raw) {
    if (raw == "HBW" || raw == "hbw") return TripType::HBW;
    if (raw == "HBO" || raw == "hbo") return TripType::HBO;
    if (raw == "NHB" || raw == "nhb") return TripType::NHB;
    return std::nullopt;
}

std::optional<LandUse> parse_land_use(const std::string& raw) {
    const std::string s = lower(raw);
    if (s == "residential") return LandUse::Residential;
    if (s == "commercial_institutional" || s == "commercial" || s == "institutional")
        return LandUse::CommercialInstitutional;
    if (s == "park_recreational" || s == "park" || s == "recreational") return LandUse::ParkRecreational;
    if (s == "other") return LandUse::Other;
    return std::nullopt;
}

}  // namespace crimebsf
