#pragma once
// City data model, corehood construction and crime-to-unit assignment.

#include <array>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "crimebsf/geometry.hpp"
#include "crimebsf/street_graph.hpp"

namespace crimebsf {

// Half a mile in meters.
inline constexpr double kHalfMileM = 804.672;

struct Block {
    std::string id;
    std::string unit_id;
    MultiPolygon geometry;
    double area_m2 = 0.0;
    std::vector<int> building_years;
};

struct SpatialUnit {
    std::string id;
    MultiPolygon geometry;
    Point centroid;
    std::vector<std::size_t> blocks;  // indices into CityDataset::blocks
    double residential_population = 0.0;
    double dwelling_units = 0.0;
};

struct Corehood {
    std::size_t core = 0;              // unit index of the core
    std::vector<std::size_t> members;  // sorted unit indices, includes core
    double radius_m = kHalfMileM;
};

enum class CrimeCategory { Violent, Property };

struct CrimeEvent {
    std::string id;
    Point location;
    CrimeCategory category = CrimeCategory::Property;
    std::chrono::sys_days date{};
};

// Nine walkability categories plus the nightlife counter used by core features.
enum class PoiCategory { Grocery, Food, Shops, Schools, Entertainment, Parks, Coffee, Banks, Books, Nightlife };
inline constexpr std::size_t kPoiCategoryCount = 10;

struct Poi {
    Point location;
    PoiCategory category = PoiCategory::Food;
};

struct Stay {
    std::string person_id;
    int day = 0;
    Point location;
    double duration_hours = 0.0;
};

enum class TripType { HBW, HBO, NHB };

struct Trip {
    std::string person_id;
    int day = 0;
    Point origin;
    Point destination;
    TripType type = TripType::HBO;
};

enum class LandUse { Residential, CommercialInstitutional, ParkRecreational, Other };

struct Parcel {
    MultiPolygon geometry;
    LandUse land_use = LandUse::Other;
};

struct CensusRecord {
    double unemployment_rate = 0.0;
    double poverty_rate = 0.0;
    double residential_mobility_rate = 0.0;
    std::array<double, 6> ethnic_shares{};
};

struct CityDataset {
    std::string name;
    std::vector<SpatialUnit> units;
    std::vector<Block> blocks;
    std::vector<Poi> pois;
    StreetGraph street_graph;
    std::vector<CrimeEvent> crimes;
    std::vector<Stay> stays;
    std::vector<Trip> trips;
    std::vector<Parcel> parcels;
    std::vector<CensusRecord> census;  // aligned with units
    int mobility_days = 1;

    [[nodiscard]] std::optional<std::size_t> unit_index(const std::string& id) const;
};

// Half-open date window [start, end).
struct DateWindow {
    std::chrono::sys_days start;
    std::chrono::sys_days end;
    [[nodiscard]] bool contains(std::chrono::sys_days d) const { return d >= start && d < end; }
};

std::vector<Corehood> build_corehoods(const std::vector<SpatialUnit>& units, double radius_m);

// Cores whose corehood has fewer than `min_members` members (edge effects).
std::vector<std::size_t> boundary_cores(const std::vector<Corehood>& corehoods, std::size_t min_members = 3);

struct CrimeAssignment {
    std::vector<double> violent;   // per unit
    std::vector<double> property;  // per unit
    double unassigned = 0.0;
    std::vector<std::string> unassigned_ids;
    std::size_t outside_window = 0;
    std::size_t considered = 0;

    [[nodiscard]] std::vector<double> total() const;
};

CrimeAssignment assign_crimes(const std::vector<CrimeEvent>& crimes, const std::vector<SpatialUnit>& units,
                              double buffer_m = 30.0, std::optional<DateWindow> window = std::nullopt);

// Index of the unit containing `p` (lowest index on shared boundaries).
std::optional<std::size_t> locate_unit(const std::vector<SpatialUnit>& units, const std::vector<BBox>& boxes,
                                       const Point& p);
std::vector<BBox> unit_boxes(const std::vector<SpatialUnit>& units);

// Round-half-to-even of fractional crime totals for the count likelihood.
std::vector<int> round_counts(const std::vector<double>& totals);

std::string to_string(CrimeCategory c);
std::string to_string(PoiCategory c);
std::string to_string(TripType t);
std::string to_string(LandUse u);
std::optional<CrimeCategory> parse_crime_category(const std::string& s);
std::optional<PoiCategory> parse_poi_category(const std::string& s);
std::optional<TripType> parse_trip_type(const std::string& s);
std::optional<LandUse> parse_land_use(const std::string& s);

}  // namespace crimebsf
