#pragma once
// Core, social-disorganization (SD), built-environment (BE) and mobility (M)
// covariates per core and corehood.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crimebsf/geo_core.hpp"
#include "crimebsf/parallel.hpp"

namespace crimebsf {

enum class FeatureGroup { Core, SD, BE, M };

std::string to_string(FeatureGroup g);

// A value that may have been defaulted because its inputs were empty.
struct FlaggedValue {
    double value = 0.0;
    bool flagged = false;
};

// Piecewise walking-distance decay: full weight up to d_full, quadratic drop
// to knee_value at d_knee, linear to zero at d_zero.
struct DecayCurve {
    double d_full = 500.0;
    double d_knee = 1500.0;
    double d_zero = 2400.0;
    double knee_value = 0.1;

    [[nodiscard]] double operator()(double d) const;
};

struct WalkabilityCategory {
    PoiCategory category;
    std::vector<double> weights;  // weight of the i-th closest POI
};

struct WalkabilityConfig {
    std::vector<WalkabilityCategory> categories;
    DecayCurve decay;
    double snap_max_m = 200.0;

    // Grocery, Food, Shops, Schools, Entertainment, Parks, Coffee, Banks, Books.
    static WalkabilityConfig standard();
    [[nodiscard]] double max_score() const;
};

// POIs snapped onto the street graph, grouped by category.
struct PoiNetworkIndex {
    struct Entry {
        std::size_t node;
        double offset_m;
    };
    std::array<std::vector<Entry>, kPoiCategoryCount> by_category;
};

PoiNetworkIndex build_poi_index(const std::vector<Poi>& pois, const StreetGraph& graph, double snap_max_m);

// Areas (m^2) of residential, commercial/institutional and park/recreational use.
using LandUseAreas = std::array<double, 3>;

// Normalized land-use entropy in [0, 1]; flagged (value 0) with no developed area.
FlaggedValue land_use_mix(const LandUseAreas& areas);

// Walkability of a single location; flagged (value 0) when it cannot be snapped.
FlaggedValue walkability_block(const Point& location, const PoiNetworkIndex& pois, const StreetGraph& graph,
                               const WalkabilityConfig& cfg);

FlaggedValue corehood_walkability(std::span<const double> block_scores);
FlaggedValue avg_block_area(std::span<const double> block_areas_m2);
// Population standard deviation of construction years.
FlaggedValue building_age_diversity(std::span<const int> years);
// Dwelling units per km^2.
FlaggedValue population_density(double dwelling_units, double area_m2);

// 1 - sum s_i^2 over six groups; shares are renormalized. Throws on all-zero shares.
double hhi_diversity(std::span<const double> shares);

struct SdComposites {
    Eigen::VectorXd disadvantage;
    Eigen::VectorXd instability;
    Eigen::Matrix3d correlation;
    Eigen::Matrix3d loadings;  // columns are components, descending eigenvalue
    Eigen::Vector3d eigenvalues;
};

// PCA of the correlation matrix of (unemployment, poverty, residential mobility).
SdComposites sd_composites(std::span<const double> unemployment, std::span<const double> poverty,
                           std::span<const double> residential_mobility);

// Mean daily number of distinct people stopping at least `min_duration_hours` in each unit.
std::vector<double> ambient_population(const std::vector<Stay>& stays, const std::vector<SpatialUnit>& units,
                                       int days, double min_duration_hours = 1.0);

// Number of non-home-based trips ending inside each corehood.
std::vector<double> attractiveness(const std::vector<Trip>& trips, const std::vector<SpatialUnit>& units,
                                   const std::vector<Corehood>& corehoods);

// Every computable feature, unstandardized, for all cores.
struct RawFeatureTable {
    std::vector<std::string> core_ids;
    std::vector<std::string> names;
    std::vector<FeatureGroup> groups;
    Eigen::MatrixXd values;  // cores x features
    std::vector<std::string> flags;
    std::vector<std::string> warnings;

    [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;
};

// The fixed feature catalogue in column order.
const std::vector<std::pair<std::string, FeatureGroup>>& feature_catalogue();

RawFeatureTable compute_raw_features(const CityDataset& city, const std::vector<Corehood>& corehoods,
                                     const WalkabilityConfig& cfg = WalkabilityConfig::standard(),
                                     Backend backend = Backend::OpenMP);

// Either a union of groups (Core always included) or an explicit feature list.
struct FeatureSelection {
    std::vector<FeatureGroup> groups;
    std::vector<std::string> names;  // explicit list, used when non-empty
    std::string label;

    // "Core", "SD+BE", "Full", "Minimal:a,b,c" or "Features:a,b".
    static FeatureSelection parse(const std::string& text);
    [[nodiscard]] bool includes(const std::string& feature, FeatureGroup g) const;
};

struct FeatureMatrix {
    std::vector<std::string> core_ids;
    Eigen::MatrixXd X;  // standardized
    std::vector<std::string> names;
    std::vector<FeatureGroup> groups;
    Eigen::VectorXd means;
    Eigen::VectorXd sds;
    std::vector<std::string> warnings;
};

// Select columns and z-score with their own statistics. Constant columns are dropped.
FeatureMatrix select_features(const RawFeatureTable& raw, const FeatureSelection& selection);

// Z-score `raw` columns `names` with given statistics (training-set standardization).
Eigen::MatrixXd standardize_with(const RawFeatureTable& raw, const std::vector<std::string>& names,
                                 const Eigen::VectorXd& means, const Eigen::VectorXd& sds);

FeatureMatrix assemble_features(const CityDataset& city, const std::vector<Corehood>& corehoods,
                                const FeatureSelection& selection,
                                const WalkabilityConfig& cfg = WalkabilityConfig::standard());

}  // namespace crimebsf
