#pragma once
// Synthetic lattice cities with known generating parameters.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "crimebsf/connectivity.hpp"
#include "crimebsf/geo_core.hpp"

namespace crimebsf {

enum class SpatialField { None, Eigen };

// Distribution of the field's eigen-coordinates before rescaling: independent
// standard normals, or the BSF prior N(0, (E'QE)^-1).
enum class FieldPrior { Iid, Bsf };

struct SynthConfig {
    int rows = 20;
    int cols = 20;
    double cell_m = 1000.0;
    std::uint64_t seed = 1;
    std::string name = "synth";

    double beta0 = 2.5;
    // Generating coefficients on standardized features.
    std::vector<std::pair<std::string, double>> beta;
    double phi = 5.0;

    SpatialField spatial_field = SpatialField::None;
    double spatial_sd = 0.5;  // sample sd of the injected field on the log scale
    FieldPrior field_prior = FieldPrior::Iid;
    ConnectivityKind field_connectivity = ConnectivityKind::Contiguity;
    double radius_m = kHalfMileM;  // corehood radius of the generating features and field

    double poi_density = 1.0;       // multiplier of the per-unit POI rates
    double agents_per_1000 = 2.0;   // simulated people per 1000 residents
    int days = 2;
    double work_prob = 0.6;
    double other_prob = 0.7;
};

struct TruthRecord {
    double beta0 = 0.0;
    std::vector<std::string> feature_names;
    Eigen::VectorXd beta;
    double phi = 0.0;
    Eigen::MatrixXd X;         // standardized generating features (N x P)
    Eigen::VectorXd field;     // injected log-scale spatial field (zeros when none)
    Eigen::VectorXd gamma;     // eigen-coordinates of the field
    Eigen::VectorXd mu;
    std::vector<int> y;
    std::uint64_t seed = 0;
};

struct SyntheticCity {
    CityDataset city;
    DateWindow window;
    TruthRecord truth;
};

SyntheticCity generate_city(const SynthConfig& cfg);

// Truth parameters and per-unit truth as CSV files in `dir`.
void write_truth(const SyntheticCity& s, const std::filesystem::path& dir);

// Parses a synth config file (keys mirror SynthConfig; beta = name:value,name:value).
SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace crimebsf
