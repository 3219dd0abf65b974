#pragma once
// On-disk stage artifacts: feature tables, counts and fit archives.
//
// Fit archive layout:
//   spec.cfg               model spec, sampler settings, priors, references
//   data.csv               core_id, y, y_unrounded
//   design.csv             core_id and standardized features
//   standardization.csv    feature, mean, sd
//   draws.csv              chain and one column per parameter
//   pointwise_loglik.bin   S x N doubles, column-major, little-endian
//   sampler.csv            per-parameter R-hat
//   sampler.cfg            divergences, step sizes, runtime, warnings

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crimebsf/config.hpp"
#include "crimebsf/evaluation.hpp"
#include "crimebsf/features.hpp"

namespace crimebsf {

// Provenance stamp written as a leading '#' line of every artifact.
struct Stamp {
    std::string config_hash;
    std::uint64_t seed = 0;
    [[nodiscard]] std::string line() const;
};

void write_text(const std::filesystem::path& path, const std::string& content, const Stamp& stamp);

void write_raw_features(const RawFeatureTable& raw, const std::filesystem::path& path, const Stamp& stamp);
// Columns must belong to the feature catalogue.
RawFeatureTable read_raw_features(const std::filesystem::path& path);

void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path, const Stamp& stamp);

struct CountTable {
    std::vector<std::string> core_ids;
    std::vector<double> violent;
    std::vector<double> property;
    std::vector<double> total;
    std::vector<int> y;  // rounded totals
};

void write_counts(const CountTable& c, const std::filesystem::path& path, const Stamp& stamp);
CountTable read_counts(const std::filesystem::path& path);

// Hash of the modeled data (counts, design and basis).
std::string data_fingerprint(const std::vector<int>& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& E);

KeyValueConfig spec_to_config(const ModelSpec& spec);
// Missing keys keep their defaults; enumerations are validated.
ModelSpec spec_from_config(const KeyValueConfig& cfg, ModelSpec base = {});

// Where the archive's basis and connectivity live (relative paths are kept
// relative to the archive directory).
struct ArchiveRefs {
    std::filesystem::path eigen_lambdas;
    std::filesystem::path eigen_vectors;
    std::filesystem::path connectivity;
};

void write_fit_archive(const ModelFit& fit, const ArchiveRefs& refs, const std::filesystem::path& dir,
                       const Stamp& stamp);
// Reloads a fit; the referenced basis must reproduce the stored fingerprint.
ModelFit read_fit_archive(const std::filesystem::path& dir);

// Filesystem-safe form of a model label.
std::string slug(const std::string& label);

}  // namespace crimebsf
