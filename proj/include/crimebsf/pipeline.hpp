#pragma once
// End-to-end orchestration: in-memory fitting helpers and the on-disk stages
// behind the command-line subcommands.
//
// Run directory layout:
//   run.cfg                    canonical run config
//   validation_report.txt
//   data/                      city in ingest format (ingest.cfg inside)
//   truth/                     generating values (synthetic runs)
//   features/                  raw.csv, counts.csv, flags.txt, corehoods.csv
//   connectivity/<kind>.csv
//   eigenbasis/<selection>_<kind>/
//   fits/<label>/              fit archives
//   evaluation/<label>/        report.txt, pointwise.csv, posterior_summary.csv, decomposition.geojson
//   diagnostics/               report.txt, tests.csv
//   compare.csv, sweep_radius.csv, transfer.csv
//   FAILED                     present when a stage aborted

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crimebsf/archive.hpp"
#include "crimebsf/connectivity.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/evaluation.hpp"
#include "crimebsf/features.hpp"
#include "crimebsf/geo_core.hpp"
#include "crimebsf/model.hpp"
#include "crimebsf/spatial_filter.hpp"

namespace crimebsf {

struct PreparedCity {
    std::vector<Corehood> corehoods;
    RawFeatureTable raw;
    CountTable counts;
    std::vector<std::string> warnings;
};

PreparedCity prepare_city(const CityDataset& city, const DateWindow& window, double radius_m,
                          double crime_buffer_m = 30.0);

struct Design {
    FeatureMatrix features;
    EigenBasis basis;  // empty for NB_RIDGE
};

Design build_design(const RawFeatureTable& raw, const std::string& selection, const Eigen::MatrixXd& C,
                    Variant variant, double eigen_threshold);

// C is the connectivity of spec.connectivity; it also serves as W for residual diagnostics.
ModelFit fit_design(const Design& design, const CountTable& counts, const Eigen::MatrixXd& C, const ModelSpec& spec);

// Everything in memory: corehoods, features, connectivity, basis and sampling.
ModelFit fit_city(const CityDataset& city, const DateWindow& window, const ModelSpec& spec);

struct RunConfig {
    KeyValueConfig raw;
    std::optional<std::filesystem::path> ingest_config;
    std::optional<std::filesystem::path> synth_config;
    std::filesystem::path out;
    ModelSpec spec;
    std::vector<ModelSpec> compare;       // from `compare = sel/variant/kind; ...`
    std::vector<double> sweep_radii;      // from `radii = 804.672,1609.344`
    std::optional<std::filesystem::path> transfer_fit;
    int permutation_replicates = 199;
    int jobs = 1;
    double crime_buffer_m = 30.0;

    [[nodiscard]] Stamp stamp() const;
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> profile;
    std::optional<int> jobs;
};

// Validates every key and enumeration before any compute.
RunConfig load_run_config(const std::filesystem::path& path, const RunOverrides& overrides = {});
RunConfig parse_run_config(const KeyValueConfig& cfg, const RunOverrides& overrides = {});

// Parses one `selection/variant/connectivity` entry; missing parts come from `base`.
ModelSpec parse_spec_entry(const std::string& entry, const ModelSpec& base);

// Stages. Each reads upstream artifacts from the run directory and fails with
// an InputError naming the expected file when one is missing.
void stage_data(const RunConfig& rc);
void stage_features(const RunConfig& rc);
void stage_diagnose(const RunConfig& rc);
std::filesystem::path stage_fit(const RunConfig& rc, const ModelSpec& spec);
EvaluationReport stage_evaluate(const RunConfig& rc, const ModelSpec& spec);
std::vector<ComparisonRow> stage_compare(const RunConfig& rc);
std::vector<ComparisonRow> stage_sweep_radius(const RunConfig& rc);
TransferReport stage_transfer(const RunConfig& rc);

// Runs `fn` as stage `name`: errors are rethrown with the stage name and a
// FAILED marker is left in the run directory.
template <class Fn>
auto run_stage(const RunConfig& rc, const std::string& name, Fn&& fn) -> decltype(fn());

void mark_failed(const RunConfig& rc, const std::string& stage, const std::string& what);

// data, features, diagnose, fit and evaluate for the main spec.
void run_pipeline(const RunConfig& rc);

std::string format_comparison(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string format_evaluation(const EvaluationReport& r);

template <class Fn>
auto run_stage(const RunConfig& rc, const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InputError& e) {
        mark_failed(rc, name, e.what());
        throw InputError("stage '" + name + "': " + e.what());
    } catch (const ComputeError& e) {
        mark_failed(rc, name, e.what());
        throw ComputeError("stage '" + name + "': " + e.what());
    } catch (const std::exception& e) {
        mark_failed(rc, name, e.what());
        throw ComputeError("stage '" + name + "': " + e.what());
    }
}

}  // namespace crimebsf
