#pragma once
// Loading a city from GeoJSON/CSV files named by an ingest config, and
// writing a CityDataset back out in the same formats.
//
// Ingest config keys (paths relative to the config file):
//   name, crs, units, blocks, parcels, census, crimes, pois, poi_categories,
//   street_nodes, street_edges, stays, trips,
//   crime_window_start, crime_window_end  (ISO dates, half-open window)
//   mobility_days                          (optional; default: distinct days seen)

#include <filesystem>
#include <string>
#include <vector>

#include "crimebsf/config.hpp"
#include "crimebsf/geo_core.hpp"

namespace crimebsf {

struct ValidationReport {
    enum class Kind { Dropped, Repaired, Warning };
    struct Entry {
        Kind kind;
        std::string source;  // file (and line/feature)
        std::string message;
    };
    std::vector<Entry> entries;

    void dropped(std::string source, std::string msg) { entries.push_back({Kind::Dropped, std::move(source), std::move(msg)}); }
    void repaired(std::string source, std::string msg) { entries.push_back({Kind::Repaired, std::move(source), std::move(msg)}); }
    void warn(std::string source, std::string msg) { entries.push_back({Kind::Warning, std::move(source), std::move(msg)}); }
    [[nodiscard]] std::size_t count(Kind k) const;
    [[nodiscard]] std::string to_text() const;
};

struct IngestResult {
    CityDataset city;
    ValidationReport report;
    DateWindow window;
};

IngestResult ingest_city(const KeyValueConfig& config);
IngestResult ingest_city(const std::filesystem::path& config_path);

// Parses "YYYY-MM-DD" (a trailing time part is ignored).
std::chrono::sys_days parse_date(const std::string& s);
std::string format_date(std::chrono::sys_days d);

// Writes every file `ingest_city` reads plus `ingest.cfg`; returns the config path.
std::filesystem::path write_city(const CityDataset& city, const DateWindow& window,
                                 const std::filesystem::path& dir, const std::string& crs = "EPSG:3857");

}  // namespace crimebsf
