#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kiln/geo.hpp"

namespace kiln {

enum class AmenityKind { School, Hospital };

std::string amenity_kind_name(AmenityKind kind);

struct AmenityPoint {
    AmenityKind kind = AmenityKind::School;
    GeoPoint location;
    std::string name;

    bool operator==(const AmenityPoint&) const = default;
};

struct PopulationCell {
    GeoPoint location;
    std::int64_t population = 0;

    bool operator==(const PopulationCell&) const = default;
};

struct KilnSite {
    int kiln_id = 0;
    GeoPoint location;
};

struct ExposureResult {
    int kiln_id = 0;
    int schools_1km = 0;
    int hospitals_1km = 0;
    std::int64_t population_1km = 0;

    bool operator==(const ExposureResult&) const = default;
};

// Loaders accept .csv and .geojson/.json files. Structural problems (missing
// file, bad header, unparseable JSON) throw; bad rows are collected so a load
// can survive isolated dirty records.
struct AmenityLoadResult {
    std::vector<AmenityPoint> points;
    std::vector<std::string> row_errors;
    int skipped_unknown = 0;
};

AmenityLoadResult load_amenities(const std::filesystem::path& path);

struct PopulationLoadResult {
    std::vector<PopulationCell> cells;
    std::vector<std::string> row_errors;
};

PopulationLoadResult load_population(const std::filesystem::path& path);

std::vector<ExposureResult> exposure_for_kilns(std::span<const KilnSite> kilns,
                                               std::span<const AmenityPoint> amenities,
                                               std::span<const PopulationCell> cells,
                                               double radius_m = 1000.0);

struct ExposureSummary {
    double pct_with_school = 0.0;
    double pct_with_hospital = 0.0;
    std::int64_t population_raw = 0;
    std::int64_t population_deduped = 0;
};

// Percentages come from the per-kiln results; the deduplicated population is
// recomputed from the cells so a cell near several kilns counts once.
ExposureSummary exposure_summary(std::span<const ExposureResult> results,
                                 std::span<const KilnSite> kilns,
                                 std::span<const PopulationCell> cells,
                                 double radius_m = 1000.0);

}  // namespace kiln
