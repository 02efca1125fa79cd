#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kiln/emissions.hpp"
#include "kiln/exposure.hpp"
#include "kiln/geo.hpp"

namespace kiln {

struct KilnRecord {
    int id = 0;
    int kiln_type = 0;
    GeoPoint location;
    std::optional<std::string> district;
    EmissionProfile emissions;
    std::optional<ExposureResult> exposure;
};

struct KilnDataset {
    std::vector<KilnRecord> records;
    std::string crs = "WGS84";
    std::string provenance;
};

void validate(const KilnDataset& dataset);

void write_minimal_csv(const KilnDataset& dataset, const std::filesystem::path& path);
KilnDataset read_minimal_csv(const std::filesystem::path& path);

void write_extended_csv(const KilnDataset& dataset, const std::filesystem::path& path);

void write_geojson(const KilnDataset& dataset, const std::filesystem::path& path);
KilnDataset read_geojson(const std::filesystem::path& path);

struct District {
    std::string name;
    // rings of [lon, lat] vertices; containment is even-odd across all rings
    std::vector<std::vector<std::array<double, 2>>> rings;
};

std::vector<District> load_districts(const std::filesystem::path& path);
bool district_contains(const District& district, const GeoPoint& point);
void assign_districts(KilnDataset& dataset, std::span<const District> districts);

}  // namespace kiln
