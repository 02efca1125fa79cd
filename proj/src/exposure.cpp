#include "kiln/exposure.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "kiln/error.hpp"

namespace kiln {

namespace {

std::string lowercase_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::vector<std::string> split_fields(const std::string& line, std::size_t max_fields) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (fields.size() + 1 < max_fields) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) break;
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    fields.push_back(line.substr(start));
    return fields;
}

double parse_double_field(const std::string& field, const char* what) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw Error(std::string("bad ") + what + " '" + field + "'");
    return value;
}

std::int64_t parse_count_field(const std::string& field, const char* what) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw Error(std::string("bad ") + what + " '" + field + "'");
    return value;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

bool kind_from_string(const std::string& text, AmenityKind& kind) {
    if (text == "school") {
        kind = AmenityKind::School;
        return true;
    }
    if (text == "hospital") {
        kind = AmenityKind::Hospital;
        return true;
    }
    return false;
}

nlohmann::json parse_feature_collection(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc.at("features").is_array())
        throw ParseError("expected a GeoJSON FeatureCollection");
    return doc;
}

GeoPoint feature_point(const nlohmann::json& feature) {
    const auto& geometry = feature.at("geometry");
    if (geometry.value("type", "") != "Point") throw Error("geometry is not a Point");
    const auto& coords = geometry.at("coordinates");
    if (!coords.is_array() || coords.size() < 2) throw Error("bad coordinates");
    return GeoPoint(coords.at(1).get<double>(), coords.at(0).get<double>());
}

AmenityLoadResult load_amenities_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "kind,lat,lon,name")
        throw ParseError("expected header 'kind,lat,lon,name'", 1);
    AmenityLoadResult result;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line, 4);
        try {
            if (fields.size() != 4) throw Error("expected 4 fields");
            AmenityPoint point;
            if (!kind_from_string(fields[0], point.kind)) {
                ++result.skipped_unknown;
                continue;
            }
            point.location = GeoPoint(parse_double_field(fields[1], "latitude"),
                                      parse_double_field(fields[2], "longitude"));
            point.name = fields[3];
            result.points.push_back(std::move(point));
        } catch (const std::exception& e) {
            result.row_errors.push_back(std::string(e.what()) + " (line " +
                                        std::to_string(line_no) + ")");
        }
    }
    return result;
}

AmenityLoadResult load_amenities_geojson(const std::filesystem::path& path) {
    nlohmann::json doc = parse_feature_collection(path);
    AmenityLoadResult result;
    std::size_t index = 0;
    for (const auto& feature : doc.at("features")) {
        ++index;
        try {
            const auto& props = feature.at("properties");
            AmenityPoint point;
            if (!kind_from_string(props.value("kind", ""), point.kind)) {
                ++result.skipped_unknown;
                continue;
            }
            point.location = feature_point(feature);
            point.name = props.value("name", "");
            result.points.push_back(std::move(point));
        } catch (const std::exception& e) {
            result.row_errors.push_back("feature " + std::to_string(index) + ": " + e.what());
        }
    }
    return result;
}

PopulationLoadResult load_population_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "lat,lon,population")
        throw ParseError("expected header 'lat,lon,population'", 1);
    PopulationLoadResult result;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line, 3);
        try {
            if (fields.size() != 3) throw Error("expected 3 fields");
            PopulationCell cell;
            cell.location = GeoPoint(parse_double_field(fields[0], "latitude"),
                                     parse_double_field(fields[1], "longitude"));
            cell.population = parse_count_field(fields[2], "population");
            if (cell.population < 0) throw Error("population cannot be negative");
            result.cells.push_back(cell);
        } catch (const std::exception& e) {
            result.row_errors.push_back(std::string(e.what()) + " (line " +
                                        std::to_string(line_no) + ")");
        }
    }
    return result;
}

PopulationLoadResult load_population_geojson(const std::filesystem::path& path) {
    nlohmann::json doc = parse_feature_collection(path);
    PopulationLoadResult result;
    std::size_t index = 0;
    for (const auto& feature : doc.at("features")) {
        ++index;
        try {
            PopulationCell cell;
            cell.location = feature_point(feature);
            cell.population = feature.at("properties").at("population").get<std::int64_t>();
            if (cell.population < 0) throw Error("population cannot be negative");
            result.cells.push_back(cell);
        } catch (const std::exception& e) {
            result.row_errors.push_back("feature " + std::to_string(index) + ": " + e.what());
        }
    }
    return result;
}

}  // namespace

std::string amenity_kind_name(AmenityKind kind) {
    switch (kind) {
        case AmenityKind::School: return "school";
        case AmenityKind::Hospital: return "hospital";
    }
    throw Error("unknown amenity kind");
}

AmenityLoadResult load_amenities(const std::filesystem::path& path) {
    std::string ext = lowercase_ext(path);
    if (ext == ".csv") return load_amenities_csv(path);
    if (ext == ".geojson" || ext == ".json") return load_amenities_geojson(path);
    throw Error("unsupported amenity format '" + ext + "'");
}

PopulationLoadResult load_population(const std::filesystem::path& path) {
    std::string ext = lowercase_ext(path);
    if (ext == ".csv") return load_population_csv(path);
    if (ext == ".geojson" || ext == ".json") return load_population_geojson(path);
    throw Error("unsupported population format '" + ext + "'");
}

std::vector<ExposureResult> exposure_for_kilns(std::span<const KilnSite> kilns,
                                               std::span<const AmenityPoint> amenities,
                                               std::span<const PopulationCell> cells,
                                               double radius_m) {
    if (!(radius_m > 0.0)) throw Error("exposure radius must be positive");
    std::vector<GeoPoint> amenity_locs;
    amenity_locs.reserve(amenities.size());
    for (const auto& a : amenities) amenity_locs.push_back(a.location);
    std::vector<GeoPoint> cell_locs;
    cell_locs.reserve(cells.size());
    for (const auto& c : cells) cell_locs.push_back(c.location);
    SpatialGridIndex amenity_index = build_index(amenity_locs, radius_m);
    SpatialGridIndex cell_index = build_index(cell_locs, radius_m);

    std::vector<ExposureResult> results;
    results.reserve(kilns.size());
    for (const auto& kiln : kilns) {
        ExposureResult r;
        r.kiln_id = kiln.kiln_id;
        for (std::size_t id : points_within_radius(amenity_index, kiln.location, radius_m)) {
            if (amenities[id].kind == AmenityKind::School)
                ++r.schools_1km;
            else
                ++r.hospitals_1km;
        }
        for (std::size_t id : points_within_radius(cell_index, kiln.location, radius_m))
            r.population_1km += cells[id].population;
        results.push_back(r);
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const ExposureResult& a, const ExposureResult& b) {
                         return a.kiln_id < b.kiln_id;
                     });
    return results;
}

ExposureSummary exposure_summary(std::span<const ExposureResult> results,
                                 std::span<const KilnSite> kilns,
                                 std::span<const PopulationCell> cells, double radius_m) {
    if (results.empty()) throw Error("exposure summary needs at least one result");
    if (!(radius_m > 0.0)) throw Error("exposure radius must be positive");
    ExposureSummary summary;
    int with_school = 0;
    int with_hospital = 0;
    for (const auto& r : results) {
        if (r.schools_1km > 0) ++with_school;
        if (r.hospitals_1km > 0) ++with_hospital;
        summary.population_raw += r.population_1km;
    }
    summary.pct_with_school = 100.0 * with_school / static_cast<double>(results.size());
    summary.pct_with_hospital = 100.0 * with_hospital / static_cast<double>(results.size());

    std::vector<GeoPoint> kiln_locs;
    kiln_locs.reserve(kilns.size());
    for (const auto& k : kilns) kiln_locs.push_back(k.location);
    SpatialGridIndex kiln_index = build_index(kiln_locs, radius_m);
    for (const auto& cell : cells) {
        if (!points_within_radius(kiln_index, cell.location, radius_m).empty())
            summary.population_deduped += cell.population;
    }
    return summary;
}

}  // namespace kiln
