#include "kiln/inventory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "kiln/error.hpp"

namespace kiln {

namespace {

constexpr const char* kMinimalHeader = "kiln_type,lat,lon";
constexpr const char* kExtendedHeader =
    "id,kiln_type,lat,lon,district,pm10_kg_day,pm25_kg_day,sox_kg_day,nox_kg_day,"
    "pm10_kg_yr,pm25_kg_yr,sox_kg_yr,nox_kg_yr,schools_1km,hospitals_1km,population_1km";

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split_all(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) break;
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    fields.push_back(line.substr(start));
    return fields;
}

double parse_double_field(const std::string& field, const char* what, int line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(std::string("bad ") + what + " '" + field + "'", line_no);
    return value;
}

std::string fixed6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

double round6(double value) { return std::round(value * 1e6) / 1e6; }

std::vector<const KilnRecord*> records_by_id(const KilnDataset& dataset) {
    std::vector<const KilnRecord*> ordered;
    ordered.reserve(dataset.records.size());
    for (const auto& r : dataset.records) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const KilnRecord* a, const KilnRecord* b) { return a->id < b->id; });
    return ordered;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace

void validate(const KilnDataset& dataset) {
    if (dataset.crs != "WGS84") throw Error("dataset crs must be WGS84");
    std::unordered_set<int> ids;
    for (const auto& r : dataset.records) {
        if (r.kiln_type != 0 && r.kiln_type != 1)
            throw Error("kiln " + std::to_string(r.id) + " has type " +
                        std::to_string(r.kiln_type) + ", expected 0 or 1");
        if (!is_valid(r.location))
            throw Error("kiln " + std::to_string(r.id) + " has an invalid location");
        if (!ids.insert(r.id).second)
            throw Error("duplicate kiln id " + std::to_string(r.id));
    }
}

void write_minimal_csv(const KilnDataset& dataset, const std::filesystem::path& path) {
    validate(dataset);
    auto out = open_out(path);
    out << kMinimalHeader << "\n";
    for (const KilnRecord* r : records_by_id(dataset))
        out << r->kiln_type << ',' << fixed6(r->location.lat) << ','
            << fixed6(r->location.lon) << "\n";
}

KilnDataset read_minimal_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    KilnDataset dataset;
    std::string line;
    int line_no = 0;
    int next_id = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        if (line_no == 1 && line == kMinimalHeader) continue;
        auto fields = split_all(line);
        if (fields.size() != 3)
            throw ParseError("expected 3 fields, got " + std::to_string(fields.size()),
                             line_no);
        KilnRecord record;
        record.id = next_id++;
        if (fields[0] == "0")
            record.kiln_type = 0;
        else if (fields[0] == "1")
            record.kiln_type = 1;
        else
            throw ParseError("kiln type must be 0 or 1, got '" + fields[0] + "'", line_no);
        double lat = parse_double_field(fields[1], "latitude", line_no);
        double lon = parse_double_field(fields[2], "longitude", line_no);
        try {
            record.location = GeoPoint(lat, lon);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
        record.emissions.kiln_type = record.kiln_type;
        dataset.records.push_back(std::move(record));
    }
    validate(dataset);
    return dataset;
}

void write_extended_csv(const KilnDataset& dataset, const std::filesystem::path& path) {
    validate(dataset);
    auto out = open_out(path);
    out << kExtendedHeader << "\n";
    for (const KilnRecord* r : records_by_id(dataset)) {
        out << r->id << ',' << r->kiln_type << ',' << fixed6(r->location.lat) << ','
            << fixed6(r->location.lon) << ',' << (r->district ? *r->district : "");
        const PollutantAmounts& d = r->emissions.daily_kg;
        const PollutantAmounts& s = r->emissions.seasonal_kg;
        for (double value : {d.pm10, d.pm25, d.sox, d.nox, s.pm10, s.pm25, s.sox, s.nox})
            out << ',' << fixed6(value);
        if (r->exposure)
            out << ',' << r->exposure->schools_1km << ',' << r->exposure->hospitals_1km
                << ',' << r->exposure->population_1km;
        else
            out << ",,,";
        out << "\n";
    }
}

void write_geojson(const KilnDataset& dataset, const std::filesystem::path& path) {
    validate(dataset);
    nlohmann::ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["crs"] = dataset.crs;
    doc["provenance"] = dataset.provenance;
    doc["features"] = nlohmann::ordered_json::array();
    for (const KilnRecord* r : records_by_id(dataset)) {
        nlohmann::ordered_json props;
        props["id"] = r->id;
        props["kiln_type"] = r->kiln_type;
        props["district"] = r->district ? nlohmann::ordered_json(*r->district)
                                        : nlohmann::ordered_json(nullptr);
        const PollutantAmounts& d = r->emissions.daily_kg;
        const PollutantAmounts& s = r->emissions.seasonal_kg;
        props["pm10_kg_day"] = round6(d.pm10);
        props["pm25_kg_day"] = round6(d.pm25);
        props["sox_kg_day"] = round6(d.sox);
        props["nox_kg_day"] = round6(d.nox);
        props["pm10_kg_yr"] = round6(s.pm10);
        props["pm25_kg_yr"] = round6(s.pm25);
        props["sox_kg_yr"] = round6(s.sox);
        props["nox_kg_yr"] = round6(s.nox);
        if (r->exposure) {
            props["schools_1km"] = r->exposure->schools_1km;
            props["hospitals_1km"] = r->exposure->hospitals_1km;
            props["population_1km"] = r->exposure->population_1km;
        } else {
            props["schools_1km"] = nullptr;
            props["hospitals_1km"] = nullptr;
            props["population_1km"] = nullptr;
        }
        nlohmann::ordered_json feature;
        feature["type"] = "Feature";
        feature["properties"] = std::move(props);
        feature["geometry"] = {
            {"type", "Point"},
            {"coordinates", {round6(r->location.lon), round6(r->location.lat)}},
        };
        doc["features"].push_back(std::move(feature));
    }
    auto out = open_out(path);
    out << doc.dump(2) << "\n";
}

KilnDataset read_geojson(const std::filesystem::path& path) {
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
    KilnDataset dataset;
    dataset.crs = doc.value("crs", "WGS84");
    dataset.provenance = doc.value("provenance", "");
    std::size_t index = 0;
    for (const auto& feature : doc.at("features")) {
        ++index;
        try {
            const auto& geometry = feature.at("geometry");
            if (geometry.value("type", "") != "Point")
                throw Error("geometry is not a Point");
            const auto& coords = geometry.at("coordinates");
            if (!coords.is_array() || coords.size() < 2) throw Error("bad coordinates");
            const auto& props = feature.at("properties");
            KilnRecord record;
            record.id = props.at("id").get<int>();
            record.kiln_type = props.at("kiln_type").get<int>();
            record.location = GeoPoint(coords.at(1).get<double>(), coords.at(0).get<double>());
            if (props.contains("district") && !props.at("district").is_null())
                record.district = props.at("district").get<std::string>();
            record.emissions.kiln_type = record.kiln_type;
            record.emissions.daily_kg.pm10 = props.value("pm10_kg_day", 0.0);
            record.emissions.daily_kg.pm25 = props.value("pm25_kg_day", 0.0);
            record.emissions.daily_kg.sox = props.value("sox_kg_day", 0.0);
            record.emissions.daily_kg.nox = props.value("nox_kg_day", 0.0);
            record.emissions.seasonal_kg.pm10 = props.value("pm10_kg_yr", 0.0);
            record.emissions.seasonal_kg.pm25 = props.value("pm25_kg_yr", 0.0);
            record.emissions.seasonal_kg.sox = props.value("sox_kg_yr", 0.0);
            record.emissions.seasonal_kg.nox = props.value("nox_kg_yr", 0.0);
            bool has_schools = props.contains("schools_1km") && !props.at("schools_1km").is_null();
            bool has_hospitals =
                props.contains("hospitals_1km") && !props.at("hospitals_1km").is_null();
            bool has_population =
                props.contains("population_1km") && !props.at("population_1km").is_null();
            if (has_schools != has_hospitals || has_schools != has_population)
                throw Error("incomplete exposure attributes");
            if (has_schools) {
                ExposureResult exposure;
                exposure.kiln_id = record.id;
                exposure.schools_1km = props.at("schools_1km").get<int>();
                exposure.hospitals_1km = props.at("hospitals_1km").get<int>();
                exposure.population_1km = props.at("population_1km").get<std::int64_t>();
                record.exposure = exposure;
            }
            dataset.records.push_back(std::move(record));
        } catch (const std::exception& e) {
            throw ParseError("feature " + std::to_string(index) + ": " + e.what());
        }
    }
    validate(dataset);
    return dataset;
}

std::vector<District> load_districts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid boundary GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc.at("features").is_array())
        throw ParseError("expected a GeoJSON FeatureCollection");
    std::vector<District> districts;
    std::size_t index = 0;
    for (const auto& feature : doc.at("features")) {
        ++index;
        try {
            District district;
            const auto& props = feature.at("properties");
            if (props.contains("name"))
                district.name = props.at("name").get<std::string>();
            else if (props.contains("district"))
                district.name = props.at("district").get<std::string>();
            else
                throw Error("missing name property");
            const auto& geometry = feature.at("geometry");
            std::string type = geometry.value("type", "");
            auto read_ring = [](const nlohmann::json& ring) {
                std::vector<std::array<double, 2>> out;
                for (const auto& vertex : ring)
                    out.push_back({vertex.at(0).get<double>(), vertex.at(1).get<double>()});
                if (out.size() < 3) throw Error("ring needs at least 3 vertices");
                return out;
            };
            if (type == "Polygon") {
                for (const auto& ring : geometry.at("coordinates"))
                    district.rings.push_back(read_ring(ring));
            } else if (type == "MultiPolygon") {
                for (const auto& polygon : geometry.at("coordinates"))
                    for (const auto& ring : polygon) district.rings.push_back(read_ring(ring));
            } else {
                throw Error("geometry must be Polygon or MultiPolygon");
            }
            districts.push_back(std::move(district));
        } catch (const std::exception& e) {
            throw ParseError("feature " + std::to_string(index) + ": " + e.what());
        }
    }
    return districts;
}

bool district_contains(const District& district, const GeoPoint& point) {
    bool inside = false;
    for (const auto& ring : district.rings) {
        std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            double xi = ring[i][0], yi = ring[i][1];
            double xj = ring[j][0], yj = ring[j][1];
            if ((yi > point.lat) != (yj > point.lat) &&
                point.lon < (xj - xi) * (point.lat - yi) / (yj - yi) + xi)
                inside = !inside;
        }
    }
    return inside;
}

void assign_districts(KilnDataset& dataset, std::span<const District> districts) {
    for (auto& record : dataset.records) {
        record.district.reset();
        for (const auto& district : districts) {
            if (district_contains(district, record.location)) {
                record.district = district.name;
                break;
            }
        }
    }
}

}  // namespace kiln
