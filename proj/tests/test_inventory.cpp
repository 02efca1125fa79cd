#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kiln/error.hpp"
#include "kiln/inventory.hpp"

using namespace kiln;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("kiln_inventory_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

KilnRecord make_record(int id, int type, double lat, double lon) {
    KilnRecord record;
    record.id = id;
    record.kiln_type = type;
    record.location = GeoPoint(lat, lon);
    record.emissions = emission_profile_for_kiln(type, ProductionParams{}, EmissionFactors{},
                                                 EmissionMode::ReproducePaper);
    return record;
}

}  // namespace

TEST_CASE("minimal CSV writes the exact three-column form") {
    auto dir = fresh_dir("minimal");
    KilnDataset dataset;
    dataset.records.push_back(make_record(1, 0, 31.5, 74.3));
    write_minimal_csv(dataset, dir / "kilns.csv");
    CHECK(slurp(dir / "kilns.csv") == "kiln_type,lat,lon\n0,31.500000,74.300000\n");
}

TEST_CASE("minimal CSV round trips coordinates to 6 decimals") {
    auto dir = fresh_dir("roundtrip");
    std::mt19937_64 rng(61);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    KilnDataset dataset;
    for (int i = 0; i < 100; ++i)
        dataset.records.push_back(make_record(i + 1, static_cast<int>(rng() % 2),
                                              unit() * 180.0 - 90.0, unit() * 360.0 - 180.0));
    write_minimal_csv(dataset, dir / "kilns.csv");
    KilnDataset back = read_minimal_csv(dir / "kilns.csv");
    REQUIRE(back.records.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(back.records[i].id == static_cast<int>(i) + 1);
        CHECK(back.records[i].kiln_type == dataset.records[i].kiln_type);
        CHECK(std::abs(back.records[i].location.lat - dataset.records[i].location.lat) <=
              5.1e-7);
        CHECK(std::abs(back.records[i].location.lon - dataset.records[i].location.lon) <=
              5.1e-7);
    }
}

TEST_CASE("minimal CSV reads with or without the header") {
    auto dir = fresh_dir("headerless");
    std::ofstream(dir / "bare.csv") << "0,31.500000,74.300000\n1,31.600000,74.400000\n";
    KilnDataset dataset = read_minimal_csv(dir / "bare.csv");
    REQUIRE(dataset.records.size() == 2);
    CHECK(dataset.records[0].kiln_type == 0);
    CHECK(dataset.records[1].kiln_type == 1);
    CHECK(dataset.records[1].id == 2);
}

TEST_CASE("minimal CSV rejects bad rows with line numbers") {
    auto dir = fresh_dir("badrows");
    std::ofstream(dir / "type.csv") << "kiln_type,lat,lon\n2,31,74\n";
    CHECK_THROWS_WITH_AS(read_minimal_csv(dir / "type.csv"), doctest::Contains("(line 2)"),
                         ParseError);

    std::ofstream(dir / "range.csv") << "kiln_type,lat,lon\n0,31,74\n0,99.0,74.0\n";
    CHECK_THROWS_WITH_AS(read_minimal_csv(dir / "range.csv"), doctest::Contains("(line 3)"),
                         ParseError);

    std::ofstream(dir / "fields.csv") << "0,31.0\n";
    CHECK_THROWS_AS(read_minimal_csv(dir / "fields.csv"), ParseError);

    std::ofstream(dir / "garbage.csv") << "0,north,74.0\n";
    CHECK_THROWS_AS(read_minimal_csv(dir / "garbage.csv"), ParseError);

    CHECK_THROWS_AS(read_minimal_csv(dir / "absent.csv"), Error);
}

TEST_CASE("dataset validation guards ids, types, and crs") {
    auto dir = fresh_dir("validate");
    KilnDataset dataset;
    dataset.records.push_back(make_record(1, 0, 31.5, 74.3));
    dataset.records.push_back(make_record(1, 1, 31.6, 74.4));
    CHECK_THROWS_WITH_AS(write_minimal_csv(dataset, dir / "dup.csv"),
                         doctest::Contains("duplicate"), Error);

    dataset.records[1].id = 2;
    dataset.records[1].kiln_type = 3;
    CHECK_THROWS_AS(write_minimal_csv(dataset, dir / "type.csv"), Error);

    dataset.records[1].kiln_type = 1;
    dataset.crs = "EPSG:3857";
    CHECK_THROWS_AS(write_minimal_csv(dataset, dir / "crs.csv"), Error);
}

TEST_CASE("extended CSV carries the full attribute set") {
    auto dir = fresh_dir("extended");
    KilnDataset dataset;
    KilnRecord full = make_record(2, 1, 31.6, 74.4);
    full.district = "Lahore";
    ExposureResult exposure;
    exposure.kiln_id = 2;
    exposure.schools_1km = 3;
    exposure.hospitals_1km = 1;
    exposure.population_1km = 5400;
    full.exposure = exposure;
    dataset.records.push_back(full);
    dataset.records.push_back(make_record(1, 0, 31.5, 74.3));

    write_extended_csv(dataset, dir / "kilns.csv");
    std::string text = slurp(dir / "kilns.csv");
    std::istringstream lines(text);
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK(header ==
          "id,kiln_type,lat,lon,district,pm10_kg_day,pm25_kg_day,sox_kg_day,nox_kg_day,"
          "pm10_kg_yr,pm25_kg_yr,sox_kg_yr,nox_kg_yr,schools_1km,hospitals_1km,population_1km");
    CHECK(row1.substr(0, 2) == "1,");
    CHECK(row2.substr(0, 2) == "2,");
    CHECK(row1.find(",351.178800,") != std::string::npos);
    CHECK(row1.find("Lahore") == std::string::npos);
    CHECK(row1.substr(row1.size() - 3) == ",,,");
    CHECK(row2.find(",Lahore,") != std::string::npos);
    CHECK(row2.substr(row2.size() - 9) == ",3,1,5400");

    write_extended_csv(dataset, dir / "again.csv");
    CHECK(slurp(dir / "again.csv") == text);
}

TEST_CASE("GeoJSON writes lon-first point features") {
    auto dir = fresh_dir("geojson");
    KilnDataset dataset;
    dataset.records.push_back(make_record(1, 0, 31.5, 74.3));
    write_geojson(dataset, dir / "kilns.geojson");
    auto doc = nlohmann::json::parse(slurp(dir / "kilns.geojson"));
    CHECK(doc.at("type") == "FeatureCollection");
    REQUIRE(doc.at("features").size() == 1);
    const auto& feature = doc.at("features").at(0);
    CHECK(feature.at("geometry").at("type") == "Point");
    CHECK(feature.at("geometry").at("coordinates").at(0).get<double>() == 74.3);
    CHECK(feature.at("geometry").at("coordinates").at(1).get<double>() == 31.5);
    CHECK(feature.at("properties").at("id") == 1);
}

TEST_CASE("empty dataset becomes an empty FeatureCollection") {
    auto dir = fresh_dir("emptyjson");
    KilnDataset dataset;
    dataset.provenance = "unit";
    write_geojson(dataset, dir / "empty.geojson");
    auto doc = nlohmann::json::parse(slurp(dir / "empty.geojson"));
    CHECK(doc.at("features").is_array());
    CHECK(doc.at("features").empty());
    KilnDataset back = read_geojson(dir / "empty.geojson");
    CHECK(back.records.empty());
    CHECK(back.crs == "WGS84");
    CHECK(back.provenance == "unit");
}

TEST_CASE("GeoJSON round trips a mixed dataset to 6 decimals") {
    auto dir = fresh_dir("mixed");
    KilnDataset dataset;
    dataset.provenance = "run-42";
    KilnRecord full = make_record(1, 1, 31.123456789, 74.987654321);
    full.district = "Kasur";
    ExposureResult exposure;
    exposure.kiln_id = 1;
    exposure.schools_1km = 2;
    exposure.hospitals_1km = 0;
    exposure.population_1km = 980;
    full.exposure = exposure;
    dataset.records.push_back(full);
    dataset.records.push_back(make_record(2, 0, -31.5, -74.3));

    write_geojson(dataset, dir / "kilns.geojson");
    KilnDataset back = read_geojson(dir / "kilns.geojson");
    REQUIRE(back.records.size() == 2);
    CHECK(back.crs == "WGS84");
    CHECK(back.provenance == "run-42");
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = dataset.records[i];
        const auto& b = back.records[i];
        CHECK(a.id == b.id);
        CHECK(a.kiln_type == b.kiln_type);
        CHECK(std::abs(a.location.lat - b.location.lat) <= 5.1e-7);
        CHECK(std::abs(a.location.lon - b.location.lon) <= 5.1e-7);
        CHECK(a.district == b.district);
        CHECK(a.exposure.has_value() == b.exposure.has_value());
        CHECK(std::abs(a.emissions.daily_kg.pm10 - b.emissions.daily_kg.pm10) <= 5.1e-7);
        CHECK(std::abs(a.emissions.seasonal_kg.nox - b.emissions.seasonal_kg.nox) <= 5.1e-7);
    }
    CHECK(back.records[0].exposure->schools_1km == 2);
    CHECK(back.records[0].exposure->population_1km == 980);

    write_geojson(dataset, dir / "again.geojson");
    CHECK(slurp(dir / "again.geojson") == slurp(dir / "kilns.geojson"));
}

TEST_CASE("minimal CSV and GeoJSON agree on the core triples") {
    auto dir = fresh_dir("agree");
    std::mt19937_64 rng(67);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    KilnDataset dataset;
    for (int i = 0; i < 25; ++i)
        dataset.records.push_back(make_record(i + 1, static_cast<int>(rng() % 2),
                                              31.0 + unit(), 74.0 + unit()));
    write_minimal_csv(dataset, dir / "kilns.csv");
    write_geojson(dataset, dir / "kilns.geojson");
    KilnDataset from_csv = read_minimal_csv(dir / "kilns.csv");
    KilnDataset from_geojson = read_geojson(dir / "kilns.geojson");
    REQUIRE(from_csv.records.size() == from_geojson.records.size());
    for (std::size_t i = 0; i < from_csv.records.size(); ++i) {
        CHECK(from_csv.records[i].kiln_type == from_geojson.records[i].kiln_type);
        CHECK(from_csv.records[i].location.lat ==
              doctest::Approx(from_geojson.records[i].location.lat).epsilon(1e-12));
        CHECK(from_csv.records[i].location.lon ==
              doctest::Approx(from_geojson.records[i].location.lon).epsilon(1e-12));
    }
}

TEST_CASE("read_geojson rejects malformed documents") {
    auto dir = fresh_dir("badjson");
    std::ofstream(dir / "garbage.geojson") << "not json";
    CHECK_THROWS_AS(read_geojson(dir / "garbage.geojson"), ParseError);

    std::ofstream(dir / "line.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {"id": 1, "kiln_type": 0},
             "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 1]]}}
        ]
    })";
    CHECK_THROWS_WITH_AS(read_geojson(dir / "line.geojson"),
                         doctest::Contains("not a Point"), ParseError);

    std::ofstream(dir / "noid.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {"kiln_type": 0},
             "geometry": {"type": "Point", "coordinates": [74.3, 31.5]}}
        ]
    })";
    CHECK_THROWS_AS(read_geojson(dir / "noid.geojson"), ParseError);

    std::ofstream(dir / "partial.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {"id": 1, "kiln_type": 0, "schools_1km": 2},
             "geometry": {"type": "Point", "coordinates": [74.3, 31.5]}}
        ]
    })";
    CHECK_THROWS_WITH_AS(read_geojson(dir / "partial.geojson"),
                         doctest::Contains("incomplete exposure"), ParseError);

    CHECK_THROWS_AS(read_geojson(dir / "absent.geojson"), Error);
}

TEST_CASE("district assignment tags points inside boundaries") {
    auto dir = fresh_dir("districts");
    std::ofstream(dir / "districts.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {"name": "Alpha"},
             "geometry": {"type": "Polygon", "coordinates": [
                 [[74.0, 31.0], [75.0, 31.0], [75.0, 32.0], [74.0, 32.0], [74.0, 31.0]],
                 [[74.4, 31.4], [74.6, 31.4], [74.6, 31.6], [74.4, 31.6], [74.4, 31.4]]
             ]}},
            {"type": "Feature",
             "properties": {"district": "Beta"},
             "geometry": {"type": "MultiPolygon", "coordinates": [
                 [[[76.0, 31.0], [77.0, 31.0], [77.0, 32.0], [76.0, 32.0], [76.0, 31.0]]]
             ]}}
        ]
    })";
    auto districts = load_districts(dir / "districts.geojson");
    REQUIRE(districts.size() == 2);
    CHECK(districts[0].name == "Alpha");
    CHECK(districts[1].name == "Beta");
    CHECK(district_contains(districts[0], GeoPoint(31.2, 74.2)));
    CHECK_FALSE(district_contains(districts[0], GeoPoint(31.5, 74.5)));
    CHECK(district_contains(districts[1], GeoPoint(31.5, 76.5)));

    KilnDataset dataset;
    dataset.records.push_back(make_record(1, 0, 31.2, 74.2));
    dataset.records.push_back(make_record(2, 0, 31.5, 74.5));
    dataset.records.push_back(make_record(3, 1, 31.5, 76.5));
    dataset.records.push_back(make_record(4, 1, 10.0, 10.0));
    assign_districts(dataset, districts);
    CHECK(dataset.records[0].district == "Alpha");
    CHECK_FALSE(dataset.records[1].district.has_value());
    CHECK(dataset.records[2].district == "Beta");
    CHECK_FALSE(dataset.records[3].district.has_value());
}

TEST_CASE("boundary files with bad features are rejected") {
    auto dir = fresh_dir("badboundary");
    std::ofstream(dir / "noname.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {},
             "geometry": {"type": "Polygon", "coordinates": [
                 [[74.0, 31.0], [75.0, 31.0], [75.0, 32.0], [74.0, 31.0]]
             ]}}
        ]
    })";
    CHECK_THROWS_WITH_AS(load_districts(dir / "noname.geojson"),
                         doctest::Contains("missing name"), ParseError);

    std::ofstream(dir / "line.geojson") << R"({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "properties": {"name": "Alpha"},
             "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 1]]}}
        ]
    })";
    CHECK_THROWS_AS(load_districts(dir / "line.geojson"), ParseError);
    CHECK_THROWS_AS(load_districts(dir / "absent.geojson"), Error);
}
