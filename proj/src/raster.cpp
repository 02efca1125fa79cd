#include "kiln/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "kiln/error.hpp"

namespace kiln {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// Skips PPM whitespace and '#' comment lines, then reads one unsigned int.
unsigned read_ppm_uint(std::istream& in, const std::filesystem::path& path) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c))
        throw ParseError("malformed PPM header in " + path.string());
    unsigned value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + static_cast<unsigned>(c - '0');
        c = in.get();
    }
    if (c != EOF) in.unget();
    return value;
}

std::pair<std::vector<std::uint8_t>, std::pair<int, int>> read_ppm(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open raster " + path.string());
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6')
        throw ParseError("not a P6 PPM: " + path.string());
    unsigned width = read_ppm_uint(in, path);
    unsigned height = read_ppm_uint(in, path);
    unsigned maxval = read_ppm_uint(in, path);
    if (maxval != 255)
        throw ParseError("unsupported bit depth (maxval " + std::to_string(maxval) +
                         ") in " + path.string());
    if (width == 0 || height == 0)
        throw ParseError("zero raster dimension in " + path.string());
    in.get();  // single whitespace byte after the header
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height * 3);
    in.read(reinterpret_cast<char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(pixels.size()))
        throw ParseError("truncated pixel data in " + path.string());
    return {std::move(pixels), {static_cast<int>(width), static_cast<int>(height)}};
}

void write_ppm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
               int width, int height) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write raster " + path.string());
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error("short write to " + path.string());
}

std::pair<std::vector<std::uint8_t>, std::pair<int, int>> read_png(
    const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw ParseError("cannot read PNG " + path.string() + ": " + image.message);
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw ParseError("unsupported bit depth (16-bit channels) in " + path.string());
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ParseError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return {std::move(pixels),
            {static_cast<int>(image.width), static_cast<int>(image.height)}};
}

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
               int width, int height) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0,
                                 nullptr))
        throw Error("cannot write PNG " + path.string() + ": " + image.message);
}

GeoRef sidecar_to_georef(const nlohmann::json& doc, const std::filesystem::path& path) {
    GeoRef g;
    try {
        g.lat_center = doc.at("lat_center").get<double>();
        g.lon_center = doc.at("lon_center").get<double>();
        g.width_px = doc.at("width_px").get<int>();
        g.height_px = doc.at("height_px").get<int>();
        g.dlat_per_px = doc.at("dlat_per_px").get<double>();
        g.dlon_per_px = doc.at("dlon_per_px").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad sidecar " + path.string() + ": " + e.what());
    }
    return g;
}

}  // namespace

void validate(const GeoRef& georef) {
    if (georef.width_px <= 0 || georef.height_px <= 0)
        throw Error("georef dimensions must be positive, got " +
                    std::to_string(georef.width_px) + "x" +
                    std::to_string(georef.height_px));
    if (georef.dlat_per_px == 0.0 || georef.dlon_per_px == 0.0)
        throw Error("georef per-pixel deltas must be nonzero");
}

std::pair<double, double> compute_per_pixel_deltas(const GeoPoint& a, const GeoPoint& b,
                                                   double pixel_span) {
    if (pixel_span <= 0.0)
        throw Error("pixel span must be positive, got " + std::to_string(pixel_span));
    if (a.lat == b.lat && a.lon == b.lon)
        throw Error("reference points coincide; per-pixel deltas undefined");
    return {(b.lat - a.lat) / pixel_span, (b.lon - a.lon) / pixel_span};
}

GeoSample pixel_to_geo(const GeoRef& georef, double cx, double cy) {
    GeoSample s;
    s.point.lat = georef.lat_center + (cy - georef.height_px / 2.0) * georef.dlat_per_px;
    s.point.lon = georef.lon_center + (cx - georef.width_px / 2.0) * georef.dlon_per_px;
    s.extrapolated = cx < 0.0 || cx >= georef.width_px || cy < 0.0 || cy >= georef.height_px;
    return s;
}

std::pair<double, double> geo_to_pixel(const GeoRef& georef, const GeoPoint& p) {
    validate(georef);
    double cx = (p.lon - georef.lon_center) / georef.dlon_per_px + georef.width_px / 2.0;
    double cy = (p.lat - georef.lat_center) / georef.dlat_per_px + georef.height_px / 2.0;
    return {cx, cy};
}

std::optional<std::size_t> AoiGrid::locate(const GeoPoint& p) const {
    if (tiles.empty()) return std::nullopt;
    double grid_south = north - n_rows * dlat_step;
    double grid_east = west + n_cols * dlon_step;
    if (p.lat > north || p.lat < grid_south || p.lon < west || p.lon > grid_east)
        return std::nullopt;
    auto row = static_cast<int>(std::floor((north - p.lat) / dlat_step));
    auto col = static_cast<int>(std::floor((p.lon - west) / dlon_step));
    row = std::clamp(row, 0, n_rows - 1);
    col = std::clamp(col, 0, n_cols - 1);
    return static_cast<std::size_t>(row) * n_cols + col;
}

AoiGrid tile_aoi(double south, double west, double north, double east,
                 double tile_size_km, int px_per_km) {
    if (north <= south || east <= west)
        throw Error("inverted bounding box: south=" + std::to_string(south) +
                    " west=" + std::to_string(west) + " north=" + std::to_string(north) +
                    " east=" + std::to_string(east));
    if (tile_size_km <= 0.0)
        throw Error("tile size must be positive, got " + std::to_string(tile_size_km));
    if (px_per_km <= 0) throw Error("px_per_km must be positive");
    double mid_lat = 0.5 * (north + south);
    if (std::abs(mid_lat) > 89.0)
        throw Error("AOI too close to a pole for an equirectangular tile grid");

    AoiGrid grid;
    grid.south = south;
    grid.west = west;
    grid.north = north;
    grid.east = east;
    grid.tile_size_km = tile_size_km;
    grid.dlat_step = tile_size_km * 1000.0 / kMetersPerDegreeLat;
    grid.dlon_step =
        tile_size_km * 1000.0 / (kMetersPerDegreeLat * std::cos(mid_lat * kDegToRad));
    // The guard keeps an AOI sized as an exact tile multiple from picking up
    // a spurious extra row or column through floating-point noise.
    auto tile_count = [](double span, double step) {
        return std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
    };
    grid.n_rows = tile_count(north - south, grid.dlat_step);
    grid.n_cols = tile_count(east - west, grid.dlon_step);

    int side_px = std::max(1, static_cast<int>(std::lround(tile_size_km * px_per_km)));
    grid.tiles.reserve(static_cast<std::size_t>(grid.n_rows) * grid.n_cols);
    for (int r = 0; r < grid.n_rows; ++r) {
        for (int c = 0; c < grid.n_cols; ++c) {
            GeoRef g;
            g.lat_center = north - (r + 0.5) * grid.dlat_step;
            g.lon_center = west + (c + 0.5) * grid.dlon_step;
            g.width_px = side_px;
            g.height_px = side_px;
            g.dlat_per_px = -grid.dlat_step / side_px;
            g.dlon_per_px = grid.dlon_step / side_px;
            grid.tiles.push_back(
                {"r" + std::to_string(r) + "_c" + std::to_string(c), g});
        }
    }
    return grid;
}

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path) {
    std::filesystem::path p = raster_path;
    p.replace_extension(".georef.json");
    return p;
}

RasterTile load_tile(const std::filesystem::path& raster_path) {
    std::string ext = lower_extension(raster_path);
    std::pair<std::vector<std::uint8_t>, std::pair<int, int>> raster;
    if (ext == ".ppm") {
        raster = read_ppm(raster_path);
    } else if (ext == ".png") {
        if (!std::filesystem::exists(raster_path))
            throw Error("cannot open raster " + raster_path.string());
        raster = read_png(raster_path);
    } else {
        throw Error("unsupported raster format '" + ext + "' for " +
                    raster_path.string());
    }

    std::filesystem::path side = sidecar_path(raster_path);
    std::ifstream in(side);
    if (!in) throw Error("missing georef sidecar " + side.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad sidecar " + side.string() + ": " + e.what());
    }

    RasterTile tile;
    tile.georef = sidecar_to_georef(doc, side);
    tile.tile_id = doc.value("tile_id", raster_path.stem().string());
    validate(tile.georef);
    auto [width, height] = raster.second;
    if (width != tile.georef.width_px || height != tile.georef.height_px)
        throw ParseError("sidecar dimensions " + std::to_string(tile.georef.width_px) +
                         "x" + std::to_string(tile.georef.height_px) +
                         " do not match raster " + std::to_string(width) + "x" +
                         std::to_string(height) + " for " + raster_path.string());
    tile.pixels = std::move(raster.first);
    return tile;
}

void store_tile(const RasterTile& tile, const std::filesystem::path& raster_path) {
    validate(tile.georef);
    std::size_t expected = static_cast<std::size_t>(tile.georef.width_px) *
                           tile.georef.height_px * 3;
    if (tile.pixels.size() != expected)
        throw Error("pixel buffer size " + std::to_string(tile.pixels.size()) +
                    " does not match georef dimensions for " + raster_path.string());

    std::string ext = lower_extension(raster_path);
    if (ext == ".ppm")
        write_ppm(raster_path, tile.pixels, tile.georef.width_px, tile.georef.height_px);
    else if (ext == ".png")
        write_png(raster_path, tile.pixels, tile.georef.width_px, tile.georef.height_px);
    else
        throw Error("unsupported raster format '" + ext + "' for " +
                    raster_path.string());

    nlohmann::ordered_json doc;
    doc["lat_center"] = tile.georef.lat_center;
    doc["lon_center"] = tile.georef.lon_center;
    doc["width_px"] = tile.georef.width_px;
    doc["height_px"] = tile.georef.height_px;
    doc["dlat_per_px"] = tile.georef.dlat_per_px;
    doc["dlon_per_px"] = tile.georef.dlon_per_px;
    doc["tile_id"] = tile.tile_id;
    std::ofstream out(sidecar_path(raster_path), std::ios::trunc);
    if (!out) throw Error("cannot write sidecar for " + raster_path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace kiln
