#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kiln/geo.hpp"

namespace kiln {

/// Linear georeference anchored at the image center. Row index grows
/// southward in north-up imagery, so dlat_per_px is negative there.
struct GeoRef {
    double lat_center = 0.0;
    double lon_center = 0.0;
    int width_px = 0;
    int height_px = 0;
    double dlat_per_px = 0.0;
    double dlon_per_px = 0.0;

    bool operator==(const GeoRef&) const = default;
};

/// Throws Error unless dimensions are positive and both deltas nonzero.
void validate(const GeoRef& georef);

/// Geographic location of a (possibly fractional) pixel coordinate.
/// `extrapolated` marks pixels outside [0, width) x [0, height).
struct GeoSample {
    GeoPoint point;
    bool extrapolated = false;
};

/// Degrees per pixel from two reference points spanning `pixel_span` pixels.
/// Signs follow the coordinate differences. Throws Error when pixel_span is
/// not positive or the reference points coincide.
std::pair<double, double> compute_per_pixel_deltas(const GeoPoint& a, const GeoPoint& b,
                                                   double pixel_span);

GeoSample pixel_to_geo(const GeoRef& georef, double cx, double cy);

/// Exact inverse of pixel_to_geo; returns fractional (cx, cy).
std::pair<double, double> geo_to_pixel(const GeoRef& georef, const GeoPoint& p);

/// 8-bit RGB raster with georeference and a stable identifier.
struct RasterTile {
    GeoRef georef;
    std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
    std::string tile_id;

    const std::uint8_t* rgb(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * georef.width_px + x);
    }
    std::uint8_t* rgb(int x, int y) {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * georef.width_px + x);
    }
};

struct TileRef {
    std::string tile_id;  // "r{row}_c{col}"
    GeoRef georef;
};

/// Ceil-covering rectangular grid of square tiles over a bounding box.
/// Tile rows count from the north edge, columns from the west edge.
struct AoiGrid {
    double south = 0.0, west = 0.0, north = 0.0, east = 0.0;
    double tile_size_km = 0.0;
    int n_rows = 0;
    int n_cols = 0;
    double dlat_step = 0.0;  // positive degrees per tile row
    double dlon_step = 0.0;  // positive degrees per tile column
    std::vector<TileRef> tiles;  // row-major, row 0 at the north edge

    /// Index into `tiles` of the unique tile containing p, or nullopt when
    /// p lies outside the grid.
    std::optional<std::size_t> locate(const GeoPoint& p) const;
};

/// Tiles the AOI into tile_size_km squares. Degree extents use the sphere's
/// meters-per-degree at the AOI center latitude, so the grid is rectangular
/// in the equirectangular projection that defines it. Each tile's raster is
/// tile_size_km * px_per_km pixels on a side.
AoiGrid tile_aoi(double south, double west, double north, double east,
                 double tile_size_km, int px_per_km = 100);

/// Reads a P6 PPM or PNG raster plus its `<stem>.georef.json` sidecar.
/// Throws Error when the file or sidecar is missing, ParseError on malformed
/// content, dimension mismatches, or unsupported bit depths.
RasterTile load_tile(const std::filesystem::path& raster_path);

/// Writes the raster (format chosen by extension: .ppm or .png) and its
/// sidecar. Lossless round trip with load_tile.
void store_tile(const RasterTile& tile, const std::filesystem::path& raster_path);

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);

}  // namespace kiln
