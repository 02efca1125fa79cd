#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kiln/geo.hpp"
#include "kiln/raster.hpp"

namespace kiln {

/// Row-major boolean raster sharing a raster tile's georeference.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1
    GeoRef georef;
    std::string tile_id;

    BinaryMask() = default;
    BinaryMask(const GeoRef& g, std::string id);

    bool at(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool v = true) {
        bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
    }
};

/// Throws Error when dimensions are non-positive, disagree with the georef,
/// or the bit buffer has the wrong size.
void validate(const BinaryMask& mask);

/// 8-connected blob of set pixels.
struct PixelCluster {
    std::vector<std::pair<int, int>> members;  // (x, y)
    double centroid_x = 0.0;
    double centroid_y = 0.0;

    std::size_t size() const { return members.size(); }
};

struct CandidatePoint {
    GeoPoint location;
    std::string source_tile;
    std::size_t cluster_size = 0;
};

/// Clears every set pixel with no set pixel among its 8 neighbors.
BinaryMask remove_isolated(const BinaryMask& mask);

/// Dilation then erosion with a (2*se_radius+1)^2 square element. Dilation
/// treats out-of-bounds as unset and erosion treats it as set, which keeps
/// closing extensive and idempotent up to the border.
BinaryMask morphological_close(const BinaryMask& mask, int se_radius = 1);

/// 8-connected components ordered by topmost then leftmost member.
std::vector<PixelCluster> connected_components(const BinaryMask& mask);

std::vector<CandidatePoint> clusters_to_candidates(const std::vector<PixelCluster>& clusters,
                                                   const GeoRef& georef,
                                                   const std::string& tile_id);

/// Keeps the `limit` candidates with the largest clusters (ties favor
/// earlier candidates); relative order of survivors is unchanged.
std::vector<CandidatePoint> cap_per_tile(std::vector<CandidatePoint> candidates,
                                         std::size_t limit = 15);

/// Full per-tile chain: remove_isolated, closing, components, geolocation,
/// radius dedup favoring larger clusters, then the per-tile cap.
std::vector<CandidatePoint> postprocess_tile(const BinaryMask& mask, int se_radius = 1,
                                             double dedup_radius_m = 20.0,
                                             std::size_t cap = 15);

}  // namespace kiln
