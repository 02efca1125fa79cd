#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace kiln {

// Mean Earth radius; all radius-based operations in this project are
// great-circle distances on this sphere.
inline constexpr double kEarthRadiusMeters = 6'371'000.0;

inline constexpr double kMetersPerDegreeLat = 111'194.92664455873;  // pi*R/180

/// WGS84 decimal-degree coordinate.
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    GeoPoint() = default;
    GeoPoint(double lat_deg, double lon_deg);  // throws Error outside WGS84 range

    bool operator==(const GeoPoint&) const = default;
};

bool is_valid(const GeoPoint& p);

/// Great-circle distance in meters (haversine on the mean-radius sphere).
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

/// Uniform-cell hash grid over a local equirectangular projection around an
/// anchor point. Read-only after build; point ids are insertion order.
///
/// The longitude scale is taken at a latitude 3 degrees poleward of the
/// anchor, which keeps projected x displacements <= true distance for any
/// pair of points within that band. AOIs spanning more than a few degrees
/// of latitude are outside this module's remit.
class SpatialGridIndex {
public:
    SpatialGridIndex() = default;

    double cell_size() const { return cell_size_; }
    const GeoPoint& anchor() const { return anchor_; }
    std::size_t size() const { return points_.size(); }
    std::size_t bucket_count() const { return buckets_.size(); }
    const std::vector<GeoPoint>& points() const { return points_; }

private:
    friend SpatialGridIndex build_index(std::span<const GeoPoint>, double);
    friend std::vector<std::size_t> points_within_radius(const SpatialGridIndex&,
                                                         const GeoPoint&, double);

    std::pair<std::int32_t, std::int32_t> cell_of(const GeoPoint& p) const;

    double cell_size_ = 0.0;
    GeoPoint anchor_;
    double lon_scale_ = 1.0;  // meters per degree of longitude in the projection
    std::vector<GeoPoint> points_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

/// Builds the grid over `points`; empty input yields an empty index.
SpatialGridIndex build_index(std::span<const GeoPoint> points, double cell_size_m);

/// Ids of all indexed points within `radius_m` of `center`, ascending.
/// For radius_m <= cell_size at most 9 buckets are inspected.
std::vector<std::size_t> points_within_radius(const SpatialGridIndex& index,
                                              const GeoPoint& center, double radius_m);

/// Greedy keep-first sweep: a point survives iff it is more than `radius_m`
/// from every previously kept point. Input order is the priority order and
/// is preserved in the output. Returns indices into `points`.
std::vector<std::size_t> dedup_radius_indices(std::span<const GeoPoint> points,
                                              double radius_m);

std::vector<GeoPoint> dedup_radius(std::span<const GeoPoint> points, double radius_m);

namespace detail {

/// Incrementally grown hash grid used by the greedy sweeps (dedup, candidate
/// grouping). Same projection rules as SpatialGridIndex.
class MutableGrid {
public:
    explicit MutableGrid(double cell_size_m);

    void insert(const GeoPoint& p, std::size_t id);
    /// Ids in the cells overlapping the radius around p (superset of true
    /// matches; caller filters by haversine), ascending.
    std::vector<std::size_t> candidates_near(const GeoPoint& p, double radius_m) const;

private:
    std::pair<std::int32_t, std::int32_t> cell_of(const GeoPoint& p) const;

    double cell_size_;
    bool have_anchor_ = false;
    GeoPoint anchor_;
    double lon_scale_ = 1.0;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace detail
}  // namespace kiln
