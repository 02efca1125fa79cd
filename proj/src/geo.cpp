#include "kiln/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kiln/error.hpp"

namespace kiln {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::uint64_t cell_key(std::int32_t cx, std::int32_t cy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
           static_cast<std::uint32_t>(cy);
}

// Longitude scale (meters per degree) chosen so projected x displacements
// never exceed the true distance for points within 3 degrees of the anchor
// latitude. cos() shrinks toward the pole, so take it at the poleward edge.
double safe_lon_scale(double anchor_lat) {
    double edge = std::min(89.0, std::abs(anchor_lat) + 3.0);
    return kMetersPerDegreeLat * std::cos(edge * kDegToRad);
}

std::pair<std::int32_t, std::int32_t> project_cell(const GeoPoint& p, const GeoPoint& anchor,
                                                   double lon_scale, double cell_size) {
    double x = (p.lon - anchor.lon) * lon_scale;
    double y = (p.lat - anchor.lat) * kMetersPerDegreeLat;
    return {static_cast<std::int32_t>(std::floor(x / cell_size)),
            static_cast<std::int32_t>(std::floor(y / cell_size))};
}

}  // namespace

GeoPoint::GeoPoint(double lat_deg, double lon_deg) : lat(lat_deg), lon(lon_deg) {
    if (!is_valid(*this))
        throw Error("coordinate out of range: lat=" + std::to_string(lat_deg) +
                    " lon=" + std::to_string(lon_deg));
}

bool is_valid(const GeoPoint& p) {
    return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
    double lat1 = a.lat * kDegToRad;
    double lat2 = b.lat * kDegToRad;
    double dlat = (b.lat - a.lat) * kDegToRad;
    double dlon = (b.lon - a.lon) * kDegToRad;
    double s1 = std::sin(dlat / 2.0);
    double s2 = std::sin(dlon / 2.0);
    double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

std::pair<std::int32_t, std::int32_t> SpatialGridIndex::cell_of(const GeoPoint& p) const {
    return project_cell(p, anchor_, lon_scale_, cell_size_);
}

SpatialGridIndex build_index(std::span<const GeoPoint> points, double cell_size_m) {
    if (cell_size_m <= 0.0)
        throw Error("cell size must be positive, got " + std::to_string(cell_size_m));
    SpatialGridIndex index;
    index.cell_size_ = cell_size_m;
    if (points.empty()) return index;
    index.anchor_ = points[0];
    index.lon_scale_ = safe_lon_scale(index.anchor_.lat);
    index.points_.assign(points.begin(), points.end());
    for (std::size_t i = 0; i < index.points_.size(); ++i) {
        auto [cx, cy] = index.cell_of(index.points_[i]);
        index.buckets_[cell_key(cx, cy)].push_back(i);
    }
    return index;
}

std::vector<std::size_t> points_within_radius(const SpatialGridIndex& index,
                                              const GeoPoint& center, double radius_m) {
    std::vector<std::size_t> out;
    if (index.size() == 0 || radius_m < 0.0) return out;
    auto [ccx, ccy] = index.cell_of(center);
    auto span = static_cast<std::int32_t>(
        std::max<double>(1.0, std::ceil(radius_m / index.cell_size_)));
    for (std::int32_t dx = -span; dx <= span; ++dx) {
        for (std::int32_t dy = -span; dy <= span; ++dy) {
            auto it = index.buckets_.find(cell_key(ccx + dx, ccy + dy));
            if (it == index.buckets_.end()) continue;
            for (std::size_t id : it->second) {
                if (haversine_distance(index.points_[id], center) <= radius_m)
                    out.push_back(id);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> dedup_radius_indices(std::span<const GeoPoint> points,
                                              double radius_m) {
    if (radius_m < 0.0)
        throw Error("dedup radius must be non-negative, got " + std::to_string(radius_m));
    std::vector<std::size_t> kept;
    if (points.empty()) return kept;
    detail::MutableGrid grid(std::max(radius_m, 1.0));
    std::vector<GeoPoint> kept_points;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool suppressed = false;
        for (std::size_t j : grid.candidates_near(points[i], radius_m)) {
            if (haversine_distance(points[i], kept_points[j]) <= radius_m) {
                suppressed = true;
                break;
            }
        }
        if (suppressed) continue;
        grid.insert(points[i], kept_points.size());
        kept_points.push_back(points[i]);
        kept.push_back(i);
    }
    return kept;
}

std::vector<GeoPoint> dedup_radius(std::span<const GeoPoint> points, double radius_m) {
    std::vector<GeoPoint> out;
    for (std::size_t i : dedup_radius_indices(points, radius_m)) out.push_back(points[i]);
    return out;
}

namespace detail {

MutableGrid::MutableGrid(double cell_size_m) : cell_size_(cell_size_m) {
    if (cell_size_m <= 0.0)
        throw Error("cell size must be positive, got " + std::to_string(cell_size_m));
}

std::pair<std::int32_t, std::int32_t> MutableGrid::cell_of(const GeoPoint& p) const {
    return project_cell(p, anchor_, lon_scale_, cell_size_);
}

void MutableGrid::insert(const GeoPoint& p, std::size_t id) {
    if (!have_anchor_) {
        anchor_ = p;
        lon_scale_ = safe_lon_scale(p.lat);
        have_anchor_ = true;
    }
    auto [cx, cy] = cell_of(p);
    buckets_[cell_key(cx, cy)].push_back(id);
}

std::vector<std::size_t> MutableGrid::candidates_near(const GeoPoint& p,
                                                      double radius_m) const {
    std::vector<std::size_t> out;
    if (!have_anchor_ || radius_m < 0.0) return out;
    auto [ccx, ccy] = cell_of(p);
    auto span = static_cast<std::int32_t>(
        std::max<double>(1.0, std::ceil(radius_m / cell_size_)));
    for (std::int32_t dx = -span; dx <= span; ++dx) {
        for (std::int32_t dy = -span; dy <= span; ++dy) {
            auto it = buckets_.find(cell_key(ccx + dx, ccy + dy));
            if (it == buckets_.end()) continue;
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail
}  // namespace kiln
