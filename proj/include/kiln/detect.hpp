#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "kiln/geo.hpp"
#include "kiln/raster.hpp"

namespace kiln {

/// Kiln technology type with its wire code.
enum class KilnClass : int { FCBK = 0, ZigZag = 1 };

KilnClass kiln_class_from_code(int code);  // throws Error on unknown codes
const char* kiln_class_name(KilnClass cls);

struct BBox {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
    KilnClass cls = KilnClass::FCBK;
    double confidence = 0.0;

    bool operator==(const BBox&) const = default;
};

void validate(const BBox& box);

struct ImageDetections {
    std::string image_id;
    GeoRef georef;
    std::vector<BBox> boxes;
};

struct KilnPoint {
    GeoPoint location;
    KilnClass cls = KilnClass::FCBK;
    double confidence = 0.0;
    std::string image_id;
};

inline constexpr double kDefaultIouThreshold = 0.7;
inline constexpr int kDefaultMaxDetections = 10;
inline constexpr double kDefaultGroupRadiusM = 335.0;
inline constexpr double kCrossImageDedupRadiusM = 12.0;

/// North-up local linearization of the Web-Mercator static-map projection:
/// dlon_per_px = 360 / (256 * 2^zoom * scale), dlat scaled by cos(lat).
GeoRef static_map_georef(const GeoPoint& center, int zoom, int scale, int size_px);

/// Intersection over union of two axis-aligned boxes.
double iou(const BBox& a, const BBox& b);

/// Greedy class-aware non-maximum suppression: boxes ranked by descending
/// confidence (ties by lower x_min, then y_min), same-class boxes with
/// iou > threshold suppressed, output truncated to max_det in kept order.
std::vector<BBox> nms(std::vector<BBox> boxes, double iou_threshold = kDefaultIouThreshold,
                      int max_det = kDefaultMaxDetections);

/// Maps the box center through the image georef.
KilnPoint bbox_to_geo(const GeoRef& georef, const BBox& box, const std::string& image_id);

struct CandidateGroup {
    std::vector<std::size_t> members;  // indices into the input points
    GeoPoint seed;                     // first member, fixed at founding
    GeoPoint fetch_center;             // centroid of all members
};

/// Greedy single-pass grouping: each point joins the first group whose seed
/// lies within group_radius_m, otherwise founds a new group.
std::vector<CandidateGroup> group_candidates(std::span<const GeoPoint> points,
                                             double group_radius_m = kDefaultGroupRadiusM);

/// 12 m radius dedup across images; priority is descending confidence, then
/// ascending image_id, then input order. Survivors keep that order.
std::vector<KilnPoint> cross_image_dedup(const std::vector<KilnPoint>& points);

/// JSON-lines reader: one object per line with image_id, center_lat,
/// center_lon, zoom, scale, size_px, boxes. Boxes are clamped to the image;
/// malformed lines raise ParseError with their 1-based line number.
std::vector<ImageDetections> load_detections(const std::filesystem::path& path);

/// CSV with header class,lat,lon,confidence,image_id.
void save_kiln_points(const std::vector<KilnPoint>& points,
                      const std::filesystem::path& path);
std::vector<KilnPoint> load_kiln_points(const std::filesystem::path& path);

}  // namespace kiln
