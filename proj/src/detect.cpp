#include "kiln/detect.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "kiln/error.hpp"

namespace kiln {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kWebMercatorLatLimit = 85.05;

BBox box_from_json(const nlohmann::json& jb, int size_px) {
    BBox box;
    box.x_min = jb.at("x_min").get<double>();
    box.y_min = jb.at("y_min").get<double>();
    box.x_max = jb.at("x_max").get<double>();
    box.y_max = jb.at("y_max").get<double>();
    box.cls = kiln_class_from_code(jb.at("class").get<int>());
    box.confidence = jb.at("confidence").get<double>();
    validate(box);
    box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(size_px));
    box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(size_px));
    box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(size_px));
    box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(size_px));
    if (box.x_min >= box.x_max || box.y_min >= box.y_max)
        throw Error("box lies entirely outside the image");
    return box;
}

}  // namespace

KilnClass kiln_class_from_code(int code) {
    if (code == 0) return KilnClass::FCBK;
    if (code == 1) return KilnClass::ZigZag;
    throw Error("unknown kiln class code " + std::to_string(code));
}

const char* kiln_class_name(KilnClass cls) {
    return cls == KilnClass::FCBK ? "FCBK" : "ZigZag";
}

void validate(const BBox& box) {
    if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max))
        throw Error("degenerate box [" + std::to_string(box.x_min) + "," +
                    std::to_string(box.y_min) + "," + std::to_string(box.x_max) + "," +
                    std::to_string(box.y_max) + "]");
    if (!(box.confidence >= 0.0 && box.confidence <= 1.0))
        throw Error("confidence " + std::to_string(box.confidence) + " outside [0, 1]");
}

GeoRef static_map_georef(const GeoPoint& center, int zoom, int scale, int size_px) {
    if (zoom < 0 || zoom > 22)
        throw Error("zoom " + std::to_string(zoom) + " outside [0, 22]");
    if (scale != 1 && scale != 2)
        throw Error("scale must be 1 or 2, got " + std::to_string(scale));
    if (size_px <= 0) throw Error("size_px must be positive");
    if (std::abs(center.lat) > kWebMercatorLatLimit)
        throw Error("latitude " + std::to_string(center.lat) +
                    " outside the Web-Mercator domain");
    GeoRef g;
    g.lat_center = center.lat;
    g.lon_center = center.lon;
    g.width_px = size_px;
    g.height_px = size_px;
    g.dlon_per_px = 360.0 / (256.0 * static_cast<double>(1u << zoom) * scale);
    g.dlat_per_px = -g.dlon_per_px * std::cos(center.lat * kDegToRad);
    return g;
}

double iou(const BBox& a, const BBox& b) {
    double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
    double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
    return inter / (area_a + area_b - inter);
}

std::vector<BBox> nms(std::vector<BBox> boxes, double iou_threshold, int max_det) {
    if (max_det < 0) throw Error("max_det must be non-negative");
    for (const auto& box : boxes) validate(box);
    std::stable_sort(boxes.begin(), boxes.end(), [](const BBox& a, const BBox& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.x_min != b.x_min) return a.x_min < b.x_min;
        return a.y_min < b.y_min;
    });
    std::vector<BBox> kept;
    for (const auto& box : boxes) {
        bool suppressed = false;
        for (const auto& survivor : kept) {
            if (survivor.cls == box.cls && iou(survivor, box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(box);
    }
    if (kept.size() > static_cast<std::size_t>(max_det)) kept.resize(max_det);
    return kept;
}

KilnPoint bbox_to_geo(const GeoRef& georef, const BBox& box, const std::string& image_id) {
    validate(box);
    KilnPoint point;
    point.location = pixel_to_geo(georef, (box.x_min + box.x_max) / 2.0,
                                  (box.y_min + box.y_max) / 2.0)
                         .point;
    point.cls = box.cls;
    point.confidence = box.confidence;
    point.image_id = image_id;
    return point;
}

std::vector<CandidateGroup> group_candidates(std::span<const GeoPoint> points,
                                             double group_radius_m) {
    if (group_radius_m <= 0.0)
        throw Error("group radius must be positive, got " + std::to_string(group_radius_m));
    std::vector<CandidateGroup> groups;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool joined = false;
        for (auto& group : groups) {
            if (haversine_distance(group.seed, points[i]) <= group_radius_m) {
                group.members.push_back(i);
                joined = true;
                break;
            }
        }
        if (!joined) {
            CandidateGroup group;
            group.seed = points[i];
            group.members.push_back(i);
            groups.push_back(std::move(group));
        }
    }
    for (auto& group : groups) {
        double lat = 0.0, lon = 0.0;
        for (std::size_t i : group.members) {
            lat += points[i].lat;
            lon += points[i].lon;
        }
        auto n = static_cast<double>(group.members.size());
        group.fetch_center.lat = lat / n;
        group.fetch_center.lon = lon / n;
    }
    return groups;
}

std::vector<KilnPoint> cross_image_dedup(const std::vector<KilnPoint>& points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].confidence != points[b].confidence)
            return points[a].confidence > points[b].confidence;
        return points[a].image_id < points[b].image_id;
    });
    std::vector<GeoPoint> ordered;
    ordered.reserve(points.size());
    for (std::size_t i : order) ordered.push_back(points[i].location);
    std::vector<KilnPoint> kept;
    for (std::size_t k : dedup_radius_indices(ordered, kCrossImageDedupRadiusM))
        kept.push_back(points[order[k]]);
    return kept;
}

std::vector<ImageDetections> load_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open detections " + path.string());
    std::vector<ImageDetections> images;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            nlohmann::json doc = nlohmann::json::parse(line);
            ImageDetections image;
            image.image_id = doc.at("image_id").get<std::string>();
            GeoPoint center(doc.at("center_lat").get<double>(),
                            doc.at("center_lon").get<double>());
            int size_px = doc.at("size_px").get<int>();
            image.georef = static_map_georef(center, doc.at("zoom").get<int>(),
                                             doc.at("scale").get<int>(), size_px);
            for (const auto& jb : doc.at("boxes"))
                image.boxes.push_back(box_from_json(jb, size_px));
            images.push_back(std::move(image));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad detection record in " + path.string() + ": " + e.what(),
                             line_no);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError("bad detection record in " + path.string() + ": " + e.what(),
                             line_no);
        }
    }
    return images;
}

void save_kiln_points(const std::vector<KilnPoint>& points,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write points " + path.string());
    out << "class,lat,lon,confidence,image_id\n";
    char buf[128];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.4f,", static_cast<int>(p.cls),
                      p.location.lat, p.location.lon, p.confidence);
        out << buf << p.image_id << '\n';
    }
    if (!out) throw Error("short write to " + path.string());
}

std::vector<KilnPoint> load_kiln_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open points " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line() || line != "class,lat,lon,confidence,image_id")
        throw ParseError("expected header 'class,lat,lon,confidence,image_id' in " +
                             path.string(),
                         line_no);
    std::vector<KilnPoint> points;
    while (next_line()) {
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        while (true) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (fields.size() != 5)
            throw ParseError("expected 5 fields in " + path.string(), line_no);
        auto parse_double = [&](std::string_view f, const char* what) {
            double v = 0.0;
            auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || end != f.data() + f.size())
                throw ParseError("bad " + std::string(what) + " value '" + std::string(f) +
                                     "' in " + path.string(),
                                 line_no);
            return v;
        };
        try {
            KilnPoint p;
            int code = static_cast<int>(parse_double(fields[0], "class"));
            p.cls = kiln_class_from_code(code);
            p.location = GeoPoint(parse_double(fields[1], "lat"),
                                  parse_double(fields[2], "lon"));
            p.confidence = parse_double(fields[3], "confidence");
            if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
                throw Error("confidence outside [0, 1]");
            p.image_id = std::string(fields[4]);
            points.push_back(std::move(p));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(std::string("bad point row in ") + path.string() + ": " +
                                 e.what(),
                             line_no);
        }
    }
    return points;
}

}  // namespace kiln
