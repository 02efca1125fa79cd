#include "kiln/mask.hpp"

#include <algorithm>
#include <numeric>

#include "kiln/error.hpp"

namespace kiln {

BinaryMask::BinaryMask(const GeoRef& g, std::string id)
    : width(g.width_px),
      height(g.height_px),
      bits(static_cast<std::size_t>(g.width_px) * g.height_px, 0),
      georef(g),
      tile_id(std::move(id)) {
    kiln::validate(g);
}

void validate(const BinaryMask& mask) {
    if (mask.width <= 0 || mask.height <= 0)
        throw Error("mask dimensions must be positive, got " + std::to_string(mask.width) +
                    "x" + std::to_string(mask.height));
    if (mask.width != mask.georef.width_px || mask.height != mask.georef.height_px)
        throw Error("mask dimensions do not match its georef");
    if (mask.bits.size() != static_cast<std::size_t>(mask.width) * mask.height)
        throw Error("mask bit buffer has the wrong size");
}

BinaryMask remove_isolated(const BinaryMask& mask) {
    validate(mask);
    BinaryMask out = mask;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            bool has_neighbor = false;
            for (int dy = -1; dy <= 1 && !has_neighbor; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height) continue;
                    if (mask.at(nx, ny)) {
                        has_neighbor = true;
                        break;
                    }
                }
            }
            if (!has_neighbor) out.set(x, y, false);
        }
    }
    return out;
}

BinaryMask morphological_close(const BinaryMask& mask, int se_radius) {
    validate(mask);
    if (se_radius < 0) throw Error("structuring element radius must be non-negative");
    if (se_radius == 0) return mask;

    BinaryMask dilated = mask;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool any = false;
            for (int dy = -se_radius; dy <= se_radius && !any; ++dy) {
                int ny = y + dy;
                if (ny < 0 || ny >= mask.height) continue;
                for (int dx = -se_radius; dx <= se_radius; ++dx) {
                    int nx = x + dx;
                    if (nx < 0 || nx >= mask.width) continue;
                    if (mask.at(nx, ny)) {
                        any = true;
                        break;
                    }
                }
            }
            dilated.set(x, y, any);
        }
    }

    BinaryMask closed = dilated;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool all = true;
            for (int dy = -se_radius; dy <= se_radius && all; ++dy) {
                int ny = y + dy;
                if (ny < 0 || ny >= mask.height) continue;
                for (int dx = -se_radius; dx <= se_radius; ++dx) {
                    int nx = x + dx;
                    if (nx < 0 || nx >= mask.width) continue;
                    if (!dilated.at(nx, ny)) {
                        all = false;
                        break;
                    }
                }
            }
            closed.set(x, y, all);
        }
    }
    return closed;
}

std::vector<PixelCluster> connected_components(const BinaryMask& mask) {
    validate(mask);
    std::vector<PixelCluster> clusters;
    std::vector<std::uint8_t> seen(mask.bits.size(), 0);
    std::vector<std::pair<int, int>> queue;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::size_t start = static_cast<std::size_t>(y) * mask.width + x;
            if (!mask.at(x, y) || seen[start]) continue;
            PixelCluster cluster;
            queue.clear();
            queue.emplace_back(x, y);
            seen[start] = 1;
            while (!queue.empty()) {
                auto [cx, cy] = queue.back();
                queue.pop_back();
                cluster.members.emplace_back(cx, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height)
                            continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * mask.width + nx;
                        if (!mask.bits[ni] || seen[ni]) continue;
                        seen[ni] = 1;
                        queue.emplace_back(nx, ny);
                    }
                }
            }
            double sx = 0.0, sy = 0.0;
            for (auto [mx, my] : cluster.members) {
                sx += mx;
                sy += my;
            }
            cluster.centroid_x = sx / static_cast<double>(cluster.members.size());
            cluster.centroid_y = sy / static_cast<double>(cluster.members.size());
            clusters.push_back(std::move(cluster));
        }
    }
    return clusters;
}

std::vector<CandidatePoint> clusters_to_candidates(const std::vector<PixelCluster>& clusters,
                                                   const GeoRef& georef,
                                                   const std::string& tile_id) {
    validate(georef);
    std::vector<CandidatePoint> out;
    out.reserve(clusters.size());
    for (const auto& cluster : clusters) {
        CandidatePoint c;
        c.location = pixel_to_geo(georef, cluster.centroid_x, cluster.centroid_y).point;
        c.source_tile = tile_id;
        c.cluster_size = cluster.size();
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CandidatePoint> cap_per_tile(std::vector<CandidatePoint> candidates,
                                         std::size_t limit) {
    if (candidates.size() <= limit) return candidates;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return candidates[a].cluster_size > candidates[b].cluster_size;
    });
    order.resize(limit);
    std::sort(order.begin(), order.end());
    std::vector<CandidatePoint> out;
    out.reserve(limit);
    for (std::size_t i : order) out.push_back(std::move(candidates[i]));
    return out;
}

std::vector<CandidatePoint> postprocess_tile(const BinaryMask& mask, int se_radius,
                                             double dedup_radius_m, std::size_t cap) {
    BinaryMask cleaned = morphological_close(remove_isolated(mask), se_radius);
    auto clusters = connected_components(cleaned);
    auto candidates = clusters_to_candidates(clusters, mask.georef, mask.tile_id);

    // Radius dedup with the largest cluster winning each conflict, then
    // survivors restored to scan order.
    std::vector<std::size_t> priority(candidates.size());
    std::iota(priority.begin(), priority.end(), 0);
    std::stable_sort(priority.begin(), priority.end(), [&](std::size_t a, std::size_t b) {
        return candidates[a].cluster_size > candidates[b].cluster_size;
    });
    std::vector<GeoPoint> ordered;
    ordered.reserve(candidates.size());
    for (std::size_t i : priority) ordered.push_back(candidates[i].location);
    std::vector<std::size_t> kept_original;
    for (std::size_t k : dedup_radius_indices(ordered, dedup_radius_m))
        kept_original.push_back(priority[k]);
    std::sort(kept_original.begin(), kept_original.end());

    std::vector<CandidatePoint> deduped;
    deduped.reserve(kept_original.size());
    for (std::size_t i : kept_original) deduped.push_back(std::move(candidates[i]));
    return cap_per_tile(std::move(deduped), cap);
}

}  // namespace kiln
