#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kiln/error.hpp"
#include "kiln/geo.hpp"

using namespace kiln;

namespace {

// Deterministic point cloud in a small box around the given center.
std::vector<GeoPoint> random_cloud(std::size_t n, double lat0, double lon0,
                                   double half_span_deg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<GeoPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts.emplace_back(lat0 + (2.0 * unit() - 1.0) * half_span_deg,
                         lon0 + (2.0 * unit() - 1.0) * half_span_deg);
    }
    return pts;
}

std::vector<std::size_t> brute_force_within(const std::vector<GeoPoint>& pts,
                                            const GeoPoint& center, double radius_m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (haversine_distance(pts[i], center) <= radius_m) out.push_back(i);
    return out;
}

// Offset in degrees of latitude that spans almost exactly 15 m on the sphere.
constexpr double kDlat15m = 0.00013489824088780959;

}  // namespace

TEST_CASE("haversine distance of identical points is zero") {
    GeoPoint p(24.8607, 67.0011);
    CHECK(haversine_distance(p, p) == 0.0);
}

TEST_CASE("haversine distance matches oracle for small equatorial offset") {
    GeoPoint a(0.0, 0.0);
    GeoPoint b(0.0, 0.001);
    CHECK(haversine_distance(a, b) == doctest::Approx(111.19492664455873).epsilon(1e-9));
}

TEST_CASE("haversine distance matches oracle for quarter meridian") {
    GeoPoint a(0.0, 0.0);
    GeoPoint b(90.0, 0.0);
    CHECK(haversine_distance(a, b) == doctest::Approx(10007543.398010286).epsilon(1e-12));
}

TEST_CASE("haversine distance is symmetric") {
    auto pts = random_cloud(64, 31.0, 74.0, 0.5, 7);
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
        CHECK(haversine_distance(pts[i], pts[i + 1]) ==
              haversine_distance(pts[i + 1], pts[i]));
    }
}

TEST_CASE("haversine distance satisfies the triangle inequality") {
    auto pts = random_cloud(90, 31.0, 74.0, 0.5, 11);
    for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
        double ab = haversine_distance(pts[i], pts[i + 1]);
        double bc = haversine_distance(pts[i + 1], pts[i + 2]);
        double ac = haversine_distance(pts[i], pts[i + 2]);
        CHECK(ac <= ab + bc + 1e-9);
    }
}

TEST_CASE("geo point constructor rejects out-of-range coordinates") {
    CHECK_THROWS_AS(GeoPoint(90.0001, 0.0), Error);
    CHECK_THROWS_AS(GeoPoint(-90.0001, 0.0), Error);
    CHECK_THROWS_AS(GeoPoint(0.0, 180.0001), Error);
    CHECK_THROWS_AS(GeoPoint(0.0, -180.0001), Error);
    CHECK_THROWS_AS(GeoPoint(std::nan(""), 0.0), Error);
    CHECK_NOTHROW(GeoPoint(90.0, 180.0));
    CHECK_NOTHROW(GeoPoint(-90.0, -180.0));
}

TEST_CASE("radius query returns exactly the planted inner ring") {
    GeoPoint center(31.0, 74.0);
    std::vector<GeoPoint> pts;
    // Eight points at 999 m and eight at 1001 m, bearings every 45 degrees,
    // placed by scaling lat/lon offsets until haversine agrees.
    for (int ring = 0; ring < 2; ++ring) {
        double target = ring == 0 ? 999.0 : 1001.0;
        for (int k = 0; k < 8; ++k) {
            double theta = k * std::numbers::pi / 4.0;
            double dlat = std::cos(theta), dlon = std::sin(theta);
            double lo = 0.0, hi = 0.05;
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi);
                GeoPoint q(center.lat + dlat * mid, center.lon + dlon * mid);
                (haversine_distance(center, q) < target ? lo : hi) = mid;
            }
            double s = 0.5 * (lo + hi);
            pts.emplace_back(center.lat + dlat * s, center.lon + dlon * s);
        }
    }
    auto index = build_index(pts, 500.0);
    auto hits = points_within_radius(index, center, 1000.0);
    REQUIRE(hits.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(hits[i] == i);
}

TEST_CASE("radius query matches brute force on a random cloud") {
    auto pts = random_cloud(2000, 31.0, 74.0, 0.02, 42);
    auto index = build_index(pts, 150.0);
    auto queries = random_cloud(50, 31.0, 74.0, 0.02, 43);
    for (const auto& q : queries) {
        for (double r : {40.0, 150.0, 900.0}) {
            CHECK(points_within_radius(index, q, r) == brute_force_within(pts, q, r));
        }
    }
}

TEST_CASE("radius query handles centers far outside the indexed cloud") {
    auto pts = random_cloud(200, 31.0, 74.0, 0.01, 5);
    auto index = build_index(pts, 100.0);
    CHECK(points_within_radius(index, GeoPoint(30.0, 73.0), 500.0).empty());
    auto all = points_within_radius(index, GeoPoint(31.0, 74.0), 500'000.0);
    CHECK(all.size() == pts.size());
}

TEST_CASE("empty index yields empty query results") {
    auto index = build_index(std::span<const GeoPoint>{}, 100.0);
    CHECK(index.size() == 0);
    CHECK(points_within_radius(index, GeoPoint(0.0, 0.0), 1000.0).empty());
}

TEST_CASE("build_index rejects non-positive cell size") {
    std::vector<GeoPoint> pts{GeoPoint(0.0, 0.0)};
    CHECK_THROWS_AS(build_index(pts, 0.0), Error);
    CHECK_THROWS_AS(build_index(pts, -1.0), Error);
}

TEST_CASE("dedup keeps every second point of a 15 m chain at radius 20 m") {
    std::vector<GeoPoint> chain;
    for (int i = 0; i < 10; ++i) chain.emplace_back(31.0 + i * kDlat15m, 74.0);
    REQUIRE(haversine_distance(chain[0], chain[1]) == doctest::Approx(15.0).epsilon(1e-6));
    auto kept = dedup_radius_indices(chain, 20.0);
    CHECK(kept == std::vector<std::size_t>{0, 2, 4, 6, 8});
}

TEST_CASE("dedup keeps all points of a 15 m chain at radius 12 m") {
    std::vector<GeoPoint> chain;
    for (int i = 0; i < 10; ++i) chain.emplace_back(31.0 + i * kDlat15m, 74.0);
    auto kept = dedup_radius_indices(chain, 12.0);
    CHECK(kept.size() == 10);
}

TEST_CASE("dedup is keep-first: earlier input wins") {
    std::vector<GeoPoint> pts{GeoPoint(31.0, 74.0), GeoPoint(31.0 + kDlat15m, 74.0)};
    auto kept = dedup_radius(pts, 20.0);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == pts[0]);
}

TEST_CASE("dedup output is pairwise separated and covers the input") {
    auto pts = random_cloud(1500, 31.0, 74.0, 0.005, 99);
    double radius = 60.0;
    auto kept_idx = dedup_radius_indices(pts, radius);
    std::vector<GeoPoint> kept;
    for (auto i : kept_idx) kept.push_back(pts[i]);

    for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = i + 1; j < kept.size(); ++j)
            CHECK(haversine_distance(kept[i], kept[j]) > radius);

    for (const auto& p : pts) {
        double best = 1e18;
        for (const auto& k : kept) best = std::min(best, haversine_distance(p, k));
        CHECK(best <= radius);
    }
}

TEST_CASE("dedup is idempotent") {
    auto pts = random_cloud(800, 31.0, 74.0, 0.004, 123);
    auto once = dedup_radius(pts, 50.0);
    auto twice = dedup_radius(once, 50.0);
    CHECK(once == twice);
}

TEST_CASE("dedup matches a brute-force greedy sweep") {
    auto pts = random_cloud(1200, 31.0, 74.0, 0.006, 321);
    double radius = 45.0;
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool ok = true;
        for (std::size_t j : expected) {
            if (haversine_distance(pts[i], pts[j]) <= radius) {
                ok = false;
                break;
            }
        }
        if (ok) expected.push_back(i);
    }
    CHECK(dedup_radius_indices(pts, radius) == expected);
}

TEST_CASE("dedup with zero radius drops only exact duplicates") {
    std::vector<GeoPoint> pts{GeoPoint(1.0, 2.0), GeoPoint(1.0, 2.0), GeoPoint(1.0, 2.000001)};
    auto kept = dedup_radius_indices(pts, 0.0);
    CHECK(kept == std::vector<std::size_t>{0, 2});
}

TEST_CASE("dedup rejects negative radius") {
    std::vector<GeoPoint> pts{GeoPoint(0.0, 0.0)};
    CHECK_THROWS_AS(dedup_radius(pts, -1.0), Error);
}
