#include "kiln/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kiln/error.hpp"
#include "kiln/exposure.hpp"
#include "kiln/inventory.hpp"
#include "kiln/parallel.hpp"
#include "kiln/raster.hpp"

namespace fs = std::filesystem;

namespace kiln {

namespace {

std::string fixed6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

double round6(double value) { return std::round(value * 1e6) / 1e6; }

fs::path path_value(const nlohmann::json& section, const char* key) {
    return fs::path(section.value(key, std::string{}));
}

void require_input_file(const fs::path& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " is not set in the config");
    if (!fs::exists(path))
        throw ConfigError(std::string("missing ") + what + ": " + path.string());
}

void require_output_path(const fs::path& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " is not set in the config");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string provenance_string(const PipelineConfig& config) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "mode=%d factors=%.17g,%.17g,%.17g,%.17g "
                  "production=%.17g,%d,%d,%.17g,%.17g radius=%.17g",
                  config.reproduce_paper ? 1 : 0, config.emissions.factors.pm10,
                  config.emissions.factors.pm25, config.emissions.factors.sox,
                  config.emissions.factors.nox, config.emissions.params.regional_seasonal_bricks,
                  config.emissions.params.kiln_count, config.emissions.params.working_days,
                  config.emissions.params.brick_mass_kg,
                  config.emissions.params.published_daily_bricks.value_or(-1.0),
                  config.exposure_radius_m);
    char out[64];
    std::snprintf(out, sizeof(out), "kiln-atlas 1.0 params=%016llx",
                  static_cast<unsigned long long>(fnv1a(buf)));
    return out;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pipeline config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid pipeline config: ") + e.what());
    }
    PipelineConfig config;
    try {
        config.reproduce_paper = doc.value("reproduce_paper", false);
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            config.labeled_csv = path_value(t, "labeled_csv");
            config.model_out = path_value(t, "model_out");
            config.report_out = path_value(t, "report_out");
            if (t.contains("forest")) {
                const auto& f = t.at("forest");
                config.forest.n_trees = f.value("n_trees", config.forest.n_trees);
                config.forest.max_depth = f.value("max_depth", config.forest.max_depth);
                config.forest.max_features =
                    f.value("max_features", config.forest.max_features);
                config.forest.min_samples_split =
                    f.value("min_samples_split", config.forest.min_samples_split);
                config.forest.min_samples_leaf =
                    f.value("min_samples_leaf", config.forest.min_samples_leaf);
                config.forest.train_fraction =
                    f.value("train_fraction", config.forest.train_fraction);
                config.forest.rng_seed = f.value("rng_seed", config.forest.rng_seed);
            }
        }
        if (doc.contains("detect")) {
            const auto& d = doc.at("detect");
            config.model_path = path_value(d, "model");
            config.tiles_dir = path_value(d, "tiles_dir");
            config.candidates_out = path_value(d, "candidates_out");
            config.fetch_plan_out = path_value(d, "fetch_plan_out");
            config.se_radius = d.value("se_radius", config.se_radius);
            config.intra_tile_dedup_m =
                d.value("intra_tile_dedup_m", config.intra_tile_dedup_m);
            config.cap_per_tile = d.value("cap_per_tile", config.cap_per_tile);
            config.group_radius_m = d.value("group_radius_m", config.group_radius_m);
            config.fetch_zoom = d.value("fetch_zoom", config.fetch_zoom);
            config.fetch_scale = d.value("fetch_scale", config.fetch_scale);
            config.fetch_size_px = d.value("fetch_size_px", config.fetch_size_px);
        }
        if (doc.contains("geolocate")) {
            const auto& g = doc.at("geolocate");
            config.detections_path = path_value(g, "detections");
            config.points_out = path_value(g, "points_out");
            config.iou_threshold = g.value("iou_threshold", config.iou_threshold);
            config.max_detections = g.value("max_detections", config.max_detections);
            config.cross_image_dedup_m =
                g.value("cross_image_dedup_m", config.cross_image_dedup_m);
        }
        if (doc.contains("inventory")) {
            const auto& v = doc.at("inventory");
            config.points_in = path_value(v, "points");
            if (v.contains("amenities")) config.amenities_path = path_value(v, "amenities");
            if (v.contains("population")) config.population_path = path_value(v, "population");
            if (v.contains("districts")) config.districts_path = path_value(v, "districts");
            config.minimal_csv_out = path_value(v, "minimal_csv_out");
            config.extended_csv_out = path_value(v, "extended_csv_out");
            config.geojson_out = path_value(v, "geojson_out");
            config.exposure_radius_m = v.value("radius_m", config.exposure_radius_m);
            if (v.contains("emissions")) {
                const auto& e = v.at("emissions");
                if (e.contains("factors")) {
                    const auto& f = e.at("factors");
                    config.emissions.factors.pm10 =
                        f.value("pm10", config.emissions.factors.pm10);
                    config.emissions.factors.pm25 =
                        f.value("pm25", config.emissions.factors.pm25);
                    config.emissions.factors.sox = f.value("sox", config.emissions.factors.sox);
                    config.emissions.factors.nox = f.value("nox", config.emissions.factors.nox);
                }
                if (e.contains("production")) {
                    const auto& p = e.at("production");
                    auto& params = config.emissions.params;
                    params.regional_seasonal_bricks =
                        p.value("regional_seasonal_bricks", params.regional_seasonal_bricks);
                    params.kiln_count = p.value("kiln_count", params.kiln_count);
                    params.working_days = p.value("working_days", params.working_days);
                    params.brick_mass_kg = p.value("brick_mass_kg", params.brick_mass_kg);
                    if (p.contains("published_daily_bricks")) {
                        if (p.at("published_daily_bricks").is_null())
                            params.published_daily_bricks.reset();
                        else
                            params.published_daily_bricks =
                                p.at("published_daily_bricks").get<double>();
                    }
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid pipeline config: ") + e.what());
    }
    return config;
}

int cmd_train(const PipelineConfig& config, int workers, std::ostream& log) {
    try {
        require_input_file(config.labeled_csv, "labeled data file");
        require_output_path(config.model_out, "model output path");
        require_output_path(config.report_out, "report output path");
        validate(config.forest);

        LabelSchema schema = LabelSchema::default_schema();
        LabeledPixelSet set = load_labeled_csv(config.labeled_csv, schema);
        auto [train_set, test_set] =
            split_train_test(set, config.forest.train_fraction, config.forest.rng_seed);
        log << "training on " << train_set.rows.size() << " pixels, holding out "
            << test_set.rows.size() << "\n";
        Forest forest = train_forest(train_set, config.forest, workers);
        save_model(forest, config.model_out);

        std::vector<int> predicted;
        std::vector<int> truth;
        predicted.reserve(test_set.rows.size());
        truth.reserve(test_set.rows.size());
        std::vector<int> slots(test_set.rows.size(), 0);
        parallel_for(test_set.rows.size(), workers, [&](std::size_t i) {
            const LabeledPixel& row = test_set.rows[i];
            slots[i] = predict_pixel(forest, row.r, row.g, row.b).class_index;
        });
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test_set.rows.size(); ++i) {
            predicted.push_back(slots[i]);
            truth.push_back(test_set.rows[i].label);
            if (slots[i] == test_set.rows[i].label) ++correct;
        }
        EvaluationReport report = evaluate(predicted, truth, schema);
        double accuracy = truth.empty()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : static_cast<double>(correct) / static_cast<double>(truth.size());

        nlohmann::ordered_json doc;
        doc["accuracy"] = accuracy;
        doc["classes"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < report.per_class.size(); ++i) {
            const ClassMetrics& m = report.per_class[i];
            doc["classes"].push_back({{"name", schema.class_names[i]},
                                      {"precision", m.precision},
                                      {"recall", m.recall},
                                      {"f1", m.f1},
                                      {"support", m.support}});
        }
        doc["confusion"] = report.confusion;
        open_out(config.report_out) << doc.dump(2) << "\n";
        log << "model written to " << config.model_out.string() << ", test accuracy "
            << accuracy << "\n";
        return 0;
    } catch (const std::exception& e) {
        log << "train: " << e.what() << "\n";
        return 2;
    }
}

int cmd_detect_lowres(const PipelineConfig& config, int workers, std::ostream& log) {
    try {
        require_input_file(config.model_path, "model file");
        if (config.tiles_dir.empty()) throw ConfigError("tile directory is not set");
        if (!fs::is_directory(config.tiles_dir))
            throw ConfigError("missing tile directory: " + config.tiles_dir.string());
        require_output_path(config.candidates_out, "candidate output path");
        require_output_path(config.fetch_plan_out, "fetch plan output path");
        if (config.se_radius < 0 || config.intra_tile_dedup_m < 0.0 ||
            config.cap_per_tile < 0)
            throw ConfigError("postprocess parameters must be non-negative");
        if (config.fetch_zoom < 0 || config.fetch_zoom > 22 ||
            (config.fetch_scale != 1 && config.fetch_scale != 2) || config.fetch_size_px <= 0)
            throw ConfigError("fetch plan parameters out of range");

        Forest forest = load_model(config.model_path);

        std::vector<fs::path> tile_paths;
        for (const auto& entry : fs::directory_iterator(config.tiles_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".ppm" || ext == ".png") tile_paths.push_back(entry.path());
        }
        std::sort(tile_paths.begin(), tile_paths.end());
        if (tile_paths.empty())
            log << "warning: no tiles found in " << config.tiles_dir.string() << "\n";

        struct TileOutcome {
            std::vector<CandidatePoint> candidates;
            std::string error;
        };
        std::vector<TileOutcome> outcomes(tile_paths.size());
        parallel_for(tile_paths.size(), workers, [&](std::size_t i) {
            try {
                RasterTile tile = load_tile(tile_paths[i]);
                BinaryMask mask = classify_tile(forest, tile, kBrickKilnClass);
                outcomes[i].candidates =
                    postprocess_tile(mask, config.se_radius, config.intra_tile_dedup_m,
                                     static_cast<std::size_t>(config.cap_per_tile));
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        });

        std::vector<CandidatePoint> candidates;
        int failed = 0;
        for (std::size_t i = 0; i < tile_paths.size(); ++i) {
            if (!outcomes[i].error.empty()) {
                ++failed;
                log << "tile " << tile_paths[i].filename().string()
                    << " failed: " << outcomes[i].error << "\n";
                continue;
            }
            for (auto& c : outcomes[i].candidates) candidates.push_back(std::move(c));
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const CandidatePoint& a, const CandidatePoint& b) {
                             return a.source_tile < b.source_tile;
                         });

        auto out = open_out(config.candidates_out);
        out << "tile_id,lat,lon,cluster_size\n";
        for (const auto& c : candidates)
            out << c.source_tile << ',' << fixed6(c.location.lat) << ','
                << fixed6(c.location.lon) << ',' << c.cluster_size << "\n";
        out.close();

        std::vector<GeoPoint> locations;
        locations.reserve(candidates.size());
        for (const auto& c : candidates) locations.push_back(c.location);
        auto groups = group_candidates(locations, config.group_radius_m);
        nlohmann::ordered_json plan;
        plan["requests"] = nlohmann::ordered_json::array();
        for (const auto& group : groups) {
            plan["requests"].push_back({{"center_lat", round6(group.fetch_center.lat)},
                                        {"center_lon", round6(group.fetch_center.lon)},
                                        {"zoom", config.fetch_zoom},
                                        {"scale", config.fetch_scale},
                                        {"size_px", config.fetch_size_px},
                                        {"member_count", group.members.size()}});
        }
        open_out(config.fetch_plan_out) << plan.dump(2) << "\n";

        log << candidates.size() << " candidates from "
            << (tile_paths.size() - static_cast<std::size_t>(failed)) << " tiles, "
            << groups.size() << " fetch requests\n";
        if (failed > 0) {
            log << failed << " of " << tile_paths.size() << " tiles failed\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        log << "detect-lowres: " << e.what() << "\n";
        return 2;
    }
}

int cmd_geolocate(const PipelineConfig& config, int workers, std::ostream& log) {
    try {
        require_input_file(config.detections_path, "detections file");
        require_output_path(config.points_out, "points output path");
        if (!(config.iou_threshold >= 0.0 && config.iou_threshold <= 1.0))
            throw ConfigError("iou threshold must lie in [0, 1]");
        if (config.max_detections <= 0)
            throw ConfigError("max detections must be positive");
        if (config.cross_image_dedup_m < 0.0)
            throw ConfigError("dedup radius must be non-negative");

        std::vector<ImageDetections> images = load_detections(config.detections_path);
        std::vector<std::vector<KilnPoint>> per_image(images.size());
        parallel_for(images.size(), workers, [&](std::size_t i) {
            auto kept = nms(images[i].boxes, config.iou_threshold, config.max_detections);
            per_image[i].reserve(kept.size());
            for (const auto& box : kept)
                per_image[i].push_back(bbox_to_geo(images[i].georef, box, images[i].image_id));
        });
        std::vector<KilnPoint> points;
        for (auto& chunk : per_image)
            for (auto& p : chunk) points.push_back(std::move(p));
        std::size_t before = points.size();
        points = cross_image_dedup(points);
        save_kiln_points(points, config.points_out);
        log << before << " boxes kept by NMS across " << images.size() << " images, "
            << points.size() << " points after dedup\n";
        return 0;
    } catch (const std::exception& e) {
        log << "geolocate: " << e.what() << "\n";
        return 2;
    }
}

int cmd_inventory(const PipelineConfig& config, int workers, std::ostream& log) {
    (void)workers;
    std::string stage = "setup";
    try {
        require_input_file(config.points_in, "kiln points file");
        require_output_path(config.minimal_csv_out, "minimal CSV output path");
        require_output_path(config.extended_csv_out, "extended CSV output path");
        require_output_path(config.geojson_out, "GeoJSON output path");
        validate(config.emissions.factors);
        validate(config.emissions.params);
        if (!(config.exposure_radius_m > 0.0))
            throw ConfigError("exposure radius must be positive");

        stage = "points";
        std::vector<KilnPoint> points = load_kiln_points(config.points_in);

        stage = "emissions";
        EmissionMode mode =
            config.reproduce_paper ? EmissionMode::ReproducePaper : EmissionMode::Exact;
        std::string note = production_note(config.emissions.params);
        if (!note.empty()) log << "note: " << note << "\n";
        EmissionProfile profiles[2] = {
            emission_profile_for_kiln(0, config.emissions.params, config.emissions.factors,
                                      mode),
            emission_profile_for_kiln(1, config.emissions.params, config.emissions.factors,
                                      mode),
        };

        KilnDataset dataset;
        dataset.provenance = provenance_string(config);
        dataset.records.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            KilnRecord record;
            record.id = static_cast<int>(i) + 1;
            record.kiln_type = static_cast<int>(points[i].cls);
            record.location = points[i].location;
            record.emissions = profiles[record.kiln_type];
            dataset.records.push_back(std::move(record));
        }

        if ((config.amenities_path || config.population_path) && !dataset.records.empty()) {
            stage = "exposure";
            std::vector<AmenityPoint> amenities;
            if (config.amenities_path) {
                require_input_file(*config.amenities_path, "amenity file");
                AmenityLoadResult loaded = load_amenities(*config.amenities_path);
                for (const auto& err : loaded.row_errors) log << "amenities: " << err << "\n";
                if (loaded.skipped_unknown > 0)
                    log << "amenities: skipped " << loaded.skipped_unknown
                        << " rows with unknown kinds\n";
                amenities = std::move(loaded.points);
            }
            std::vector<PopulationCell> cells;
            if (config.population_path) {
                require_input_file(*config.population_path, "population file");
                PopulationLoadResult loaded = load_population(*config.population_path);
                for (const auto& err : loaded.row_errors) log << "population: " << err << "\n";
                cells = std::move(loaded.cells);
            }
            std::vector<KilnSite> sites;
            sites.reserve(dataset.records.size());
            for (const auto& record : dataset.records)
                sites.push_back({record.id, record.location});
            std::vector<ExposureResult> results =
                exposure_for_kilns(sites, amenities, cells, config.exposure_radius_m);
            for (const auto& result : results)
                dataset.records[static_cast<std::size_t>(result.kiln_id) - 1].exposure = result;
            ExposureSummary summary =
                exposure_summary(results, sites, cells, config.exposure_radius_m);
            log << "exposure: " << summary.pct_with_school << "% of kilns have a school and "
                << summary.pct_with_hospital << "% a hospital within "
                << config.exposure_radius_m << " m; population "
                << summary.population_raw << " raw, " << summary.population_deduped
                << " deduplicated\n";
        }

        if (config.districts_path) {
            stage = "districts";
            require_input_file(*config.districts_path, "district boundary file");
            auto districts = load_districts(*config.districts_path);
            assign_districts(dataset, districts);
        }

        stage = "write";
        write_minimal_csv(dataset, config.minimal_csv_out);
        write_extended_csv(dataset, config.extended_csv_out);
        write_geojson(dataset, config.geojson_out);
        log << dataset.records.size() << " records written to "
            << config.minimal_csv_out.string() << ", " << config.extended_csv_out.string()
            << ", " << config.geojson_out.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        log << "inventory[" << stage << "]: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace kiln
