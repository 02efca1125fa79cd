#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "kiln/detect.hpp"
#include "kiln/emissions.hpp"
#include "kiln/forest.hpp"

namespace kiln {

struct PipelineConfig {
    // train
    std::filesystem::path labeled_csv;
    std::filesystem::path model_out;
    std::filesystem::path report_out;
    ForestConfig forest;
    // detect-lowres
    std::filesystem::path model_path;
    std::filesystem::path tiles_dir;
    std::filesystem::path candidates_out;
    std::filesystem::path fetch_plan_out;
    int se_radius = 1;
    double intra_tile_dedup_m = 20.0;
    int cap_per_tile = 15;
    double group_radius_m = kDefaultGroupRadiusM;
    int fetch_zoom = 17;
    int fetch_scale = 2;
    int fetch_size_px = 1280;
    // geolocate
    std::filesystem::path detections_path;
    std::filesystem::path points_out;
    double iou_threshold = kDefaultIouThreshold;
    int max_detections = kDefaultMaxDetections;
    double cross_image_dedup_m = kCrossImageDedupRadiusM;
    // inventory
    std::filesystem::path points_in;
    std::optional<std::filesystem::path> amenities_path;
    std::optional<std::filesystem::path> population_path;
    std::optional<std::filesystem::path> districts_path;
    std::filesystem::path minimal_csv_out;
    std::filesystem::path extended_csv_out;
    std::filesystem::path geojson_out;
    EmissionConfig emissions;
    double exposure_radius_m = 1000.0;
    // mode
    bool reproduce_paper = false;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Subcommand entry points. Each validates the paths it needs up front, logs
// to `log`, and returns a process exit code: 0 success, 1 partial failure,
// 2 configuration or input error.
int cmd_train(const PipelineConfig& config, int workers, std::ostream& log);
int cmd_detect_lowres(const PipelineConfig& config, int workers, std::ostream& log);
int cmd_geolocate(const PipelineConfig& config, int workers, std::ostream& log);
int cmd_inventory(const PipelineConfig& config, int workers, std::ostream& log);

}  // namespace kiln
