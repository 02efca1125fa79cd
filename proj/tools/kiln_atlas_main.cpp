#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kiln/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Brick kiln detection and emission inventory pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    bool reproduce = false;
    int workers = 1;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "pipeline config JSON file")->required();
        sub->add_flag("--reproduce-paper", reproduce,
                      "use the published daily production figure instead of the division");
        sub->add_option("--workers", workers, "worker thread count")
            ->check(CLI::PositiveNumber);
    };
    CLI::App* train = app.add_subcommand("train", "train the pixel classifier");
    CLI::App* detect =
        app.add_subcommand("detect-lowres", "scan tiles for kiln candidate points");
    CLI::App* geolocate =
        app.add_subcommand("geolocate", "turn detection boxes into kiln points");
    CLI::App* inventory = app.add_subcommand("inventory", "assemble the kiln dataset");
    for (CLI::App* sub : {train, detect, geolocate, inventory}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    kiln::PipelineConfig config;
    try {
        config = kiln::load_pipeline_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
    }
    if (reproduce) config.reproduce_paper = true;

    if (train->parsed()) return kiln::cmd_train(config, workers, std::cerr);
    if (detect->parsed()) return kiln::cmd_detect_lowres(config, workers, std::cerr);
    if (geolocate->parsed()) return kiln::cmd_geolocate(config, workers, std::cerr);
    return kiln::cmd_inventory(config, workers, std::cerr);
}
