#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace kiln {

enum class EmissionMode { Exact, ReproducePaper };

// grams of pollutant per kg of fired brick
struct EmissionFactors {
    double pm10 = 9.7;
    double pm25 = 6.8;
    double sox = 4.6;
    double nox = 4.7;

    bool operator==(const EmissionFactors&) const = default;
};

void validate(const EmissionFactors& factors);

struct ProductionParams {
    double regional_seasonal_bricks = 29.25e9;
    int kiln_count = 11277;
    int working_days = 215;
    double brick_mass_kg = 3.0;
    std::optional<double> published_daily_bricks = 12068.0;

    bool operator==(const ProductionParams&) const = default;
};

void validate(const ProductionParams& params);

struct PollutantAmounts {
    double pm10 = 0.0;
    double pm25 = 0.0;
    double sox = 0.0;
    double nox = 0.0;

    bool operator==(const PollutantAmounts&) const = default;
};

struct EmissionProfile {
    int kiln_type = 0;
    double daily_brick_mass_kg = 0.0;
    PollutantAmounts daily_kg;
    PollutantAmounts seasonal_kg;

    bool operator==(const EmissionProfile&) const = default;
};

int working_days(int year_days = 365, int shutdown_days = 150);

double daily_production_per_kiln(const ProductionParams& params,
                                 EmissionMode mode = EmissionMode::Exact);

// Human-readable mismatch between the published daily figure and the direct
// division; empty when they agree or no published figure is set.
std::string production_note(const ProductionParams& params);

double daily_brick_mass(double bricks_per_day, double brick_mass_kg);

PollutantAmounts daily_emissions(const EmissionFactors& factors, double mass_kg_per_day);

PollutantAmounts seasonal_emissions(const PollutantAmounts& daily, int working_days);

EmissionProfile emission_profile_for_kiln(int kiln_type, const ProductionParams& params,
                                          const EmissionFactors& factors,
                                          EmissionMode mode = EmissionMode::Exact);

struct EmissionConfig {
    EmissionFactors factors;
    ProductionParams params;
};

EmissionConfig load_emission_config(const std::filesystem::path& path);

}  // namespace kiln
