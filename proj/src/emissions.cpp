#include "kiln/emissions.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "kiln/error.hpp"

namespace kiln {

void validate(const EmissionFactors& factors) {
    if (!(factors.pm10 > 0.0) || !(factors.pm25 > 0.0) || !(factors.sox > 0.0) ||
        !(factors.nox > 0.0))
        throw ConfigError("emission factors must all be positive");
}

void validate(const ProductionParams& params) {
    if (!(params.regional_seasonal_bricks > 0.0))
        throw ConfigError("regional seasonal brick count must be positive");
    if (params.kiln_count <= 0) throw ConfigError("kiln count must be positive");
    if (params.working_days <= 0 || params.working_days > 365)
        throw ConfigError("working days must lie in (0, 365]");
    if (!(params.brick_mass_kg > 0.0)) throw ConfigError("brick mass must be positive");
    if (params.published_daily_bricks && !(*params.published_daily_bricks > 0.0))
        throw ConfigError("published daily brick count must be positive");
}

int working_days(int year_days, int shutdown_days) {
    if (year_days < 0) throw Error("year length cannot be negative");
    if (shutdown_days < 0 || shutdown_days > year_days)
        throw Error("shutdown days must lie between 0 and the year length");
    int days = year_days - shutdown_days;
    if (days == 0) std::cerr << "warning: zero working days, production halts\n";
    return days;
}

double daily_production_per_kiln(const ProductionParams& params, EmissionMode mode) {
    validate(params);
    if (mode == EmissionMode::ReproducePaper && params.published_daily_bricks)
        return *params.published_daily_bricks;
    return params.regional_seasonal_bricks /
           (static_cast<double>(params.kiln_count) * params.working_days);
}

std::string production_note(const ProductionParams& params) {
    if (!params.published_daily_bricks) return {};
    double computed = daily_production_per_kiln(params, EmissionMode::Exact);
    double published = *params.published_daily_bricks;
    if (computed == published) return {};
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "published daily production %.1f bricks/kiln differs from computed %.1f "
                  "(gap %.1f)",
                  published, computed, std::abs(published - computed));
    return buf;
}

double daily_brick_mass(double bricks_per_day, double brick_mass_kg) {
    return bricks_per_day * brick_mass_kg;
}

PollutantAmounts daily_emissions(const EmissionFactors& factors, double mass_kg_per_day) {
    PollutantAmounts daily;
    daily.pm10 = factors.pm10 * mass_kg_per_day / 1000.0;
    daily.pm25 = factors.pm25 * mass_kg_per_day / 1000.0;
    daily.sox = factors.sox * mass_kg_per_day / 1000.0;
    daily.nox = factors.nox * mass_kg_per_day / 1000.0;
    return daily;
}

PollutantAmounts seasonal_emissions(const PollutantAmounts& daily, int working_days) {
    if (working_days < 0) throw Error("working days cannot be negative");
    PollutantAmounts seasonal;
    seasonal.pm10 = daily.pm10 * working_days;
    seasonal.pm25 = daily.pm25 * working_days;
    seasonal.sox = daily.sox * working_days;
    seasonal.nox = daily.nox * working_days;
    return seasonal;
}

EmissionProfile emission_profile_for_kiln(int kiln_type, const ProductionParams& params,
                                          const EmissionFactors& factors, EmissionMode mode) {
    if (kiln_type != 0 && kiln_type != 1)
        throw Error("unknown kiln type code " + std::to_string(kiln_type));
    validate(factors);
    double bricks = daily_production_per_kiln(params, mode);
    EmissionProfile profile;
    profile.kiln_type = kiln_type;
    profile.daily_brick_mass_kg = daily_brick_mass(bricks, params.brick_mass_kg);
    profile.daily_kg = daily_emissions(factors, profile.daily_brick_mass_kg);
    profile.seasonal_kg = seasonal_emissions(profile.daily_kg, params.working_days);
    return profile;
}

EmissionConfig load_emission_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open emission config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid emission config: ") + e.what());
    }
    EmissionConfig config;
    try {
        if (doc.contains("factors")) {
            const auto& f = doc.at("factors");
            config.factors.pm10 = f.value("pm10", config.factors.pm10);
            config.factors.pm25 = f.value("pm25", config.factors.pm25);
            config.factors.sox = f.value("sox", config.factors.sox);
            config.factors.nox = f.value("nox", config.factors.nox);
        }
        if (doc.contains("production")) {
            const auto& p = doc.at("production");
            config.params.regional_seasonal_bricks =
                p.value("regional_seasonal_bricks", config.params.regional_seasonal_bricks);
            config.params.kiln_count = p.value("kiln_count", config.params.kiln_count);
            config.params.working_days = p.value("working_days", config.params.working_days);
            config.params.brick_mass_kg = p.value("brick_mass_kg", config.params.brick_mass_kg);
            if (p.contains("published_daily_bricks")) {
                if (p.at("published_daily_bricks").is_null())
                    config.params.published_daily_bricks.reset();
                else
                    config.params.published_daily_bricks =
                        p.at("published_daily_bricks").get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid emission config: ") + e.what());
    }
    validate(config.factors);
    validate(config.params);
    return config;
}

}  // namespace kiln
