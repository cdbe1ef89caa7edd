#include "prb/traffic_sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "prb/rng.hpp"

namespace prb::sim {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

TimeSeries generate(const TenantProfile& p, int hours, std::uint64_t seed,
                    std::int64_t start_epoch_s) {
    if (hours < 1) throw std::invalid_argument("generate: hours must be >= 1");
    Rng rng(seed);
    std::vector<double> values(static_cast<std::size_t>(hours));
    for (int t = 0; t < hours; ++t) {
        double v = p.base_load;
        v += p.daily_amplitude * std::sin(kTwoPi * t / 24.0 + p.daily_phase);
        v += p.weekly_amplitude * std::sin(kTwoPi * t / 168.0 + p.weekly_phase);
        v += p.trend_per_week * static_cast<double>(t) / 168.0;
        // Draw order is fixed per hour so the stream is stable even when a
        // component is disabled: a normal for the noise, one uniform for the
        // burst coin, one more draw only when the burst fires.
        const double n = rng.normal();
        if (p.noise_sigma > 0.0) v += p.noise_sigma * n;
        const double coin = rng.uniform();
        if (coin < p.burst_probability) v += p.burst_scale * rng.exponential();
        values[static_cast<std::size_t>(t)] = v < 0.0 ? 0.0 : v;
    }
    return TimeSeries(p.tenant_id, start_epoch_s, std::move(values));
}

std::vector<TimeSeries> generate_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
    if (cfg.tenants.empty()) throw std::invalid_argument("scenario: no tenants");
    if (cfg.weeks < 1) throw std::invalid_argument("scenario: weeks must be >= 1");
    const int hours = cfg.weeks * static_cast<int>(kHoursPerWeek);
    std::vector<TimeSeries> out;
    out.reserve(cfg.tenants.size());
    for (std::size_t i = 0; i < cfg.tenants.size(); ++i) {
        const std::uint64_t sub_seed = cfg.seed ^ hash_u64(static_cast<std::uint64_t>(i) + 1);
        TimeSeries series = generate(cfg.tenants[i], hours, sub_seed, cfg.start_epoch_s);
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            write_series_csv_file(out_dir + "/" + series.tenant_id() + ".csv", series);
        }
        out.push_back(std::move(series));
    }
    return out;
}

TimeSeries generate_seasonal_ar(const SeasonalArParams& p, int hours, std::uint64_t seed,
                                std::int64_t start_epoch_s, const std::string& tenant_id) {
    if (hours < 1) throw std::invalid_argument("generate_seasonal_ar: hours must be >= 1");
    Rng rng(seed);
    std::vector<double> values(static_cast<std::size_t>(hours));
    double x = 0.0;
    for (int t = 0; t < hours; ++t) {
        x = p.ar_coeff * x + p.innovation_sigma * rng.normal();
        double v = p.base + p.daily_amplitude * std::sin(kTwoPi * t / 24.0) + x;
        values[static_cast<std::size_t>(t)] = v < 0.0 ? 0.0 : v;
    }
    return TimeSeries(tenant_id, start_epoch_s, std::move(values));
}

ScenarioConfig scenario_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    nlohmann::json j;
    in >> j;

    ScenarioConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.weeks = j.value("weeks", 2);
    if (j.contains("start")) cfg.start_epoch_s = parse_iso8601(j.at("start").get<std::string>());
    if (!j.contains("tenants") || !j.at("tenants").is_array() || j.at("tenants").empty())
        throw std::invalid_argument("scenario: tenants array required");
    for (const auto& tj : j.at("tenants")) {
        TenantProfile p;
        p.tenant_id = tj.value("id", std::string("tenant-") + std::to_string(cfg.tenants.size()));
        p.base_load = tj.value("base_load", p.base_load);
        p.daily_amplitude = tj.value("daily_amplitude", p.daily_amplitude);
        p.weekly_amplitude = tj.value("weekly_amplitude", p.weekly_amplitude);
        p.daily_phase = tj.value("daily_phase", p.daily_phase);
        p.weekly_phase = tj.value("weekly_phase", p.weekly_phase);
        p.noise_sigma = tj.value("noise_sigma", p.noise_sigma);
        p.burst_probability = tj.value("burst_probability", p.burst_probability);
        p.burst_scale = tj.value("burst_scale", p.burst_scale);
        p.trend_per_week = tj.value("trend_per_week", p.trend_per_week);
        cfg.tenants.push_back(std::move(p));
    }
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["weeks"] = cfg.weeks;
    j["start"] = format_iso8601(cfg.start_epoch_s);
    j["tenants"] = nlohmann::json::array();
    for (const auto& p : cfg.tenants) {
        j["tenants"].push_back({{"id", p.tenant_id},
                                {"base_load", p.base_load},
                                {"daily_amplitude", p.daily_amplitude},
                                {"weekly_amplitude", p.weekly_amplitude},
                                {"daily_phase", p.daily_phase},
                                {"weekly_phase", p.weekly_phase},
                                {"noise_sigma", p.noise_sigma},
                                {"burst_probability", p.burst_probability},
                                {"burst_scale", p.burst_scale},
                                {"trend_per_week", p.trend_per_week}});
    }
    return j.dump(2);
}

double autocorrelation(const std::vector<double>& values, std::size_t lag) {
    if (values.size() <= lag + 1)
        throw std::invalid_argument("autocorrelation: series shorter than lag");
    // Pearson correlation between the series and its lagged copy over the
    // overlapping range, so an exactly periodic signal scores 1.
    const std::size_t n = values.size() - lag;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += values[i];
        mb += values[i + lag];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = values[i] - ma;
        const double db = values[i + lag] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 1.0;
    return num / std::sqrt(va * vb);
}

} // namespace prb::sim
