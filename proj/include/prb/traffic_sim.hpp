#ifndef PRB_TRAFFIC_SIM_HPP
#define PRB_TRAFFIC_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prb/time_series.hpp"

namespace prb::sim {

/**
 * Shape parameters for one tenant's synthetic demand. Hourly demand is
 *
 *   max(0, base + daily_amp*sin(2*pi*t/24 + daily_phase)
 *          + weekly_amp*sin(2*pi*t/168 + weekly_phase)
 *          + trend_per_week*t/168 + N(0, noise_sigma) + burst(t))
 *
 * where burst(t) adds burst_scale * Exp(1) with probability
 * burst_probability per hour. Everything is a deterministic function of
 * (profile, hours, seed).
 */
struct TenantProfile {
    std::string tenant_id = "tenant-0";
    double base_load = 50.0;
    double daily_amplitude = 20.0;
    double weekly_amplitude = 5.0;
    double daily_phase = 0.0;
    double weekly_phase = 0.0;
    double noise_sigma = 2.0;
    double burst_probability = 0.01;
    double burst_scale = 10.0;
    double trend_per_week = 0.0;
};

struct ScenarioConfig {
    std::vector<TenantProfile> tenants;
    int weeks = 2;
    std::uint64_t seed = 1;
    std::int64_t start_epoch_s = 1767225600; // 2026-01-01T00:00:00Z
};

/// Deterministic synthetic demand for one tenant.
TimeSeries generate(const TenantProfile& profile, int hours, std::uint64_t seed,
                    std::int64_t start_epoch_s = 1767225600);

/// One series per tenant, sub-seeded per tenant index. When out_dir is
/// non-empty, writes <out_dir>/<tenant_id>.csv in the series CSV format.
std::vector<TimeSeries> generate_scenario(const ScenarioConfig& cfg,
                                          const std::string& out_dir = "");

/**
 * Seasonal AR(1) series: a daily sinusoid plus an autoregressive noise
 * component x_t = ar_coeff*x_{t-1} + N(0, innovation_sigma). Exercises
 * temporal dependence that pure covariate regression cannot capture.
 */
struct SeasonalArParams {
    double base = 50.0;
    double daily_amplitude = 10.0;
    double ar_coeff = 0.8;
    double innovation_sigma = 3.0;
};

TimeSeries generate_seasonal_ar(const SeasonalArParams& params, int hours, std::uint64_t seed,
                                std::int64_t start_epoch_s = 1767225600,
                                const std::string& tenant_id = "seasonal-ar");

/// Scenario JSON document <-> config. Schema documented in the README.
ScenarioConfig scenario_from_json_file(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

/// Autocorrelation of a series at a given lag (mean-removed, biased).
double autocorrelation(const std::vector<double>& values, std::size_t lag);

} // namespace prb::sim

#endif // PRB_TRAFFIC_SIM_HPP
