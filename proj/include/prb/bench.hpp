#ifndef PRB_BENCH_HPP
#define PRB_BENCH_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prb/models.hpp"
#include "prb/traffic_sim.hpp"

namespace prb::bench {

/**
 * One benchmark campaign: the model x data-length grid of the paper's
 * evaluation protocol on a generated scenario. Repetitions re-run the
 * same seeded cell to put error bars on the (non-deterministic) timing
 * fields; MSE comes from repetition 1 and is seed-deterministic.
 */
struct BenchmarkSpec {
    std::vector<models::ModelKind> models = {models::ModelKind::lstm, models::ModelKind::sff,
                                             models::ModelKind::deepar,
                                             models::ModelKind::transformer};
    std::vector<int> weeks = {2, 4, 10, 20};
    std::uint64_t seed = 42;
    int repetitions = 3;
    std::string out_dir = "bench-out";
    bool parallel = false;         // disables meaningful timing comparisons
    bool save_predictors = true;
    int telemetry_interval_ms = 100;

    sim::TenantProfile profile;    // benchmark default profile
    models::EstimatorConfig base;  // kind/seed overridden per cell

    /// Test hook: replaces train+predict with an injected forecaster.
    models::ForecastFn oracle_override;

    void validate() const;
};

struct BenchmarkRow {
    std::string model;
    int weeks = 0;
    bool ok = false;
    std::string error;

    double mse = 0.0;
    double train_seconds_mean = 0.0;
    double train_seconds_sd = 0.0;
    double predict_ms_per_block_mean = 0.0;
    double predict_ms_per_block_sd = 0.0;
    long long peak_rss_bytes = -1;
    int blocks = 0;
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    std::string results_csv_path;
    std::string summary_json_path;
    int error_count = 0;
};

/// Runs the full grid sequentially (or per-cell threads with --parallel),
/// writing results.csv, summary.json, telemetry_<model>_<phase>.csv and
/// the serialized predictors into spec.out_dir.
BenchmarkResult run(const BenchmarkSpec& spec);

/// The deterministic training series for one cell; exposed so tests can
/// reproduce exactly what run() trained on.
TimeSeries cell_series(const BenchmarkSpec& spec, int weeks);

/// Renders the Table-I-shaped text table and the per-figure CSVs from a
/// results directory. Returns a process exit code: 0 iff no row errors.
int report(const std::string& dir, std::ostream& out);

std::vector<BenchmarkRow> read_results_csv(const std::string& path);
void write_results_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);

} // namespace prb::bench

#endif // PRB_BENCH_HPP
