#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "prb/bench.hpp"
#include "prb/telemetry.hpp"

using namespace prb;
using namespace prb::bench;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> slurp_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

BenchmarkSpec small_spec(const std::string& out_dir) {
    BenchmarkSpec spec;
    spec.models = {models::ModelKind::sff};
    spec.weeks = {2};
    spec.seed = 7;
    spec.repetitions = 1;
    spec.out_dir = out_dir;
    return spec;
}

} // namespace

TEST_CASE("telemetry sampler cadence and rss probe") {
    CHECK_THROWS_AS(TelemetrySampler(10), std::invalid_argument);

    TelemetrySampler sampler(50);
    sampler.begin_phase("train");
    std::this_thread::sleep_for(std::chrono::milliseconds(1000));
    sampler.end_phase();
    const auto samples = sampler.samples();
    // 1 s at 50 ms cadence: about 20 samples, generous CI slack.
    CHECK(samples.size() >= 12);
    CHECK(samples.size() <= 28);
    for (const auto& s : samples) CHECK(s.phase == "train");

    CHECK(TelemetrySampler::rss_available());
    CHECK(TelemetrySampler::read_rss_bytes() > 0);
    CHECK(sampler.peak_rss_bytes() > 0);

    const auto dir = fresh_dir("prb_telemetry_test");
    const std::string path = (dir / "t.csv").string();
    sampler.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# rss=available");
    std::getline(in, line);
    CHECK(line == "phase,elapsed_s,rss_bytes");
    std::filesystem::remove_all(dir);
}

TEST_CASE("bench smoke run: one cell, finite fields, artifacts on disk") {
    const auto dir = fresh_dir("prb_bench_smoke");
    const auto result = run(small_spec(dir.string()));
    REQUIRE(result.rows.size() == 1);
    const auto& row = result.rows[0];
    CHECK(row.ok);
    CHECK(row.model == "sff");
    CHECK(row.weeks == 2);
    CHECK(std::isfinite(row.mse));
    CHECK(row.mse >= 0.0);
    CHECK(row.train_seconds_mean > 0.0);
    CHECK(row.predict_ms_per_block_mean > 0.0);
    CHECK(row.blocks == 2); // 67-point test slice: 2 full blocks

    CHECK(std::filesystem::exists(dir / "results.csv"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "predictor_sff_2w.prbm"));
    CHECK(std::filesystem::exists(dir / "predictor_sff_2w.json"));
    CHECK(std::filesystem::exists(dir / "telemetry_sff_train.csv"));
    CHECK(std::filesystem::exists(dir / "telemetry_sff_predict.csv"));

    std::ifstream sj(dir / "summary.json");
    nlohmann::json summary;
    sj >> summary;
    CHECK(summary.at("error_count") == 0);
    CHECK(summary.at("rows").size() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bench reruns are deterministic in MSE and serialized predictors") {
    const auto dir1 = fresh_dir("prb_bench_det1");
    const auto dir2 = fresh_dir("prb_bench_det2");
    const auto r1 = run(small_spec(dir1.string()));
    const auto r2 = run(small_spec(dir2.string()));
    REQUIRE(r1.rows.size() == 1);
    REQUIRE(r2.rows.size() == 1);
    CHECK(r1.rows[0].mse == r2.rows[0].mse);

    const auto rows1 = read_results_csv((dir1 / "results.csv").string());
    const auto rows2 = read_results_csv((dir2 / "results.csv").string());
    CHECK(rows1[0].mse == rows2[0].mse);

    CHECK(slurp_bytes((dir1 / "predictor_sff_2w.prbm").string()) ==
          slurp_bytes((dir2 / "predictor_sff_2w.prbm").string()));
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("oracle forecaster injected into the harness gives zero MSE") {
    const auto dir = fresh_dir("prb_bench_oracle");
    BenchmarkSpec spec = small_spec(dir.string());

    const TimeSeries series = cell_series(spec, 2);
    spec.oracle_override = [series](const TimeSeries& ctx, std::uint64_t) {
        SampleForecast f;
        f.start = ctx.end();
        f.horizon = 24;
        const std::size_t offset =
            static_cast<std::size_t>((ctx.end() - series.start()) / kSecondsPerHour);
        f.samples = {std::vector<double>(series.values().begin() + offset,
                                         series.values().begin() + offset + 24)};
        return f;
    };
    const auto result = run(spec);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].ok);
    CHECK(result.rows[0].mse == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("results CSV round trip and report rendering") {
    const auto dir = fresh_dir("prb_bench_report");
    std::vector<BenchmarkRow> rows;
    BenchmarkRow a;
    a.model = "sff";
    a.weeks = 2;
    a.ok = true;
    a.mse = 1.0 / 3.0;
    a.train_seconds_mean = 1.25;
    a.train_seconds_sd = 0.05;
    a.predict_ms_per_block_mean = 0.75;
    a.predict_ms_per_block_sd = 0.01;
    a.peak_rss_bytes = 123456;
    a.blocks = 2;
    BenchmarkRow b = a;
    b.model = "deepar";
    b.weeks = 4;
    b.mse = 0.125;
    rows = {a, b};
    write_results_csv((dir / "results.csv").string(), rows);

    const auto back = read_results_csv((dir / "results.csv").string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].model == rows[0].model);
    CHECK(back[0].mse == rows[0].mse); // exact round trip through format_double
    CHECK(back[1].mse == rows[1].mse);
    CHECK(back[0].peak_rss_bytes == 123456);

    std::ostringstream table;
    CHECK(report(dir.string(), table) == 0);
    const std::string text = table.str();
    CHECK(text.find("MSE") != std::string::npos);
    CHECK(text.find("Training time") != std::string::npos);
    CHECK(text.find("Prediction time") != std::string::npos);
    CHECK(text.find("sff") != std::string::npos);
    CHECK(text.find("deepar") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "fig_mse.csv"));
    CHECK(std::filesystem::exists(dir / "fig_train_seconds.csv"));
    CHECK(std::filesystem::exists(dir / "fig_predict_ms.csv"));

    // A row-level error surfaces and flips the exit code.
    BenchmarkRow bad;
    bad.model = "transformer";
    bad.weeks = 2;
    bad.ok = false;
    bad.error = "train: non-finite loss, with \"quotes\" and, commas";
    rows.push_back(bad);
    write_results_csv((dir / "results.csv").string(), rows);
    const auto reread = read_results_csv((dir / "results.csv").string());
    REQUIRE(reread.size() == 3);
    CHECK(!reread[2].ok);
    CHECK(reread[2].error == bad.error);
    std::ostringstream table2;
    CHECK(report(dir.string(), table2) == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("row-level failure does not abort the run") {
    const auto dir = fresh_dir("prb_bench_rowfail");
    BenchmarkSpec spec = small_spec(dir.string());
    spec.models = {models::ModelKind::sff};
    spec.weeks = {2};
    spec.base.context_length = 24 * 14; // longer than the 2-week training slice
    const auto result = run(spec);
    REQUIRE(result.rows.size() == 1);
    CHECK(!result.rows[0].ok);
    CHECK(result.error_count == 1);
    CHECK(!result.rows[0].error.empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("spec validation") {
    BenchmarkSpec spec;
    spec.models.clear();
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = BenchmarkSpec{};
    spec.repetitions = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = BenchmarkSpec{};
    spec.out_dir.clear();
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
