// prbcast: PRB-demand forecasting rApp toolkit.
//
//   prbcast bench run    --models ... --weeks ... --seed N --reps R --out DIR
//   prbcast bench report DIR
//   prbcast simulate     --scenario FILE --out DIR
//   prbcast serve-odu    --scenario FILE --listen HOST:PORT --speedup X
//   prbcast rapp run     --config FILE

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "prb/bench.hpp"
#include "prb/models.hpp"
#include "prb/net.hpp"
#include "prb/odu_server.hpp"
#include "prb/rapp.hpp"
#include "prb/traffic_sim.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_bench_run(const std::string& models_csv, const std::string& weeks_csv,
                  std::uint64_t seed, int reps, const std::string& out_dir, bool parallel) {
    prb::bench::BenchmarkSpec spec;
    spec.models.clear();
    for (const auto& name : split_list(models_csv))
        spec.models.push_back(prb::models::kind_from_name(name));
    spec.weeks.clear();
    for (const auto& w : split_list(weeks_csv)) spec.weeks.push_back(std::stoi(w));
    spec.seed = seed;
    spec.repetitions = reps;
    spec.out_dir = out_dir;
    spec.parallel = parallel;

    const auto result = prb::bench::run(spec);
    std::cout << "wrote " << result.results_csv_path << " (" << result.rows.size() << " rows, "
              << result.error_count << " errors)\n";
    return prb::bench::report(out_dir, std::cout);
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
    const auto cfg = prb::sim::scenario_from_json_file(scenario_path);
    const auto series = prb::sim::generate_scenario(cfg, out_dir);
    for (const auto& s : series)
        std::cout << out_dir << "/" << s.tenant_id() << ".csv: " << s.size() << " rows\n";
    return 0;
}

int cmd_serve_odu(const std::string& scenario_path, const std::string& listen,
                  double speedup, const std::string& log_csv, int start_hour) {
    const auto cfg = prb::sim::scenario_from_json_file(scenario_path);
    const auto series = prb::sim::generate_scenario(cfg);

    prb::o1::OduServerConfig server_cfg;
    auto [host, port] = prb::net::parse_endpoint(listen);
    server_cfg.listen_host = host;
    server_cfg.listen_port = port;
    server_cfg.speedup = speedup;
    server_cfg.start_hour = start_hour;
    server_cfg.allocation_log_csv = log_csv;

    prb::o1::OduServer server(series, server_cfg);
    server.start();
    std::cout << "o-du listening on " << host << ":" << server.port() << ", replaying "
              << series.front().size() << " hours at speedup " << speedup << "\n";

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_interrupted.load() && !server.replay_done())
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    if (server.replay_done()) {
        // Give late allocations a moment to arrive before shutdown.
        std::this_thread::sleep_for(std::chrono::seconds(2));
    }
    server.stop();
    const auto log = server.allocation_log();
    std::cout << "replay done; " << log.size() << " allocations logged\n";
    return 0;
}

int cmd_rapp_run(const std::string& config_path, const std::string& log_path,
                 int idle_timeout_ms) {
    auto cfg = prb::rapp::RappConfig::from_json_file(config_path);
    if (!log_path.empty()) cfg.log_path = log_path;

    std::ofstream log_stream;
    std::ostream* log = nullptr;
    if (!cfg.log_path.empty()) {
        log_stream.open(cfg.log_path, std::ios::binary);
        if (!log_stream) throw std::runtime_error("cannot open log file: " + cfg.log_path);
        log = &log_stream;
    }

    prb::rapp::RappEngine engine(cfg, log);
    prb::o1::ClientSession session(cfg.odu_host, cfg.odu_port);
    session.start();
    engine.run(session, idle_timeout_ms);
    session.stop();

    std::cout << "rapp done: " << engine.store().tenants().size() << " tenants, "
              << engine.journal().size() << " decisions\n";
    int actuated = 0;
    for (const auto& e : engine.journal())
        if (e.actuated) ++actuated;
    std::cout << "actuated: " << actuated << "/" << engine.journal().size() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PRB-demand probabilistic forecasting rApp toolkit"};
    app.require_subcommand(1);

    // bench
    auto* bench = app.add_subcommand("bench", "benchmark harness");
    bench->require_subcommand(1);

    std::string models_csv = "lstm,sff,deepar,transformer";
    std::string weeks_csv = "2,4,10,20";
    std::uint64_t seed = 42;
    int reps = 3;
    std::string out_dir = "bench-out";
    bool parallel = false;
    auto* bench_run = bench->add_subcommand("run", "run the model x data-length grid");
    bench_run->add_option("--models", models_csv, "comma list: lstm,sff,deepar,transformer");
    bench_run->add_option("--weeks", weeks_csv, "comma list of training lengths in weeks");
    bench_run->add_option("--seed", seed, "scenario seed");
    bench_run->add_option("--reps", reps, "timing repetitions per cell");
    bench_run->add_option("--out", out_dir, "output directory")->required();
    bench_run->add_flag("--parallel", parallel,
                        "run cells concurrently (timing comparisons not meaningful)");

    std::string report_dir;
    auto* bench_report = bench->add_subcommand("report", "render tables from a results dir");
    bench_report->add_option("dir", report_dir, "results directory")->required();

    // simulate
    std::string scenario_path, sim_out;
    auto* simulate = app.add_subcommand("simulate", "generate tenant demand CSVs");
    simulate->add_option("--scenario", scenario_path, "scenario JSON")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();

    // serve-odu
    std::string serve_scenario, listen = "127.0.0.1:3900", alloc_log;
    double speedup = 3600.0;
    int start_hour = 0;
    auto* serve = app.add_subcommand("serve-odu", "run the simulated O-DU");
    serve->add_option("--scenario", serve_scenario, "scenario JSON")->required();
    serve->add_option("--listen", listen, "host:port");
    serve->add_option("--speedup", speedup, "simulated hours per wall hour");
    serve->add_option("--allocation-log", alloc_log, "CSV dump path on shutdown");
    serve->add_option("--start-hour", start_hour, "resume replay from this hour");

    // rapp
    auto* rapp = app.add_subcommand("rapp", "the resource-provisioning rApp");
    rapp->require_subcommand(1);
    std::string rapp_config, rapp_log;
    int idle_timeout_ms = 10000;
    auto* rapp_run = rapp->add_subcommand("run", "run against a live O-DU");
    rapp_run->add_option("--config", rapp_config, "rApp config JSON")->required();
    rapp_run->add_option("--log", rapp_log, "structured event log path");
    rapp_run->add_option("--idle-timeout-ms", idle_timeout_ms,
                         "stop after this long without reports");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench_run->parsed())
            return cmd_bench_run(models_csv, weeks_csv, seed, reps, out_dir, parallel);
        if (bench_report->parsed()) return prb::bench::report(report_dir, std::cout);
        if (simulate->parsed()) return cmd_simulate(scenario_path, sim_out);
        if (serve->parsed())
            return cmd_serve_odu(serve_scenario, listen, speedup, alloc_log, start_hour);
        if (rapp_run->parsed()) return cmd_rapp_run(rapp_config, rapp_log, idle_timeout_ms);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
