#include "prb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "prb/rng.hpp"
#include "prb/telemetry.hpp"
#include "prb/time_util.hpp"

namespace prb::bench {

using nlohmann::json;

void BenchmarkSpec::validate() const {
    if (models.empty() || weeks.empty())
        throw std::invalid_argument("bench: model and week sets must be non-empty");
    if (repetitions < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
    for (int w : weeks)
        if (w < 1) throw std::invalid_argument("bench: weeks must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("bench: out_dir required");
}

TimeSeries cell_series(const BenchmarkSpec& spec, int weeks) {
    // One series per data length, shared by every model for comparability.
    return sim::generate(spec.profile, weeks * static_cast<int>(kHoursPerWeek),
                         models::derive_seed(spec.seed, static_cast<std::uint64_t>(weeks)));
}

namespace {

struct CellOutcome {
    BenchmarkRow row;
    std::vector<TelemetrySampler::Sample> telemetry;
};

double mean_of(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    return m / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

CellOutcome run_cell(const BenchmarkSpec& spec, models::ModelKind kind, int weeks,
                     bool collect_telemetry) {
    CellOutcome outcome;
    BenchmarkRow& row = outcome.row;
    row.model = models::kind_name(kind);
    row.weeks = weeks;
    try {
        const TimeSeries series = cell_series(spec, weeks);
        auto [train_slice, test_slice] = split_train_test(series, 0.8);

        models::EstimatorConfig cfg = spec.base;
        cfg.kind = kind;
        cfg.seed = spec.seed;

        TelemetrySampler sampler(spec.telemetry_interval_ms);
        std::vector<double> train_secs, predict_ms;
        for (int rep = 0; rep < spec.repetitions; ++rep) {
            if (spec.oracle_override) {
                const auto eval = models::evaluate_with(spec.oracle_override, train_slice,
                                                        test_slice, cfg);
                row.mse = rep == 0 ? eval.mse : row.mse;
                row.blocks = eval.blocks;
                train_secs.push_back(0.0);
                predict_ms.push_back(eval.predict_seconds / eval.blocks * 1000.0);
                continue;
            }

            sampler.begin_phase("train");
            models::Predictor p = models::train(train_slice, cfg);
            sampler.end_phase();
            train_secs.push_back(p.meta.wall_seconds);

            sampler.begin_phase("predict");
            const auto eval = models::evaluate(p, test_slice, cfg);
            sampler.end_phase();
            predict_ms.push_back(eval.predict_seconds / eval.blocks * 1000.0);

            if (rep == 0) {
                row.mse = eval.mse;
                row.blocks = eval.blocks;
                if (spec.save_predictors) {
                    const std::string prefix = spec.out_dir + "/predictor_" + row.model + "_" +
                                               std::to_string(weeks) + "w";
                    models::save_predictor(prefix, p);
                }
            }
        }
        row.train_seconds_mean = mean_of(train_secs);
        row.train_seconds_sd = sd_of(train_secs);
        row.predict_ms_per_block_mean = mean_of(predict_ms);
        row.predict_ms_per_block_sd = sd_of(predict_ms);
        row.peak_rss_bytes = sampler.peak_rss_bytes();
        if (collect_telemetry) outcome.telemetry = sampler.samples();
        row.ok = true;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    return outcome;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_phase_telemetry(const std::string& out_dir, const std::string& model,
                           const std::vector<TelemetrySampler::Sample>& samples) {
    for (const char* phase : {"train", "predict"}) {
        const std::string path = out_dir + "/telemetry_" + model + "_" + phase + ".csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) continue;
        out << "# rss=" << (TelemetrySampler::rss_available() ? "available" : "unavailable")
            << "\n";
        out << "phase,elapsed_s,rss_bytes\n";
        for (const auto& s : samples) {
            if (s.phase != phase) continue;
            char line[160];
            std::snprintf(line, sizeof(line), "%s,%.3f,%lld\n", s.phase.c_str(), s.elapsed_s,
                          s.rss_bytes);
            out << line;
        }
    }
}

} // namespace

void write_results_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "model,weeks,mse,train_seconds_mean,train_seconds_sd,predict_ms_per_block_mean,"
           "predict_ms_per_block_sd,peak_rss_bytes,blocks,error\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.weeks << ',';
        if (r.ok) {
            out << format_double(r.mse) << ',' << format_double(r.train_seconds_mean) << ','
                << format_double(r.train_seconds_sd) << ','
                << format_double(r.predict_ms_per_block_mean) << ','
                << format_double(r.predict_ms_per_block_sd) << ',' << r.peak_rss_bytes << ','
                << r.blocks << ',';
        } else {
            out << ",,,,,,," << csv_quote(r.error);
        }
        out << '\n';
    }
}

std::vector<BenchmarkRow> read_results_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open results: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("model,weeks,", 0) != 0)
        throw std::runtime_error("results csv: bad header");
    std::vector<BenchmarkRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    field += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(field);
                field.clear();
            } else {
                field += c;
            }
        }
        fields.push_back(field);
        if (fields.size() != 10) throw std::runtime_error("results csv: bad row: " + line);
        BenchmarkRow r;
        r.model = fields[0];
        r.weeks = std::stoi(fields[1]);
        r.error = fields[9];
        r.ok = r.error.empty();
        if (r.ok) {
            r.mse = std::strtod(fields[2].c_str(), nullptr);
            r.train_seconds_mean = std::strtod(fields[3].c_str(), nullptr);
            r.train_seconds_sd = std::strtod(fields[4].c_str(), nullptr);
            r.predict_ms_per_block_mean = std::strtod(fields[5].c_str(), nullptr);
            r.predict_ms_per_block_sd = std::strtod(fields[6].c_str(), nullptr);
            r.peak_rss_bytes = std::strtoll(fields[7].c_str(), nullptr, 10);
            r.blocks = std::stoi(fields[8]);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

BenchmarkResult run(const BenchmarkSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(spec.out_dir);

    const int telemetry_weeks = *std::max_element(spec.weeks.begin(), spec.weeks.end());

    BenchmarkResult result;
    std::mutex rows_mutex;
    auto execute = [&](models::ModelKind kind, int weeks) {
        const bool collect = weeks == telemetry_weeks;
        CellOutcome outcome = run_cell(spec, kind, weeks, collect);
        if (collect && outcome.row.ok)
            write_phase_telemetry(spec.out_dir, outcome.row.model, outcome.telemetry);
        std::lock_guard<std::mutex> lock(rows_mutex);
        result.rows.push_back(std::move(outcome.row));
    };

    if (spec.parallel) {
        std::vector<std::thread> workers;
        for (auto kind : spec.models)
            for (int weeks : spec.weeks) workers.emplace_back(execute, kind, weeks);
        for (auto& w : workers) w.join();
    } else {
        // Sequential by default: one cell at a time keeps the wall-clock
        // comparisons between models meaningful.
        for (auto kind : spec.models)
            for (int weeks : spec.weeks) execute(kind, weeks);
    }

    std::sort(result.rows.begin(), result.rows.end(), [](const auto& a, const auto& b) {
        if (a.model != b.model) return a.model < b.model;
        return a.weeks < b.weeks;
    });
    for (const auto& r : result.rows)
        if (!r.ok) ++result.error_count;

    result.results_csv_path = spec.out_dir + "/results.csv";
    write_results_csv(result.results_csv_path, result.rows);

    json summary;
    summary["generated_at"] = format_iso8601(static_cast<std::int64_t>(std::time(nullptr)));
    summary["seed"] = spec.seed;
    summary["repetitions"] = spec.repetitions;
    summary["parallel"] = spec.parallel;
    summary["timing_comparable"] = !spec.parallel;
    summary["weeks"] = spec.weeks;
    json jmodels = json::array();
    for (auto kind : spec.models) jmodels.push_back(models::kind_name(kind));
    summary["models"] = jmodels;
    summary["error_count"] = result.error_count;
    json jrows = json::array();
    for (const auto& r : result.rows) {
        json jr{{"model", r.model}, {"weeks", r.weeks}, {"ok", r.ok}};
        if (r.ok) {
            jr["mse"] = r.mse;
            jr["train_seconds_mean"] = r.train_seconds_mean;
            jr["train_seconds_sd"] = r.train_seconds_sd;
            jr["predict_ms_per_block_mean"] = r.predict_ms_per_block_mean;
            jr["predict_ms_per_block_sd"] = r.predict_ms_per_block_sd;
            jr["peak_rss_bytes"] = r.peak_rss_bytes;
            jr["blocks"] = r.blocks;
        } else {
            jr["error"] = r.error;
        }
        jrows.push_back(std::move(jr));
    }
    summary["rows"] = jrows;
    result.summary_json_path = spec.out_dir + "/summary.json";
    std::ofstream sj(result.summary_json_path, std::ios::binary);
    sj << summary.dump(2) << '\n';

    return result;
}

namespace {

std::vector<int> sorted_weeks(const std::vector<BenchmarkRow>& rows) {
    std::vector<int> weeks;
    for (const auto& r : rows)
        if (std::find(weeks.begin(), weeks.end(), r.weeks) == weeks.end())
            weeks.push_back(r.weeks);
    std::sort(weeks.begin(), weeks.end());
    return weeks;
}

std::vector<std::string> sorted_models(const std::vector<BenchmarkRow>& rows) {
    // Deterministic section order, baseline first as in the reference table.
    const std::vector<std::string> canonical = {"lstm", "sff", "deepar", "transformer"};
    std::vector<std::string> out;
    for (const auto& m : canonical)
        for (const auto& r : rows)
            if (r.model == m && std::find(out.begin(), out.end(), m) == out.end())
                out.push_back(m);
    for (const auto& r : rows)
        if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
    return out;
}

const BenchmarkRow* find_row(const std::vector<BenchmarkRow>& rows, const std::string& model,
                             int weeks) {
    for (const auto& r : rows)
        if (r.model == model && r.weeks == weeks) return &r;
    return nullptr;
}

void print_section(std::ostream& out, const std::string& title,
                   const std::vector<BenchmarkRow>& rows, const std::vector<std::string>& mods,
                   const std::vector<int>& weeks,
                   const std::function<double(const BenchmarkRow&)>& value) {
    out << "  " << title << "\n";
    out << "  " << std::string(14, ' ');
    for (int w : weeks) {
        char head[32];
        std::snprintf(head, sizeof(head), "%9dw", w);
        out << head;
    }
    out << "\n";
    for (const auto& m : mods) {
        char name[32];
        std::snprintf(name, sizeof(name), "  %-14s", m.c_str());
        out << name;
        for (int w : weeks) {
            const BenchmarkRow* r = find_row(rows, m, w);
            char cell[32];
            if (r && r->ok)
                std::snprintf(cell, sizeof(cell), "%10.4g", value(*r));
            else
                std::snprintf(cell, sizeof(cell), "%10s", r ? "ERR" : "-");
            out << cell;
        }
        out << "\n";
    }
    out << "\n";
}

void write_figure_csv(const std::string& path, const std::vector<BenchmarkRow>& rows,
                      const std::function<double(const BenchmarkRow&)>& value) {
    std::ofstream out(path, std::ios::binary);
    out << "model,weeks,value\n";
    for (const auto& r : rows)
        if (r.ok) out << r.model << ',' << r.weeks << ',' << format_double(value(r)) << '\n';
}

} // namespace

int report(const std::string& dir, std::ostream& out) {
    const auto rows = read_results_csv(dir + "/results.csv");
    if (rows.empty()) throw std::runtime_error("report: no rows in results.csv");

    const auto weeks = sorted_weeks(rows);
    const auto mods = sorted_models(rows);

    out << "Forecast benchmark (" << dir << ")\n\n";
    print_section(out, "MSE", rows, mods, weeks, [](const BenchmarkRow& r) { return r.mse; });
    print_section(out, "Training time (seconds, mean of reps)", rows, mods, weeks,
                  [](const BenchmarkRow& r) { return r.train_seconds_mean; });
    print_section(out, "Prediction time (ms per 24h block, mean of reps)", rows, mods, weeks,
                  [](const BenchmarkRow& r) { return r.predict_ms_per_block_mean; });

    write_figure_csv(dir + "/fig_mse.csv", rows,
                     [](const BenchmarkRow& r) { return r.mse; });
    write_figure_csv(dir + "/fig_train_seconds.csv", rows,
                     [](const BenchmarkRow& r) { return r.train_seconds_mean; });
    write_figure_csv(dir + "/fig_predict_ms.csv", rows,
                     [](const BenchmarkRow& r) { return r.predict_ms_per_block_mean; });

    int errors = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            out << "ERROR " << r.model << " " << r.weeks << "w: " << r.error << "\n";
            ++errors;
        }
    return errors == 0 ? 0 : 1;
}

} // namespace prb::bench
