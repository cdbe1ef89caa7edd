#include "prb/time_series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prb {

TimeSeries::TimeSeries(std::string tenant_id, std::int64_t start_epoch_s, std::vector<double> values)
    : tenant_id_(std::move(tenant_id)), start_(start_epoch_s), values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("TimeSeries: values must be non-empty");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("TimeSeries: non-finite value");
        if (v < 0.0) throw std::invalid_argument("TimeSeries: negative demand value");
    }
}

TimeSeries TimeSeries::allow_negative(std::string tenant_id, std::int64_t start_epoch_s,
                                      std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("TimeSeries: values must be non-empty");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("TimeSeries: non-finite value");
    TimeSeries s("", start_epoch_s, {0.0});
    s.tenant_id_ = std::move(tenant_id);
    s.values_ = std::move(values);
    return s;
}

TimeSeries TimeSeries::slice(std::size_t from, std::size_t count) const {
    if (from + count > values_.size() || count == 0)
        throw std::out_of_range("TimeSeries::slice out of range");
    return TimeSeries(tenant_id_, time_at(from),
                      std::vector<double>(values_.begin() + from, values_.begin() + from + count));
}

TimeSeries TimeSeries::tail(std::size_t n) const {
    if (n == 0 || n > values_.size()) throw std::out_of_range("TimeSeries::tail out of range");
    return slice(values_.size() - n, n);
}

void SampleForecast::validate() const {
    if (samples.empty()) throw std::invalid_argument("SampleForecast: need at least one sample path");
    for (const auto& path : samples) {
        if (path.size() != horizon)
            throw std::invalid_argument("SampleForecast: path length != horizon");
        for (double v : path)
            if (!std::isfinite(v)) throw std::invalid_argument("SampleForecast: non-finite entry");
    }
}

const std::vector<double>& QuantileForecast::level(int k) const {
    if (k < 1 || k > kNumLevels) throw std::out_of_range("QuantileForecast: level outside 1..99");
    return values[static_cast<std::size_t>(k - 1)];
}

std::vector<double> Scaler::scale(const std::vector<double>& xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = scale(xs[i]);
    return out;
}

std::vector<double> Scaler::unscale(const std::vector<double>& zs) const {
    std::vector<double> out(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) out[i] = unscale(zs[i]);
    return out;
}

std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& series, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_train_test: fraction must be in (0,1)");
    const std::size_t n = series.size();
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction));
    if (cut == 0 || cut >= n)
        throw std::invalid_argument("split_train_test: series too short for a non-empty split");
    return {series.slice(0, cut), series.slice(cut, n - cut)};
}

QuantileForecast to_quantiles(const SampleForecast& f) {
    f.validate();
    const std::size_t n = f.num_samples();
    if (n < 2) throw std::invalid_argument("to_quantiles: need at least 2 samples");

    QuantileForecast q;
    q.start = f.start;
    q.horizon = f.horizon;
    q.values.assign(QuantileForecast::kNumLevels, std::vector<double>(f.horizon));

    std::vector<double> column(n);
    for (std::size_t h = 0; h < f.horizon; ++h) {
        for (std::size_t s = 0; s < n; ++s) column[s] = f.samples[s][h];
        std::sort(column.begin(), column.end());
        for (int k = 1; k <= QuantileForecast::kNumLevels; ++k) {
            // Linear interpolation between order statistics at p*(n-1).
            const double pos = (static_cast<double>(k) / 100.0) * static_cast<double>(n - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(lo);
            const double qv = (lo + 1 < n) ? column[lo] + frac * (column[lo + 1] - column[lo])
                                           : column[lo];
            q.values[static_cast<std::size_t>(k - 1)][h] = qv;
        }
    }
    return q;
}

PointForecast mean_point(const SampleForecast& f) {
    f.validate();
    PointForecast p;
    p.start = f.start;
    p.values.assign(f.horizon, 0.0);
    for (const auto& path : f.samples)
        for (std::size_t h = 0; h < f.horizon; ++h) p.values[h] += path[h];
    const double inv = 1.0 / static_cast<double>(f.num_samples());
    for (double& v : p.values) v *= inv;
    return p;
}

double mse(const std::vector<double>& actual, const std::vector<double>& predicted) {
    if (actual.size() != predicted.size() || actual.empty())
        throw std::invalid_argument("mse: length mismatch or empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double d = actual[i] - predicted[i];
        acc += d * d;
    }
    return acc / static_cast<double>(actual.size());
}

double mse(const TimeSeries& actual, const PointForecast& predicted) {
    return mse(actual.values(), predicted.values);
}

double interval_coverage(const QuantileForecast& q, const std::vector<double>& actual,
                         int lo_level, int hi_level) {
    if (lo_level < 1 || hi_level > QuantileForecast::kNumLevels || lo_level >= hi_level)
        throw std::invalid_argument("interval_coverage: require 1 <= lo < hi <= 99");
    if (actual.size() != q.horizon)
        throw std::invalid_argument("interval_coverage: length mismatch");
    const auto& lo = q.level(lo_level);
    const auto& hi = q.level(hi_level);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (lo[i] <= actual[i] && actual[i] <= hi[i]) ++covered;
    return static_cast<double>(covered) / static_cast<double>(actual.size());
}

std::pair<Scaler, TimeSeries> standardize(const TimeSeries& train) {
    const auto& xs = train.values();
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(xs.size()); // population variance
    double sd = std::sqrt(var);
    if (sd == 0.0) sd = 1.0;

    Scaler scaler{mean, sd};
    std::vector<double> scaled(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) scaled[i] = scaler.scale(xs[i]);
    return {scaler, TimeSeries::allow_negative(train.tenant_id(), train.start(), std::move(scaled))};
}

std::string format_double(double v) {
    char buf[40];
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

void write_series_csv(std::ostream& out, const TimeSeries& series) {
    out << "tenant_id,timestamp_iso8601,prb_demand\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series.tenant_id() << ',' << format_iso8601(series.time_at(i)) << ','
            << format_double(series[i]) << '\n';
    }
}

void write_series_csv_file(const std::string& path, const TimeSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_series_csv(out, series);
}

TimeSeries read_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("tenant_id,timestamp_iso8601,prb_demand", 0) != 0)
        throw std::invalid_argument("series CSV: missing or wrong header");
    std::string tenant;
    std::int64_t start = 0;
    std::int64_t prev = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("series CSV: malformed row: " + line);
        const std::string id = line.substr(0, c1);
        const std::int64_t ts = parse_iso8601(line.substr(c1 + 1, c2 - c1 - 1));
        const double v = std::strtod(line.c_str() + c2 + 1, nullptr);
        if (values.empty()) {
            tenant = id;
            start = ts;
        } else {
            if (id != tenant) throw std::invalid_argument("series CSV: mixed tenant ids");
            if (ts <= prev) throw std::invalid_argument("series CSV: timestamps not increasing");
            if (ts - prev != kSecondsPerHour)
                throw std::invalid_argument("series CSV: non-hourly step");
        }
        prev = ts;
        values.push_back(v);
    }
    return TimeSeries(tenant, start, std::move(values));
}

TimeSeries read_series_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return read_series_csv(in);
}

} // namespace prb
