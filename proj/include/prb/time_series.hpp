#ifndef PRB_TIME_SERIES_HPP
#define PRB_TIME_SERIES_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "prb/time_util.hpp"

namespace prb {

/**
 * Hourly PRB-demand history for one tenant. Values are non-negative reals
 * at a fixed one-hour step. Immutable after construction; all checks run
 * in the constructor.
 */
class TimeSeries {
public:
    TimeSeries(std::string tenant_id, std::int64_t start_epoch_s, std::vector<double> values);

    /// Builds a series that may carry negative values (standardized data).
    /// Demand series from external inputs always go through the checked
    /// constructor instead.
    static TimeSeries allow_negative(std::string tenant_id, std::int64_t start_epoch_s,
                                     std::vector<double> values);

    const std::string& tenant_id() const { return tenant_id_; }
    std::int64_t start() const { return start_; }
    std::int64_t step_seconds() const { return kSecondsPerHour; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Timestamp of point i.
    std::int64_t time_at(std::size_t i) const {
        return start_ + static_cast<std::int64_t>(i) * kSecondsPerHour;
    }
    /// Timestamp one step past the last point.
    std::int64_t end() const { return time_at(values_.size()); }

    /// Sub-series [from, from+count). Throws on out-of-range.
    TimeSeries slice(std::size_t from, std::size_t count) const;
    /// The trailing n points.
    TimeSeries tail(std::size_t n) const;

private:
    std::string tenant_id_;
    std::int64_t start_;
    std::vector<double> values_;
};

/// Raw forecast draws: num_samples x horizon matrix of sample paths.
struct SampleForecast {
    std::int64_t start = 0;
    std::size_t horizon = 0;
    std::vector<std::vector<double>> samples;

    std::size_t num_samples() const { return samples.size(); }
    void validate() const; // throws on shape/finiteness violations
};

/// Percentile matrix: row k-1 holds the k-th percentile per forecast hour,
/// k in 1..99. Non-crossing across levels at every hour.
struct QuantileForecast {
    std::int64_t start = 0;
    std::size_t horizon = 0;
    std::vector<std::vector<double>> values; // 99 x horizon

    static constexpr int kNumLevels = 99;
    /// Row for an integer percentile level in 1..99.
    const std::vector<double>& level(int k) const;
};

/// Single-point forecast per horizon step.
struct PointForecast {
    std::int64_t start = 0;
    std::vector<double> values;
};

/**
 * Invertible affine scaler fitted on training data only: population mean
 * and standard deviation; a zero deviation falls back to 1 so constant
 * series scale to all-zero and invert exactly.
 */
struct Scaler {
    double mean = 0.0;
    double sd = 1.0;

    double scale(double x) const { return (x - mean) / sd; }
    double unscale(double z) const { return z * sd + mean; }
    std::vector<double> scale(const std::vector<double>& xs) const;
    std::vector<double> unscale(const std::vector<double>& zs) const;
};

/// Leading floor(len * train_fraction) points and the remainder.
/// Throws if either side would be empty.
std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& series, double train_fraction);

/// Empirical percentiles 1..99 per forecast hour, linear interpolation
/// between order statistics at position p*(n-1). Needs >= 2 samples.
QuantileForecast to_quantiles(const SampleForecast& f);

/// Per-hour arithmetic mean across sample paths.
PointForecast mean_point(const SampleForecast& f);

/// Mean squared error between an actual slice and a point forecast.
/// Throws on length mismatch.
double mse(const std::vector<double>& actual, const std::vector<double>& predicted);
double mse(const TimeSeries& actual, const PointForecast& predicted);

/// Fraction of hours where q[lo] <= actual <= q[hi]. Boundary counts as covered.
double interval_coverage(const QuantileForecast& q, const std::vector<double>& actual,
                         int lo_level, int hi_level);

/// Fits a Scaler on the series and returns it with the scaled series.
std::pair<Scaler, TimeSeries> standardize(const TimeSeries& train);

// --- CSV interchange -------------------------------------------------------
// Format: header "tenant_id,timestamp_iso8601,prb_demand", one row per hour,
// rows strictly increasing in time.

void write_series_csv(std::ostream& out, const TimeSeries& series);
void write_series_csv_file(const std::string& path, const TimeSeries& series);
TimeSeries read_series_csv(std::istream& in);
TimeSeries read_series_csv_file(const std::string& path);

/// Formats a double with round-trip precision (shortest exact form).
std::string format_double(double v);

} // namespace prb

#endif // PRB_TIME_SERIES_HPP
