#ifndef PRB_RAPP_HPP
#define PRB_RAPP_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "prb/models.hpp"
#include "prb/o1_client.hpp"
#include "prb/o1_message.hpp"
#include "prb/time_series.hpp"

namespace prb::rapp {

/**
 * Decision Engine policy: allocate the configured percentile of forecast
 * demand per hour, rounded and clamped. The optional asymmetric-cost mode
 * derives the percentile from the under/over-provisioning cost ratio,
 * level = 100 * c_under / (c_under + c_over).
 */
struct PolicyConfig {
    enum class Rounding { ceil, round, floor };

    int quantile_level = 90;
    Rounding rounding = Rounding::ceil;
    std::int64_t min_prbs = 0;
    std::int64_t max_prbs = 1000000;

    bool use_cost_ratio = false;
    double cost_under = 9.0;
    double cost_over = 1.0;

    void validate() const;
    /// Level actually applied: quantile_level, or the cost-ratio level.
    int effective_level() const;
};

std::string rounding_name(PolicyConfig::Rounding r);
PolicyConfig::Rounding rounding_from_name(const std::string& name);

struct Provenance {
    std::string model;
    int quantile_level = 0;
    std::string predictor_fingerprint;
    double train_seconds = 0.0;
    double predict_seconds = 0.0;
};

struct Decision {
    std::string tenant_id;
    std::int64_t forecast_start = 0;
    std::vector<std::int64_t> allocation; // one entry per forecast hour
    Provenance provenance;

    /// Content hash over tenant, start and allocation; keys at-most-once
    /// actuation under retry.
    std::string id() const;
};

/**
 * Per-tenant append-only demand history. Timestamps must advance in
 * whole hourly steps; duplicates and gaps are rejected so every buffer
 * stays a valid hourly series. Unknown tenants register on first report.
 * Single-writer / multi-reader with snapshot reads.
 */
class MonitoringStore {
public:
    enum class Ingest { accepted, duplicate, gap };

    explicit MonitoringStore(int retention_hours = 0); // 0 = unbounded

    Ingest ingest(const std::string& tenant_id, std::int64_t timestamp, double value);
    bool has(const std::string& tenant_id) const;
    std::size_t size(const std::string& tenant_id) const;
    TimeSeries snapshot(const std::string& tenant_id) const;
    std::vector<std::string> tenants() const;

private:
    struct Buffer {
        std::int64_t start = 0;
        std::vector<double> values;
    };

    mutable std::mutex mutex_;
    std::map<std::string, Buffer> buffers_;
    int retention_hours_;
};

struct AnalyticsResult {
    models::Predictor predictor;
    QuantileForecast quantiles;
    double train_seconds = 0.0;
    double predict_seconds = 0.0;
};

/// Analytical Engine: 80:20 split, train on the leading slice (training
/// standardizes internally), forecast the next horizon from the latest
/// context, reduce to percentiles. Throws on insufficient history.
AnalyticsResult run_analytics(const TimeSeries& history, const models::EstimatorConfig& cfg);

/// Smallest history length run_analytics accepts for this configuration.
std::size_t min_history_for(const models::EstimatorConfig& cfg);

/// Decision Engine: percentile row -> rounding -> clamping.
Decision decide(const QuantileForecast& q, const PolicyConfig& policy,
                const std::string& tenant_id, const Provenance& provenance);

struct RappConfig {
    models::EstimatorConfig model;
    PolicyConfig policy;
    std::string odu_host = "127.0.0.1";
    std::uint16_t odu_port = 3900;
    int retrain_every_hours = 24;
    int actuate_attempts = 3;
    int actuate_backoff_ms = 200;
    std::uint64_t seed = 1;
    int store_retention_hours = 0;
    std::string log_path; // structured JSON event log; empty = stderr only when verbose

    static RappConfig from_json_file(const std::string& path);
};

struct JournalEntry {
    Decision decision;
    std::vector<double> q50;      // median row kept for pipeline diagnostics
    std::vector<double> q_applied;
    bool actuated = false;
    int attempts = 0;
    std::string error;
};

/**
 * The rApp wired end to end: Monitoring System (ingest + dedup),
 * Analytical Engine (train/predict on cadence), Decision Engine
 * (quantile policy) and Actuator (allocation over the O1 session with
 * bounded retry). One logical worker drives the loop.
 */
class RappEngine {
public:
    RappEngine(RappConfig cfg, std::ostream* event_log = nullptr);

    /// Feeds one report through the Monitoring System. Returns true when
    /// the store accepted it.
    bool ingest(const o1::O1Message& report);

    /// Runs analytics+decision+actuation for every tenant whose history
    /// crossed the retrain cadence. session may be null (no actuation;
    /// used by tests that only exercise the decision path).
    void process_due_tenants(o1::ClientSession* session);

    /// Consumes the session's report stream until it stays idle for
    /// idle_timeout_ms, driving the full pipeline.
    void run(o1::ClientSession& session, int idle_timeout_ms);

    const std::vector<JournalEntry>& journal() const { return journal_; }
    const MonitoringStore& store() const { return store_; }
    const RappConfig& config() const { return cfg_; }

private:
    void log_event(const std::string& json_line);
    void analyze_decide_actuate(const std::string& tenant, o1::ClientSession* session);

    RappConfig cfg_;
    MonitoringStore store_;
    std::ostream* event_log_;
    std::map<std::string, std::size_t> last_train_size_;
    std::map<std::string, std::uint64_t> retrain_counter_;
    std::set<std::string> actuated_ids_;
    std::vector<JournalEntry> journal_;
};

} // namespace prb::rapp

#endif // PRB_RAPP_HPP
