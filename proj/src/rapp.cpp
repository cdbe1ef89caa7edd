#include "prb/rapp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "prb/net.hpp"
#include "prb/rng.hpp"
#include "prb/time_util.hpp"

namespace prb::rapp {

using nlohmann::json;

void PolicyConfig::validate() const {
    if (quantile_level < 1 || quantile_level > 99)
        throw std::invalid_argument("policy: quantile_level outside 1..99");
    if (min_prbs < 0 || max_prbs < min_prbs)
        throw std::invalid_argument("policy: need 0 <= min_prbs <= max_prbs");
    if (use_cost_ratio && (cost_under <= 0.0 || cost_over <= 0.0))
        throw std::invalid_argument("policy: cost ratio needs positive costs");
}

int PolicyConfig::effective_level() const {
    if (!use_cost_ratio) return quantile_level;
    const int level =
        static_cast<int>(std::lround(100.0 * cost_under / (cost_under + cost_over)));
    return std::min(99, std::max(1, level));
}

std::string rounding_name(PolicyConfig::Rounding r) {
    switch (r) {
        case PolicyConfig::Rounding::ceil: return "ceil";
        case PolicyConfig::Rounding::round: return "round";
        case PolicyConfig::Rounding::floor: return "floor";
    }
    throw std::logic_error("unknown rounding");
}

PolicyConfig::Rounding rounding_from_name(const std::string& name) {
    if (name == "ceil") return PolicyConfig::Rounding::ceil;
    if (name == "round") return PolicyConfig::Rounding::round;
    if (name == "floor") return PolicyConfig::Rounding::floor;
    throw std::invalid_argument("unknown rounding: " + name);
}

std::string Decision::id() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (char c : tenant_id) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    mix(static_cast<std::uint64_t>(forecast_start));
    for (std::int64_t v : allocation) mix(static_cast<std::uint64_t>(v));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

MonitoringStore::MonitoringStore(int retention_hours) : retention_hours_(retention_hours) {}

MonitoringStore::Ingest MonitoringStore::ingest(const std::string& tenant_id,
                                                std::int64_t timestamp, double value) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = buffers_.find(tenant_id);
    if (it == buffers_.end()) {
        // Unknown tenants auto-register on first report.
        buffers_[tenant_id] = Buffer{timestamp, {value}};
        return Ingest::accepted;
    }
    Buffer& buf = it->second;
    const std::int64_t expected =
        buf.start + static_cast<std::int64_t>(buf.values.size()) * kSecondsPerHour;
    if (timestamp < expected) return Ingest::duplicate;
    if (timestamp > expected) return Ingest::gap;
    buf.values.push_back(value);
    if (retention_hours_ > 0 &&
        buf.values.size() > static_cast<std::size_t>(retention_hours_)) {
        const std::size_t drop = buf.values.size() - static_cast<std::size_t>(retention_hours_);
        buf.values.erase(buf.values.begin(),
                         buf.values.begin() + static_cast<std::ptrdiff_t>(drop));
        buf.start += static_cast<std::int64_t>(drop) * kSecondsPerHour;
    }
    return Ingest::accepted;
}

bool MonitoringStore::has(const std::string& tenant_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return buffers_.count(tenant_id) > 0;
}

std::size_t MonitoringStore::size(const std::string& tenant_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = buffers_.find(tenant_id);
    return it == buffers_.end() ? 0 : it->second.values.size();
}

TimeSeries MonitoringStore::snapshot(const std::string& tenant_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = buffers_.find(tenant_id);
    if (it == buffers_.end()) throw std::out_of_range("store: unknown tenant " + tenant_id);
    return TimeSeries(tenant_id, it->second.start, it->second.values);
}

std::vector<std::string> MonitoringStore::tenants() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, buf] : buffers_) out.push_back(id);
    return out;
}

std::size_t min_history_for(const models::EstimatorConfig& cfg) {
    const std::size_t ctx = static_cast<std::size_t>(cfg.context_length);
    const std::size_t effective_horizon =
        cfg.kind == models::ModelKind::lstm ? 1 : static_cast<std::size_t>(cfg.horizon);
    // The leading 80% must supply at least one training window and the
    // full history at least one prediction context.
    std::size_t n = ctx + effective_horizon + 1;
    while (static_cast<std::size_t>(std::floor(static_cast<double>(n) * 0.8)) <
           ctx + effective_horizon)
        ++n;
    return std::max(n, ctx + 1);
}

AnalyticsResult run_analytics(const TimeSeries& history, const models::EstimatorConfig& cfg) {
    if (history.size() < min_history_for(cfg))
        throw std::invalid_argument("run_analytics: insufficient history for tenant " +
                                    history.tenant_id() + " (" + std::to_string(history.size()) +
                                    " < " + std::to_string(min_history_for(cfg)) + ")");

    auto [train_slice, test_slice] = split_train_test(history, 0.8);
    (void)test_slice; // held out; the live pipeline decides on fresh data

    models::Predictor predictor = models::train(train_slice, cfg);

    const auto t0 = std::chrono::steady_clock::now();
    SampleForecast f = models::predict(predictor, history, models::derive_seed(cfg.seed, 0x9d));
    const double predict_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    QuantileForecast q;
    if (f.num_samples() >= 2) {
        q = to_quantiles(f);
    } else {
        // Deterministic single-path forecast: every percentile collapses
        // onto the path.
        q.start = f.start;
        q.horizon = f.horizon;
        q.values.assign(QuantileForecast::kNumLevels, f.samples.front());
    }
    const double train_seconds = predictor.meta.wall_seconds;
    return AnalyticsResult{std::move(predictor), std::move(q), train_seconds, predict_seconds};
}

Decision decide(const QuantileForecast& q, const PolicyConfig& policy,
                const std::string& tenant_id, const Provenance& provenance) {
    policy.validate();
    const int level = policy.effective_level();
    const auto& row = q.level(level);
    Decision d;
    d.tenant_id = tenant_id;
    d.forecast_start = q.start;
    d.provenance = provenance;
    d.provenance.quantile_level = level;
    d.allocation.reserve(row.size());
    for (double v : row) {
        double r;
        switch (policy.rounding) {
            case PolicyConfig::Rounding::ceil: r = std::ceil(v); break;
            case PolicyConfig::Rounding::round: r = std::round(v); break;
            case PolicyConfig::Rounding::floor: r = std::floor(v); break;
            default: throw std::logic_error("unknown rounding");
        }
        std::int64_t prbs = static_cast<std::int64_t>(r);
        prbs = std::max(policy.min_prbs, std::min(policy.max_prbs, prbs));
        d.allocation.push_back(prbs);
    }
    return d;
}

RappConfig RappConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rapp config: " + path);
    json j;
    in >> j;

    RappConfig cfg;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        cfg.model.kind = models::kind_from_name(m.value("kind", std::string("deepar")));
        cfg.model.epochs = m.value("epochs", cfg.model.epochs);
        cfg.model.context_length = m.value("context_length", cfg.model.context_length);
        cfg.model.horizon = m.value("horizon", cfg.model.horizon);
        cfg.model.num_eval_samples = m.value("num_eval_samples", cfg.model.num_eval_samples);
    }
    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        cfg.policy.quantile_level = p.value("quantile_level", cfg.policy.quantile_level);
        if (p.contains("rounding"))
            cfg.policy.rounding = rounding_from_name(p.at("rounding").get<std::string>());
        cfg.policy.min_prbs = p.value("min_prbs", cfg.policy.min_prbs);
        cfg.policy.max_prbs = p.value("max_prbs", cfg.policy.max_prbs);
        cfg.policy.use_cost_ratio = p.value("use_cost_ratio", cfg.policy.use_cost_ratio);
        cfg.policy.cost_under = p.value("cost_under", cfg.policy.cost_under);
        cfg.policy.cost_over = p.value("cost_over", cfg.policy.cost_over);
    }
    if (j.contains("odu_endpoint")) {
        auto [host, port] = net::parse_endpoint(j.at("odu_endpoint").get<std::string>());
        cfg.odu_host = host;
        cfg.odu_port = port;
    }
    cfg.retrain_every_hours = j.value("retrain_every_hours", cfg.retrain_every_hours);
    cfg.actuate_attempts = j.value("actuate_attempts", cfg.actuate_attempts);
    cfg.actuate_backoff_ms = j.value("actuate_backoff_ms", cfg.actuate_backoff_ms);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.model.seed = cfg.seed;
    cfg.store_retention_hours = j.value("store_retention_hours", cfg.store_retention_hours);
    cfg.log_path = j.value("log_path", cfg.log_path);
    return cfg;
}

RappEngine::RappEngine(RappConfig cfg, std::ostream* event_log)
    : cfg_(std::move(cfg)), store_(cfg_.store_retention_hours), event_log_(event_log) {
    cfg_.policy.validate();
    cfg_.model.validate();
}

void RappEngine::log_event(const std::string& json_line) {
    if (event_log_) (*event_log_) << json_line << '\n';
}

bool RappEngine::ingest(const o1::O1Message& report) {
    if (report.msg_type != o1::MsgType::prb_history_report) return false;
    const auto result = store_.ingest(report.tenant_id, report.timestamp, report.prb_demand);
    const char* outcome = result == MonitoringStore::Ingest::accepted ? "accepted"
                          : result == MonitoringStore::Ingest::duplicate ? "duplicate"
                                                                         : "gap";
    log_event(json{{"event", "ingest"},
                   {"tenant_id", report.tenant_id},
                   {"timestamp", format_iso8601(report.timestamp)},
                   {"prb_demand", report.prb_demand},
                   {"result", outcome}}
                  .dump());
    return result == MonitoringStore::Ingest::accepted;
}

void RappEngine::process_due_tenants(o1::ClientSession* session) {
    for (const auto& tenant : store_.tenants()) {
        const std::size_t len = store_.size(tenant);
        if (len < min_history_for(cfg_.model)) continue;
        const auto it = last_train_size_.find(tenant);
        const std::size_t last = it == last_train_size_.end() ? 0 : it->second;
        if (last != 0 && len < last + static_cast<std::size_t>(cfg_.retrain_every_hours))
            continue;
        last_train_size_[tenant] = len;
        analyze_decide_actuate(tenant, session);
    }
}

void RappEngine::analyze_decide_actuate(const std::string& tenant, o1::ClientSession* session) {
    const TimeSeries history = store_.snapshot(tenant);
    models::EstimatorConfig cfg = cfg_.model;
    const std::uint64_t round = retrain_counter_[tenant]++;
    cfg.seed = models::derive_seed(cfg_.seed ^ hash_u64(std::hash<std::string>{}(tenant)), round);

    AnalyticsResult analytics = run_analytics(history, cfg);

    Provenance prov;
    prov.model = models::kind_name(cfg.kind);
    prov.predictor_fingerprint = analytics.predictor.fingerprint();
    prov.train_seconds = analytics.train_seconds;
    prov.predict_seconds = analytics.predict_seconds;

    Decision d = decide(analytics.quantiles, cfg_.policy, tenant, prov);
    log_event(json{{"event", "decide"},
                   {"tenant_id", tenant},
                   {"forecast_start", format_iso8601(d.forecast_start)},
                   {"decision_id", d.id()},
                   {"model", prov.model},
                   {"quantile_level", d.provenance.quantile_level},
                   {"allocation", d.allocation},
                   {"train_seconds", prov.train_seconds},
                   {"predict_seconds", prov.predict_seconds}}
                  .dump());

    JournalEntry entry;
    entry.decision = d;
    entry.q50 = analytics.quantiles.level(50);
    entry.q_applied = analytics.quantiles.level(d.provenance.quantile_level);

    if (session && actuated_ids_.insert(d.id()).second) {
        o1::O1Message alloc = o1::O1Message::allocation(
            0, tenant, d.forecast_start, d.forecast_start, d.allocation);
        int attempt = 0;
        int backoff = cfg_.actuate_backoff_ms;
        for (; attempt < cfg_.actuate_attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            const auto result = session->send_allocation(alloc);
            if (result.ok) {
                entry.actuated = true;
                entry.error.clear();
                break;
            }
            entry.error = result.error;
        }
        entry.attempts = std::min(attempt + 1, cfg_.actuate_attempts);
        if (!entry.actuated) actuated_ids_.erase(d.id());
        log_event(json{{"event", "actuate"},
                       {"tenant_id", tenant},
                       {"decision_id", d.id()},
                       {"attempts", entry.attempts},
                       {"ok", entry.actuated},
                       {"error", entry.error}}
                      .dump());
    }
    journal_.push_back(std::move(entry));
}

void RappEngine::run(o1::ClientSession& session, int idle_timeout_ms) {
    for (;;) {
        auto report = session.next_report(idle_timeout_ms);
        if (!report) return; // stream idle: replay finished or link lost
        ingest(*report);
        process_due_tenants(&session);
    }
}

} // namespace prb::rapp
