#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "prb/rapp.hpp"
#include "prb/rng.hpp"
#include "prb/traffic_sim.hpp"

using namespace prb;
using namespace prb::rapp;

namespace {

QuantileForecast constant_quantiles(double value, std::size_t horizon = 24) {
    QuantileForecast q;
    q.start = 0;
    q.horizon = horizon;
    q.values.assign(QuantileForecast::kNumLevels, std::vector<double>(horizon, value));
    return q;
}

TimeSeries constant_history(double c, std::size_t n) {
    return TimeSeries("tenant-a", 1767225600, std::vector<double>(n, c));
}

} // namespace

TEST_CASE("monitoring store registers, orders, and deduplicates") {
    MonitoringStore store;
    CHECK(!store.has("a"));
    CHECK(store.ingest("a", 3600, 5.0) == MonitoringStore::Ingest::accepted);
    CHECK(store.has("a"));
    CHECK(store.size("a") == 1);

    // Duplicate timestamp: rejected, store unchanged.
    CHECK(store.ingest("a", 3600, 9.0) == MonitoringStore::Ingest::duplicate);
    CHECK(store.size("a") == 1);
    CHECK(store.snapshot("a")[0] == 5.0);

    // Stale (earlier) timestamp: rejected.
    CHECK(store.ingest("a", 0, 1.0) == MonitoringStore::Ingest::duplicate);

    // Non-contiguous jump: rejected to keep the hourly invariant.
    CHECK(store.ingest("a", 3600 * 5, 1.0) == MonitoringStore::Ingest::gap);
    CHECK(store.size("a") == 1);

    CHECK(store.ingest("a", 7200, 6.0) == MonitoringStore::Ingest::accepted);
    CHECK(store.size("a") == 2);
    CHECK_THROWS_AS(store.snapshot("nope"), std::out_of_range);
}

TEST_CASE("336 sequential reports replay into an ordered store") {
    MonitoringStore store;
    sim::TenantProfile p;
    const TimeSeries s = sim::generate(p, 336, 3);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(store.ingest("x", s.time_at(i), s[i]) == MonitoringStore::Ingest::accepted);
    CHECK(store.size("x") == 336);
    const TimeSeries snap = store.snapshot("x");
    for (std::size_t i = 0; i < 336; ++i) {
        CHECK(snap[i] == s[i]);
        CHECK(snap.time_at(i) == s.time_at(i));
    }
}

TEST_CASE("retention horizon bounds the buffer") {
    MonitoringStore store(48);
    for (int i = 0; i < 100; ++i)
        store.ingest("a", 3600LL * (i + 1), static_cast<double>(i));
    CHECK(store.size("a") == 48);
    const TimeSeries snap = store.snapshot("a");
    CHECK(snap[0] == 52.0); // oldest 52 dropped
    CHECK(snap.time_at(0) == 3600LL * 53);
}

TEST_CASE("policy validation and cost-ratio level") {
    PolicyConfig p;
    p.quantile_level = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = PolicyConfig{};
    p.min_prbs = 10;
    p.max_prbs = 5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    PolicyConfig ratio;
    ratio.use_cost_ratio = true;
    ratio.cost_under = 9.0;
    ratio.cost_over = 1.0;
    CHECK(ratio.effective_level() == 90);
    ratio.cost_under = 1.0;
    ratio.cost_over = 1.0;
    CHECK(ratio.effective_level() == 50);
    ratio.cost_under = 999.0;
    ratio.cost_over = 1e-6;
    CHECK(ratio.effective_level() == 99); // clamped into 1..99
}

TEST_CASE("decide: rounding and clamping oracles") {
    Provenance prov{"deepar", 0, "fp", 0.0, 0.0};

    PolicyConfig ceil_policy;
    ceil_policy.quantile_level = 90;
    Decision d1 = decide(constant_quantiles(10.0), ceil_policy, "a", prov);
    for (auto v : d1.allocation) CHECK(v == 10);
    CHECK(d1.allocation.size() == 24);

    Decision d2 = decide(constant_quantiles(10.2), ceil_policy, "a", prov);
    for (auto v : d2.allocation) CHECK(v == 11);

    PolicyConfig capped = ceil_policy;
    capped.max_prbs = 100;
    Decision d3 = decide(constant_quantiles(250.0), capped, "a", prov);
    for (auto v : d3.allocation) CHECK(v == 100);

    PolicyConfig floored = ceil_policy;
    floored.rounding = PolicyConfig::Rounding::floor;
    Decision d4 = decide(constant_quantiles(10.9), floored, "a", prov);
    for (auto v : d4.allocation) CHECK(v == 10);

    PolicyConfig rounded = ceil_policy;
    rounded.rounding = PolicyConfig::Rounding::round;
    Decision d5 = decide(constant_quantiles(10.4), rounded, "a", prov);
    for (auto v : d5.allocation) CHECK(v == 10);

    PolicyConfig minimum = ceil_policy;
    minimum.min_prbs = 20;
    Decision d6 = decide(constant_quantiles(3.0), minimum, "a", prov);
    for (auto v : d6.allocation) CHECK(v == 20);

    CHECK(d1.provenance.quantile_level == 90);
    CHECK(d1.id() != d2.id());
    CHECK(d1.id() == decide(constant_quantiles(10.0), ceil_policy, "a", prov).id());
}

TEST_CASE("decision monotonicity in the quantile level") {
    Rng rng(83);
    for (int trial = 0; trial < 30; ++trial) {
        // Random sample forecast -> non-crossing quantiles by construction.
        SampleForecast f;
        f.start = 0;
        f.horizon = 24;
        f.samples.assign(40, std::vector<double>(24));
        for (auto& path : f.samples)
            for (double& v : path) v = std::max(0.0, rng.normal(60.0, 25.0));
        const QuantileForecast q = to_quantiles(f);

        Provenance prov;
        PolicyConfig lo, hi;
        lo.quantile_level = static_cast<int>(1 + rng.uniform_index(98));
        hi.quantile_level = static_cast<int>(lo.quantile_level +
                                             rng.uniform_index(99 - lo.quantile_level) + 1);
        const Decision dl = decide(q, lo, "a", prov);
        const Decision dh = decide(q, hi, "a", prov);
        for (std::size_t i = 0; i < dl.allocation.size(); ++i)
            CHECK(dh.allocation[i] >= dl.allocation[i]);
    }
}

TEST_CASE("run_analytics enforces its history precondition") {
    models::EstimatorConfig cfg;
    cfg.kind = models::ModelKind::sff;
    CHECK_THROWS_AS(run_analytics(constant_history(50.0, 47), cfg), std::invalid_argument);
    CHECK(min_history_for(cfg) == 60); // floor(0.8*60) = 48 = one training window
    cfg.kind = models::ModelKind::lstm;
    CHECK(min_history_for(cfg) == 32);
}

TEST_CASE("run_analytics on a constant tenant pins the median near the constant") {
    models::EstimatorConfig cfg;
    cfg.kind = models::ModelKind::sff;
    cfg.seed = 7;
    const AnalyticsResult r = run_analytics(constant_history(50.0, 72), cfg);
    CHECK(r.quantiles.horizon == 24);
    for (double v : r.quantiles.level(50)) CHECK(std::fabs(v - 50.0) <= 5.0);
    CHECK(r.train_seconds >= 0.0);
    CHECK(r.predict_seconds >= 0.0);
}

TEST_CASE("run_analytics is deterministic per (history, seed)") {
    sim::TenantProfile p;
    const TimeSeries history("tenant-a", 1767225600,
                             sim::generate(p, 96, 17).values());
    models::EstimatorConfig cfg;
    cfg.kind = models::ModelKind::deepar;
    cfg.seed = 23;
    const AnalyticsResult a = run_analytics(history, cfg);
    const AnalyticsResult b = run_analytics(history, cfg);
    CHECK(a.quantiles.values == b.quantiles.values);
    CHECK(a.predictor.fingerprint() == b.predictor.fingerprint());
}

TEST_CASE("single-path forecasts collapse the quantile matrix") {
    models::EstimatorConfig cfg;
    cfg.kind = models::ModelKind::lstm;
    cfg.seed = 11;
    const AnalyticsResult r = run_analytics(constant_history(30.0, 72), cfg);
    for (int k = 1; k <= 99; ++k) CHECK(r.quantiles.level(k) == r.quantiles.level(50));
}

TEST_CASE("engine ingest + cadence produce journaled decisions with q50 floor") {
    RappConfig rcfg;
    rcfg.model.kind = models::ModelKind::sff;
    rcfg.model.seed = 3;
    rcfg.policy.quantile_level = 90;
    rcfg.seed = 3;

    std::ostringstream events;
    RappEngine engine(rcfg, &events);

    sim::TenantProfile p;
    const TimeSeries s = sim::generate(p, 90, 29);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto report =
            o1::O1Message::history_report(i + 1, "tenant-a", s.time_at(i), s[i]);
        CHECK(engine.ingest(report));
        engine.process_due_tenants(nullptr);
    }
    // min history 60, cadence 24: decisions at 60 and 84 hours.
    REQUIRE(engine.journal().size() == 2);
    for (const auto& e : engine.journal()) {
        CHECK(e.decision.allocation.size() == 24);
        for (std::size_t i = 0; i < 24; ++i) {
            // ceil(q90) >= q90 >= q50 >= floor(q50): quantile monotonicity
            // carried through the decision.
            CHECK(static_cast<double>(e.decision.allocation[i]) >= std::floor(e.q50[i]));
        }
    }
    // Duplicate report rejected.
    const auto dup = o1::O1Message::history_report(999, "tenant-a", s.time_at(10), 1.0);
    CHECK(!engine.ingest(dup));

    // Structured one-JSON-object-per-line event log.
    std::istringstream lines(events.str());
    std::string line;
    int ingest_events = 0, decide_events = 0;
    while (std::getline(lines, line)) {
        REQUIRE(!line.empty());
        CHECK(line.front() == '{');
        if (line.find("\"event\":\"ingest\"") != std::string::npos) ++ingest_events;
        if (line.find("\"event\":\"decide\"") != std::string::npos) ++decide_events;
    }
    CHECK(ingest_events == 91);
    CHECK(decide_events == 2);
}

TEST_CASE("rapp config file round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "prb_rapp_cfg";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "rapp.json").string();
    {
        std::ofstream out(path);
        out << R"({
            "model": {"kind": "deepar", "epochs": 5, "num_eval_samples": 100},
            "policy": {"quantile_level": 90, "rounding": "ceil", "min_prbs": 0, "max_prbs": 500},
            "odu_endpoint": "127.0.0.1:4711",
            "retrain_every_hours": 24,
            "seed": 99
        })";
    }
    const RappConfig cfg = RappConfig::from_json_file(path);
    CHECK(cfg.model.kind == models::ModelKind::deepar);
    CHECK(cfg.policy.quantile_level == 90);
    CHECK(cfg.policy.max_prbs == 500);
    CHECK(cfg.odu_host == "127.0.0.1");
    CHECK(cfg.odu_port == 4711);
    CHECK(cfg.seed == 99);
    CHECK(cfg.model.seed == 99);
    std::filesystem::remove_all(dir);
}
