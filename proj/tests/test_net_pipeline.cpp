#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <thread>

#include "prb/net.hpp"
#include "prb/o1_client.hpp"
#include "prb/odu_server.hpp"
#include "prb/rapp.hpp"
#include "prb/traffic_sim.hpp"

using namespace prb;
using namespace prb::o1;

namespace {

std::vector<TimeSeries> tiny_scenario(int hours, int tenants = 1, std::uint64_t seed = 5) {
    sim::ScenarioConfig cfg;
    cfg.weeks = 1;
    cfg.seed = seed;
    for (int i = 0; i < tenants; ++i) {
        sim::TenantProfile p;
        p.tenant_id = "t" + std::to_string(i);
        cfg.tenants.push_back(p);
    }
    auto all = sim::generate_scenario(cfg);
    std::vector<TimeSeries> out;
    for (auto& s : all) out.push_back(s.slice(0, static_cast<std::size_t>(hours)));
    return out;
}

OduServerConfig fast_server(double speedup = 360000.0) {
    OduServerConfig cfg;
    cfg.listen_port = 0;
    cfg.speedup = speedup; // 10 ms per simulated hour at 360000
    return cfg;
}

void drain_replay(const OduServer& server, int max_ms = 10000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(max_ms);
    while (!server.replay_done() && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
}

} // namespace

TEST_CASE("full scenario replay delivers one report per simulated hour") {
    const int hours = 48;
    OduServer server(tiny_scenario(hours), fast_server());
    server.start();

    ClientSession client("127.0.0.1", server.port());
    client.start();

    int received = 0;
    std::int64_t prev_ts = 0;
    while (auto msg = client.next_report(2000)) {
        REQUIRE(msg->msg_type == MsgType::prb_history_report);
        if (received > 0) CHECK(msg->timestamp == prev_ts + kSecondsPerHour);
        prev_ts = msg->timestamp;
        if (++received == hours) break;
    }
    CHECK(received == hours);
    client.stop();
    server.stop();
}

TEST_CASE("two subscribers receive identical report streams") {
    const int hours = 30;
    OduServer server(tiny_scenario(hours), fast_server());
    server.start();

    ClientSession a("127.0.0.1", server.port());
    a.start();
    // Stagger the second subscription into the middle of the replay: the
    // backlog resend must make both streams identical.
    std::this_thread::sleep_for(std::chrono::milliseconds(120));
    ClientSession b("127.0.0.1", server.port());
    b.start();

    auto collect = [&](ClientSession& c) {
        std::vector<std::pair<std::int64_t, double>> got;
        while (auto msg = c.next_report(1500)) {
            got.emplace_back(msg->timestamp, msg->prb_demand);
            if (static_cast<int>(got.size()) == hours) break;
        }
        return got;
    };
    const auto ga = collect(a);
    const auto gb = collect(b);
    CHECK(ga.size() == static_cast<std::size_t>(hours));
    CHECK(ga == gb);
    a.stop();
    b.stop();
    server.stop();
}

TEST_CASE("allocation is acked and logged once, duplicates are absorbed") {
    OduServer server(tiny_scenario(10), fast_server());
    server.start();
    ClientSession client("127.0.0.1", server.port());
    client.start();

    std::vector<std::int64_t> prbs(kAllocationHorizon, 7);
    O1Message alloc = O1Message::allocation(0, "t0", 3600, 7200, prbs);
    const auto r1 = client.send_allocation(alloc);
    CHECK(r1.ok);
    // Retrying the same allocation (lost-ACK scenario) must stay recorded once.
    const auto r2 = client.send_allocation(alloc);
    CHECK(r2.ok);

    const auto log = server.allocation_log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].tenant_id == "t0");
    CHECK(log[0].prbs == prbs);
    client.stop();
    server.stop();
}

TEST_CASE("malformed inbound frame gets an ERROR reply and the link survives") {
    OduServer server(tiny_scenario(6), fast_server());
    server.start();

    net::Socket raw = net::connect_to("127.0.0.1", server.port());
    REQUIRE(raw.valid());
    REQUIRE(raw.send_all("this is not json\n"));

    // The ERROR frame arrives amid replayed history; scan for it.
    FrameBuffer fb;
    char buf[4096];
    bool saw_error = false;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(3);
    while (!saw_error && std::chrono::steady_clock::now() < deadline) {
        const long n = raw.recv_some(buf, sizeof(buf));
        if (n <= 0) break;
        fb.feed(buf, static_cast<std::size_t>(n));
        while (auto frame = fb.next_frame()) {
            const auto decoded = decode(*frame);
            if (decoded.ok() && decoded.msg->msg_type == MsgType::error) saw_error = true;
        }
    }
    CHECK(saw_error);

    // Connection still usable for a valid allocation.
    std::vector<std::int64_t> prbs(kAllocationHorizon, 1);
    REQUIRE(raw.send_all(encode(O1Message::allocation(77, "t0", 3600, 7200, prbs))));
    bool saw_ack = false;
    const auto deadline2 = std::chrono::steady_clock::now() + std::chrono::seconds(3);
    while (!saw_ack && std::chrono::steady_clock::now() < deadline2) {
        const long n = raw.recv_some(buf, sizeof(buf));
        if (n <= 0) break;
        fb.feed(buf, static_cast<std::size_t>(n));
        while (auto frame = fb.next_frame()) {
            const auto decoded = decode(*frame);
            if (decoded.ok() && decoded.msg->msg_type == MsgType::ack &&
                decoded.msg->msg_id == 77)
                saw_ack = true; // ACK echoes the acknowledged msg_id
        }
    }
    CHECK(saw_ack);
    raw.shutdown_and_close();
    server.stop();
}

TEST_CASE("connecting to a down endpoint reports a connection error") {
    ClientSession::Options opts;
    opts.reconnect = false;
    opts.connect_timeout_ms = 300;
    ClientSession client("127.0.0.1", 1, opts); // port 1: nothing listens
    CHECK_THROWS_AS(client.start(), std::runtime_error);
}

TEST_CASE("send_allocation fails after the server goes away") {
    auto server = std::make_unique<OduServer>(tiny_scenario(6), fast_server());
    server->start();
    ClientSession::Options opts;
    opts.reconnect = true;
    opts.ack_timeout_ms = 200;
    opts.reconnect_backoff_ms = 50;
    ClientSession client("127.0.0.1", server->port(), opts);
    client.start();
    drain_replay(*server);
    server->stop();
    server.reset();
    std::this_thread::sleep_for(std::chrono::milliseconds(100));

    std::vector<std::int64_t> prbs(kAllocationHorizon, 2);
    const auto r = client.send_allocation(O1Message::allocation(0, "t0", 3600, 7200, prbs));
    CHECK(!r.ok);
    CHECK(!r.error.empty());
    client.stop();
}

TEST_CASE("server restart: client resumes with no duplicate rows in the store") {
    const int hours = 40;
    const int restart_at = 16;
    const auto scenario = tiny_scenario(hours);

    auto server1 = std::make_unique<OduServer>(scenario, fast_server(3600.0 * 20));
    // 50 ms per simulated hour.
    server1->start();
    const std::uint16_t port = server1->port();

    ClientSession::Options opts;
    opts.reconnect = true;
    opts.reconnect_backoff_ms = 30;
    ClientSession client("127.0.0.1", port, opts);
    client.start();

    rapp::RappConfig rcfg;
    rcfg.model.kind = models::ModelKind::sff;
    rapp::RappEngine engine(rcfg, nullptr);

    int ingested = 0;
    const auto overall_deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    bool restarted = false;
    std::unique_ptr<OduServer> server2;
    while (ingested < hours && std::chrono::steady_clock::now() < overall_deadline) {
        if (!restarted && server1 && server1->clock_hours() >= restart_at) {
            const int resume_from = std::max(0, server1->clock_hours() - 5);
            server1->stop();
            server1.reset();
            OduServerConfig cfg2 = fast_server(3600.0 * 20);
            cfg2.listen_port = port;
            cfg2.start_hour = resume_from; // overlap re-delivers a few hours
            server2 = std::make_unique<OduServer>(scenario, cfg2);
            server2->start();
            restarted = true;
        }
        auto msg = client.next_report(500);
        if (!msg) continue;
        if (engine.ingest(*msg)) ++ingested;
    }
    CHECK(restarted);
    CHECK(ingested == hours);
    CHECK(engine.store().size("t0") == static_cast<std::size_t>(hours));
    const TimeSeries snap = engine.store().snapshot("t0");
    for (std::size_t i = 0; i < snap.size(); ++i) CHECK(snap[i] == scenario[0][i]);

    client.stop();
    if (server2) server2->stop();
}

TEST_CASE("replay pacing tracks the configured speedup") {
    // 25 simulated hours at 100 ms per hour: about 2.5 s of wall clock.
    const int hours = 25;
    OduServer server(tiny_scenario(hours), fast_server(36000.0));
    const auto t0 = std::chrono::steady_clock::now();
    server.start();
    drain_replay(server, 15000);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    server.stop();
    const double expected = hours * 3600.0 / 36000.0;
    CHECK(elapsed > expected * 0.7);
    CHECK(elapsed < expected * 1.3);
}
