#ifndef PRB_ODU_SERVER_HPP
#define PRB_ODU_SERVER_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "prb/net.hpp"
#include "prb/o1_message.hpp"
#include "prb/time_series.hpp"
#include "prb/traffic_sim.hpp"

namespace prb::o1 {

struct OduServerConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0; // 0 = ephemeral
    double speedup = 3600.0;       // simulated hours per wall-clock hour
    int start_hour = 0;            // resume point into the scenario
    std::string allocation_log_csv; // dumped on stop() when non-empty
};

struct AllocationRecord {
    std::string tenant_id;
    std::int64_t forecast_start = 0;
    std::vector<std::int64_t> prbs;
};

/**
 * Simulated O-DU: replays each tenant's scripted demand as
 * PRB_HISTORY_REPORT frames at one simulated hour per 3600/speedup wall
 * seconds, and accepts PRB_ALLOCATION frames, answering ACK. A subscriber
 * connecting mid-run first receives the backlog of reports already
 * emitted, then the live stream, so every subscriber observes the same
 * sequence (at-least-once across reconnects; the rApp deduplicates).
 */
class OduServer {
public:
    OduServer(std::vector<TimeSeries> tenants, OduServerConfig cfg);
    ~OduServer();

    /// Binds and launches the acceptor and replay threads.
    void start();
    /// Stops all threads, closes connections, dumps the allocation log.
    void stop();

    std::uint16_t port() const { return port_; }
    /// Simulated hours fully emitted so far.
    int clock_hours() const { return clock_hours_.load(); }
    bool replay_done() const { return replay_done_.load(); }

    std::vector<AllocationRecord> allocation_log() const;
    static void write_allocation_csv(std::ostream& out,
                                     const std::vector<AllocationRecord>& log);

private:
    struct Connection {
        net::Socket socket;
        std::mutex send_mutex;
        std::thread reader;
        std::atomic<bool> open{true};
    };

    void replay_loop();
    void accept_loop();
    void reader_loop(std::shared_ptr<Connection> conn);
    void handle_frame(Connection& conn, const std::string& frame);
    bool send_on(Connection& conn, const O1Message& msg);
    void broadcast(const std::string& encoded);

    std::vector<TimeSeries> tenants_;
    OduServerConfig cfg_;
    std::uint16_t port_ = 0;

    std::unique_ptr<net::Listener> listener_;
    std::thread acceptor_;
    std::thread replayer_;
    std::atomic<bool> running_{false};
    std::atomic<int> clock_hours_{0};
    std::atomic<bool> replay_done_{false};
    std::atomic<std::uint64_t> next_msg_id_{1};

    mutable std::mutex state_mutex_;
    std::vector<std::string> emitted_;             // encoded report backlog
    std::vector<AllocationRecord> allocations_;    // append-only log
    std::vector<std::shared_ptr<Connection>> connections_;
};

} // namespace prb::o1

#endif // PRB_ODU_SERVER_HPP
