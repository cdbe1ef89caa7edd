#include "prb/odu_server.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace prb::o1 {

OduServer::OduServer(std::vector<TimeSeries> tenants, OduServerConfig cfg)
    : tenants_(std::move(tenants)), cfg_(std::move(cfg)) {
    if (tenants_.empty()) throw std::invalid_argument("OduServer: no tenant series");
    if (cfg_.speedup <= 0.0) throw std::invalid_argument("OduServer: speedup must be > 0");
}

OduServer::~OduServer() { stop(); }

void OduServer::start() {
    if (running_.load()) return;
    listener_ = std::make_unique<net::Listener>(cfg_.listen_host, cfg_.listen_port);
    port_ = listener_->bound_port();
    running_.store(true);
    clock_hours_.store(cfg_.start_hour);
    acceptor_ = std::thread([this] { accept_loop(); });
    replayer_ = std::thread([this] { replay_loop(); });
}

void OduServer::stop() {
    if (!running_.exchange(false)) return;
    if (listener_) listener_->close_listener();
    {
        std::lock_guard<std::mutex> lock(state_mutex_);
        for (auto& conn : connections_) conn->socket.shutdown_and_close();
    }
    if (replayer_.joinable()) replayer_.join();
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard<std::mutex> lock(state_mutex_);
        for (auto& conn : connections_)
            if (conn->reader.joinable()) conn->reader.join();
        connections_.clear();
    }
    if (!cfg_.allocation_log_csv.empty()) {
        std::ofstream out(cfg_.allocation_log_csv, std::ios::binary);
        if (out) write_allocation_csv(out, allocation_log());
    }
}

std::vector<AllocationRecord> OduServer::allocation_log() const {
    std::lock_guard<std::mutex> lock(state_mutex_);
    return allocations_;
}

void OduServer::write_allocation_csv(std::ostream& out,
                                     const std::vector<AllocationRecord>& log) {
    out << "tenant_id,forecast_start,hour_index,prbs\n";
    for (const auto& rec : log)
        for (std::size_t h = 0; h < rec.prbs.size(); ++h)
            out << rec.tenant_id << ',' << format_iso8601(rec.forecast_start) << ',' << h << ','
                << rec.prbs[h] << '\n';
}

void OduServer::replay_loop() {
    const int total_hours = static_cast<int>(tenants_.front().size());
    const auto interval =
        std::chrono::duration<double>(kSecondsPerHour / cfg_.speedup);
    auto deadline = std::chrono::steady_clock::now();

    for (int hour = cfg_.start_hour; hour < total_hours && running_.load(); ++hour) {
        for (const auto& tenant : tenants_) {
            if (hour >= static_cast<int>(tenant.size())) continue;
            const O1Message report = O1Message::history_report(
                next_msg_id_.fetch_add(1), tenant.tenant_id(),
                tenant.time_at(static_cast<std::size_t>(hour)),
                tenant[static_cast<std::size_t>(hour)]);
            broadcast(encode(report));
        }
        clock_hours_.store(hour + 1);
        deadline += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval);
        while (running_.load()) {
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) break;
            const auto chunk = std::min(deadline - now,
                                        std::chrono::steady_clock::duration(
                                            std::chrono::milliseconds(50)));
            std::this_thread::sleep_for(chunk);
        }
    }
    replay_done_.store(true);
}

void OduServer::broadcast(const std::string& encoded) {
    std::vector<std::shared_ptr<Connection>> conns;
    {
        std::lock_guard<std::mutex> lock(state_mutex_);
        emitted_.push_back(encoded);
        conns = connections_;
    }
    for (auto& conn : conns) {
        if (!conn->open.load()) continue;
        std::lock_guard<std::mutex> lock(conn->send_mutex);
        if (!conn->socket.send_all(encoded)) conn->open.store(false);
    }
}

void OduServer::accept_loop() {
    while (running_.load()) {
        net::Socket client = listener_->accept_client();
        if (!client.valid()) {
            if (!running_.load()) return;
            continue;
        }
        auto conn = std::make_shared<Connection>();
        conn->socket = std::move(client);

        // Connection == subscription: ship the backlog first so every
        // subscriber sees the same report sequence from hour zero.
        std::vector<std::string> backlog;
        {
            std::lock_guard<std::mutex> lock(state_mutex_);
            backlog = emitted_;
            connections_.push_back(conn);
        }
        {
            std::lock_guard<std::mutex> lock(conn->send_mutex);
            for (const auto& frame : backlog)
                if (!conn->socket.send_all(frame)) {
                    conn->open.store(false);
                    break;
                }
        }
        conn->reader = std::thread([this, conn] { reader_loop(conn); });
    }
}

void OduServer::reader_loop(std::shared_ptr<Connection> conn) {
    FrameBuffer frames;
    char buf[4096];
    while (running_.load() && conn->open.load()) {
        const long n = conn->socket.recv_some(buf, sizeof(buf));
        if (n <= 0) break;
        frames.feed(buf, static_cast<std::size_t>(n));
        while (auto frame = frames.next_frame()) handle_frame(*conn, *frame);
    }
    conn->open.store(false);
}

void OduServer::handle_frame(Connection& conn, const std::string& frame) {
    DecodeResult decoded = decode(frame);
    if (!decoded.ok()) {
        send_on(conn, O1Message::make_error(0, "", 0, "DECODE", decoded.error));
        return; // malformed frame: report and keep the connection open
    }
    const O1Message& msg = *decoded.msg;
    if (msg.msg_type != MsgType::prb_allocation) {
        send_on(conn, O1Message::make_error(msg.msg_id, msg.tenant_id, msg.timestamp,
                                            "UNSUPPORTED", "O-DU accepts PRB_ALLOCATION only"));
        return;
    }

    {
        std::lock_guard<std::mutex> lock(state_mutex_);
        const bool duplicate =
            std::any_of(allocations_.begin(), allocations_.end(), [&](const AllocationRecord& r) {
                return r.tenant_id == msg.tenant_id && r.forecast_start == msg.forecast_start;
            });
        // Re-delivered allocations (client retry after a lost ACK) are
        // acknowledged but recorded once.
        if (!duplicate)
            allocations_.push_back(AllocationRecord{msg.tenant_id, msg.forecast_start, msg.prbs});
    }
    send_on(conn, O1Message::make_ack(msg.msg_id, msg.tenant_id, msg.timestamp));
}

bool OduServer::send_on(Connection& conn, const O1Message& msg) {
    std::lock_guard<std::mutex> lock(conn.send_mutex);
    if (!conn.socket.send_all(encode(msg))) {
        conn.open.store(false);
        return false;
    }
    return true;
}

} // namespace prb::o1
