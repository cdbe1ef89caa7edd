#include "prb/o1_client.hpp"

#include <chrono>
#include <stdexcept>

namespace prb::o1 {

ClientSession::ClientSession(std::string host, std::uint16_t port)
    : ClientSession(std::move(host), port, Options()) {}

ClientSession::ClientSession(std::string host, std::uint16_t port, Options opts)
    : host_(std::move(host)), port_(port), opts_(opts) {}

ClientSession::~ClientSession() { stop(); }

void ClientSession::start() {
    if (running_.load()) return;
    socket_ = net::connect_to(host_, port_, opts_.connect_timeout_ms);
    if (!socket_.valid() && !opts_.reconnect)
        throw std::runtime_error("o1 client: connection refused by " + host_ + ":" +
                                 std::to_string(port_));
    connected_.store(socket_.valid());
    running_.store(true);
    reader_ = std::thread([this] { reader_loop(); });
}

void ClientSession::stop() {
    if (!running_.exchange(false)) return;
    socket_.shutdown_and_close();
    queue_cv_.notify_all();
    ack_cv_.notify_all();
    if (reader_.joinable()) reader_.join();
}

std::optional<O1Message> ClientSession::next_report(int timeout_ms) {
    std::unique_lock<std::mutex> lock(queue_mutex_);
    if (!queue_cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                            [this] { return !reports_.empty() || !running_.load(); }))
        return std::nullopt;
    if (reports_.empty()) return std::nullopt;
    O1Message msg = std::move(reports_.front());
    reports_.pop_front();
    return msg;
}

ClientSession::SendResult ClientSession::send_allocation(O1Message alloc) {
    if (!connected_.load()) return {false, "not connected"};
    alloc.msg_id = next_msg_id_.fetch_add(1);
    const std::string frame = encode(alloc);
    {
        std::lock_guard<std::mutex> lock(ack_mutex_);
        pending_[alloc.msg_id] = Pending{};
    }
    {
        std::lock_guard<std::mutex> lock(send_mutex_);
        if (!socket_.send_all(frame)) {
            std::lock_guard<std::mutex> alock(ack_mutex_);
            pending_.erase(alloc.msg_id);
            return {false, "send failed"};
        }
    }
    std::unique_lock<std::mutex> lock(ack_mutex_);
    const bool got = ack_cv_.wait_for(lock, std::chrono::milliseconds(opts_.ack_timeout_ms),
                                      [&] { return pending_[alloc.msg_id].done || !running_.load(); });
    Pending result = pending_[alloc.msg_id];
    pending_.erase(alloc.msg_id);
    if (!got || !result.done) return {false, "ack timeout"};
    return {result.ok, result.error};
}

void ClientSession::reader_loop() {
    FrameBuffer frames;
    char buf[8192];
    while (running_.load()) {
        if (!socket_.valid()) {
            if (!opts_.reconnect) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(opts_.reconnect_backoff_ms));
            if (!running_.load()) break;
            net::Socket fresh = net::connect_to(host_, port_, opts_.connect_timeout_ms);
            if (!fresh.valid()) continue;
            {
                std::lock_guard<std::mutex> lock(send_mutex_);
                socket_ = std::move(fresh);
            }
            connected_.store(true);
            frames = FrameBuffer{}; // drop any partial frame from the old link
        }
        const long n = socket_.recv_some(buf, sizeof(buf));
        if (n <= 0) {
            connected_.store(false);
            {
                std::lock_guard<std::mutex> lock(send_mutex_);
                socket_.shutdown_and_close();
            }
            if (!opts_.reconnect || !running_.load()) break;
            continue;
        }
        frames.feed(buf, static_cast<std::size_t>(n));
        while (auto frame = frames.next_frame()) dispatch(*frame);
    }
    connected_.store(false);
}

void ClientSession::dispatch(const std::string& frame) {
    DecodeResult decoded = decode(frame);
    if (!decoded.ok()) return; // ignore undecodable inbound frames
    O1Message& msg = *decoded.msg;
    switch (msg.msg_type) {
        case MsgType::prb_history_report: {
            {
                std::lock_guard<std::mutex> lock(queue_mutex_);
                reports_.push_back(std::move(msg));
            }
            reports_received_.fetch_add(1);
            queue_cv_.notify_one();
            break;
        }
        case MsgType::ack: {
            std::lock_guard<std::mutex> lock(ack_mutex_);
            auto it = pending_.find(msg.msg_id);
            if (it != pending_.end()) {
                it->second.done = true;
                it->second.ok = true;
            }
            ack_cv_.notify_all();
            break;
        }
        case MsgType::error: {
            std::lock_guard<std::mutex> lock(ack_mutex_);
            auto it = pending_.find(msg.msg_id);
            if (it != pending_.end()) {
                it->second.done = true;
                it->second.ok = false;
                it->second.error = msg.error_code + ": " + msg.error_text;
            }
            ack_cv_.notify_all();
            break;
        }
        case MsgType::prb_allocation:
            break; // server-bound only; ignore
    }
}

} // namespace prb::o1
