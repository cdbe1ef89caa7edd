#ifndef PRB_O1_CLIENT_HPP
#define PRB_O1_CLIENT_HPP

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "prb/net.hpp"
#include "prb/o1_message.hpp"

namespace prb::o1 {

/**
 * rApp-side session against the simulated O-DU. Delivers decoded history
 * reports in arrival order and offers a blocking send_allocation that
 * waits for the matching ACK. On connection drop the session reconnects
 * and implicitly resubscribes (the server resends its backlog, giving
 * at-least-once delivery; the consumer deduplicates by timestamp).
 */
class ClientSession {
public:
    struct Options {
        bool reconnect = true;
        int connect_timeout_ms = 2000;
        int ack_timeout_ms = 2000;
        int reconnect_backoff_ms = 100;
    };

    struct SendResult {
        bool ok = false;
        std::string error;
    };

    ClientSession(std::string host, std::uint16_t port);
    ClientSession(std::string host, std::uint16_t port, Options opts);
    ~ClientSession();

    /// Connects and launches the reader. Throws on refused connection
    /// when reconnect is disabled; otherwise keeps retrying in background.
    void start();
    void stop();

    bool connected() const { return connected_.load(); }

    /// Next decoded PRB_HISTORY_REPORT, waiting up to timeout_ms.
    std::optional<O1Message> next_report(int timeout_ms);

    /// Sends one allocation (msg_id is stamped here) and waits for its ACK.
    SendResult send_allocation(O1Message alloc);

    std::size_t reports_received() const { return reports_received_.load(); }

private:
    void reader_loop();
    void dispatch(const std::string& frame);

    std::string host_;
    std::uint16_t port_;
    Options opts_;

    net::Socket socket_;
    std::mutex send_mutex_;
    std::thread reader_;
    std::atomic<bool> running_{false};
    std::atomic<bool> connected_{false};
    std::atomic<std::uint64_t> next_msg_id_{1};
    std::atomic<std::size_t> reports_received_{0};

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<O1Message> reports_;

    struct Pending {
        bool done = false;
        bool ok = false;
        std::string error;
    };
    std::mutex ack_mutex_;
    std::condition_variable ack_cv_;
    std::map<std::uint64_t, Pending> pending_;
};

} // namespace prb::o1

#endif // PRB_O1_CLIENT_HPP
