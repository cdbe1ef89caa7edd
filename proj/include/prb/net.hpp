#ifndef PRB_NET_HPP
#define PRB_NET_HPP

#include <cstdint>
#include <string>

namespace prb::net {

/// Move-only RAII wrapper over a connected TCP socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

    /// Sends the whole buffer. Returns false on any transport error.
    bool send_all(const std::string& data);
    /// Receives up to len bytes. Returns bytes read, 0 on orderly close,
    /// -1 on error/interrupt.
    long recv_some(char* buf, std::size_t len);
    /// Unblocks any reader and closes the descriptor.
    void shutdown_and_close();

private:
    int fd_ = -1;
};

/// Listening endpoint. Port 0 picks an ephemeral port (see bound_port()).
class Listener {
public:
    Listener(const std::string& host, std::uint16_t port); // throws on bind failure
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    /// Blocks until a client connects or the listener is closed.
    Socket accept_client();
    void close_listener();
    std::uint16_t bound_port() const { return port_; }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Connects with a timeout. Returns an invalid Socket on failure.
Socket connect_to(const std::string& host, std::uint16_t port, int timeout_ms = 2000);

/// "host:port" split helper. Throws std::invalid_argument on bad input.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

} // namespace prb::net

#endif // PRB_NET_HPP
