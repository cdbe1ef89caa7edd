#ifndef PRB_O1_MESSAGE_HPP
#define PRB_O1_MESSAGE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prb::o1 {

/// Allocation vectors on the wire always cover one prediction horizon.
constexpr std::size_t kAllocationHorizon = 24;
constexpr int kProtocolVersion = 1;

enum class MsgType { prb_history_report, prb_allocation, ack, error };

std::string msg_type_name(MsgType t);
std::optional<MsgType> msg_type_from_name(const std::string& name);

/**
 * One frame of the simulated O1 protocol. The envelope (version,
 * msg_type, msg_id, tenant_id, timestamp) is present on every message;
 * the payload depends on msg_type:
 *   PRB_HISTORY_REPORT: { "prb_demand": <real >= 0> }
 *   PRB_ALLOCATION:     { "forecast_start": <iso8601>, "prbs": [24 ints >= 0] }
 *   ACK:                { } (msg_id echoes the acknowledged message)
 *   ERROR:              { "code": <string>, "text": <string> }
 */
struct O1Message {
    int version = kProtocolVersion;
    MsgType msg_type = MsgType::ack;
    std::uint64_t msg_id = 0;
    std::string tenant_id;
    std::int64_t timestamp = 0; // epoch seconds; ISO-8601 on the wire

    double prb_demand = 0.0;                 // history report
    std::int64_t forecast_start = 0;         // allocation
    std::vector<std::int64_t> prbs;          // allocation
    std::string error_code, error_text;      // error

    static O1Message history_report(std::uint64_t msg_id, const std::string& tenant,
                                    std::int64_t ts, double demand);
    static O1Message allocation(std::uint64_t msg_id, const std::string& tenant,
                                std::int64_t ts, std::int64_t forecast_start,
                                std::vector<std::int64_t> prbs);
    static O1Message make_ack(std::uint64_t acked_msg_id, const std::string& tenant,
                              std::int64_t ts);
    static O1Message make_error(std::uint64_t msg_id, const std::string& tenant,
                                std::int64_t ts, const std::string& code,
                                const std::string& text);
};

/// Serializes to one newline-terminated UTF-8 JSON frame (no interior
/// newlines). Throws std::invalid_argument on invariant violations.
std::string encode(const O1Message& msg);

struct DecodeResult {
    std::optional<O1Message> msg;
    std::string error; // names the offending field when validation fails

    bool ok() const { return msg.has_value(); }
};

/// Parses one complete frame (with or without the trailing newline).
/// Unknown fields are ignored for forward compatibility.
DecodeResult decode(const std::string& frame);

/**
 * Splits a byte stream into newline-terminated frames. Partial frames
 * stay buffered until the terminator arrives.
 */
class FrameBuffer {
public:
    void feed(const char* data, std::size_t len);
    /// Next complete frame without its trailing newline, if any.
    std::optional<std::string> next_frame();
    std::size_t buffered_bytes() const { return buffer_.size(); }

private:
    std::string buffer_;
};

} // namespace prb::o1

#endif // PRB_O1_MESSAGE_HPP
