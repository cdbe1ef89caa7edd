#include "prb/o1_message.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "prb/time_util.hpp"

namespace prb::o1 {

using nlohmann::json;

std::string msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::prb_history_report: return "PRB_HISTORY_REPORT";
        case MsgType::prb_allocation: return "PRB_ALLOCATION";
        case MsgType::ack: return "ACK";
        case MsgType::error: return "ERROR";
    }
    throw std::logic_error("unknown msg type");
}

std::optional<MsgType> msg_type_from_name(const std::string& name) {
    if (name == "PRB_HISTORY_REPORT") return MsgType::prb_history_report;
    if (name == "PRB_ALLOCATION") return MsgType::prb_allocation;
    if (name == "ACK") return MsgType::ack;
    if (name == "ERROR") return MsgType::error;
    return std::nullopt;
}

O1Message O1Message::history_report(std::uint64_t msg_id, const std::string& tenant,
                                    std::int64_t ts, double demand) {
    O1Message m;
    m.msg_type = MsgType::prb_history_report;
    m.msg_id = msg_id;
    m.tenant_id = tenant;
    m.timestamp = ts;
    m.prb_demand = demand;
    return m;
}

O1Message O1Message::allocation(std::uint64_t msg_id, const std::string& tenant, std::int64_t ts,
                                std::int64_t forecast_start, std::vector<std::int64_t> prbs) {
    O1Message m;
    m.msg_type = MsgType::prb_allocation;
    m.msg_id = msg_id;
    m.tenant_id = tenant;
    m.timestamp = ts;
    m.forecast_start = forecast_start;
    m.prbs = std::move(prbs);
    return m;
}

O1Message O1Message::make_ack(std::uint64_t acked_msg_id, const std::string& tenant,
                              std::int64_t ts) {
    O1Message m;
    m.msg_type = MsgType::ack;
    m.msg_id = acked_msg_id;
    m.tenant_id = tenant;
    m.timestamp = ts;
    return m;
}

O1Message O1Message::make_error(std::uint64_t msg_id, const std::string& tenant, std::int64_t ts,
                                const std::string& code, const std::string& text) {
    O1Message m;
    m.msg_type = MsgType::error;
    m.msg_id = msg_id;
    m.tenant_id = tenant;
    m.timestamp = ts;
    m.error_code = code;
    m.error_text = text;
    return m;
}

std::string encode(const O1Message& msg) {
    json payload = json::object();
    switch (msg.msg_type) {
        case MsgType::prb_history_report:
            if (!(msg.prb_demand >= 0.0) || !std::isfinite(msg.prb_demand))
                throw std::invalid_argument("encode: prb_demand must be finite and >= 0");
            payload["prb_demand"] = msg.prb_demand;
            break;
        case MsgType::prb_allocation: {
            if (msg.prbs.size() != kAllocationHorizon)
                throw std::invalid_argument("encode: prbs must have exactly 24 entries");
            for (std::int64_t v : msg.prbs)
                if (v < 0) throw std::invalid_argument("encode: prbs entries must be >= 0");
            payload["forecast_start"] = format_iso8601(msg.forecast_start);
            payload["prbs"] = msg.prbs;
            break;
        }
        case MsgType::ack:
            break;
        case MsgType::error:
            payload["code"] = msg.error_code;
            payload["text"] = msg.error_text;
            break;
    }
    json j{{"version", msg.version},
           {"msg_type", msg_type_name(msg.msg_type)},
           {"msg_id", msg.msg_id},
           {"tenant_id", msg.tenant_id},
           {"timestamp", format_iso8601(msg.timestamp)},
           {"payload", payload}};
    return j.dump() + "\n";
}

namespace {

DecodeResult fail(const std::string& what) { return DecodeResult{std::nullopt, what}; }

} // namespace

DecodeResult decode(const std::string& frame) {
    const json j = json::parse(frame, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) return fail("malformed JSON frame");
    if (!j.is_object()) return fail("frame is not a JSON object");

    if (!j.contains("version") || !j.at("version").is_number_integer())
        return fail("missing or invalid field: version");
    if (!j.contains("msg_type") || !j.at("msg_type").is_string())
        return fail("missing or invalid field: msg_type");
    if (!j.contains("msg_id") || !j.at("msg_id").is_number_unsigned())
        return fail("missing or invalid field: msg_id");
    if (!j.contains("tenant_id") || !j.at("tenant_id").is_string())
        return fail("missing or invalid field: tenant_id");
    if (!j.contains("timestamp") || !j.at("timestamp").is_string())
        return fail("missing or invalid field: timestamp");
    if (!j.contains("payload") || !j.at("payload").is_object())
        return fail("missing or invalid field: payload");

    const auto type = msg_type_from_name(j.at("msg_type").get<std::string>());
    if (!type) return fail("unknown msg_type: " + j.at("msg_type").get<std::string>());

    O1Message m;
    m.version = j.at("version").get<int>();
    m.msg_type = *type;
    m.msg_id = j.at("msg_id").get<std::uint64_t>();
    m.tenant_id = j.at("tenant_id").get<std::string>();
    try {
        m.timestamp = parse_iso8601(j.at("timestamp").get<std::string>());
    } catch (const std::exception&) {
        return fail("invalid field: timestamp");
    }

    const json& p = j.at("payload");
    switch (*type) {
        case MsgType::prb_history_report: {
            if (!p.contains("prb_demand") || !p.at("prb_demand").is_number())
                return fail("missing or invalid field: payload.prb_demand");
            m.prb_demand = p.at("prb_demand").get<double>();
            if (!std::isfinite(m.prb_demand) || m.prb_demand < 0.0)
                return fail("invalid field: payload.prb_demand (must be finite and >= 0)");
            break;
        }
        case MsgType::prb_allocation: {
            if (!p.contains("forecast_start") || !p.at("forecast_start").is_string())
                return fail("missing or invalid field: payload.forecast_start");
            try {
                m.forecast_start = parse_iso8601(p.at("forecast_start").get<std::string>());
            } catch (const std::exception&) {
                return fail("invalid field: payload.forecast_start");
            }
            if (!p.contains("prbs") || !p.at("prbs").is_array())
                return fail("missing or invalid field: payload.prbs");
            if (p.at("prbs").size() != kAllocationHorizon)
                return fail("invalid field: payload.prbs (need exactly 24 entries)");
            for (const auto& v : p.at("prbs")) {
                if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                    return fail("invalid field: payload.prbs (entries must be integers >= 0)");
                m.prbs.push_back(v.get<std::int64_t>());
            }
            break;
        }
        case MsgType::ack:
            break;
        case MsgType::error: {
            if (!p.contains("code") || !p.at("code").is_string())
                return fail("missing or invalid field: payload.code");
            if (!p.contains("text") || !p.at("text").is_string())
                return fail("missing or invalid field: payload.text");
            m.error_code = p.at("code").get<std::string>();
            m.error_text = p.at("text").get<std::string>();
            break;
        }
    }
    return DecodeResult{std::move(m), ""};
}

void FrameBuffer::feed(const char* data, std::size_t len) { buffer_.append(data, len); }

std::optional<std::string> FrameBuffer::next_frame() {
    const auto pos = buffer_.find('\n');
    if (pos == std::string::npos) return std::nullopt;
    std::string frame = buffer_.substr(0, pos);
    buffer_.erase(0, pos + 1);
    return frame;
}

} // namespace prb::o1
