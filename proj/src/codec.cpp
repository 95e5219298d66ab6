#include "mqttsec/codec.hpp"

#include <cstring>

namespace mqttsec::codec {

namespace {

enum class PacketType : std::uint8_t {
    Connect = 1,
    Connack = 2,
    Publish = 3,
    Puback = 4,
    Pubrec = 5,
    Pubrel = 6,
    Pubcomp = 7,
    Subscribe = 8,
    Suback = 9,
    Unsubscribe = 10,
    Unsuback = 11,
    Pingreq = 12,
    Pingresp = 13,
    Disconnect = 14,
    Auth = 15,
};

enum class PropType : std::uint8_t {
    Byte,
    TwoByte,
    FourByte,
    VarInt,
    Utf8String,
    Binary,
    StringPair,
};

// Property identifier table (MQTT v5 §2.2.2.2). An id outside this table has
// no self-describing length and cannot be skipped, so it is malformed.
std::optional<PropType> property_type(std::uint32_t id, const DecodeOptions& opts)
{
    switch (id)
    {
    case prop::PayloadFormatIndicator:
    case prop::RequestProblemInformation:
    case prop::RequestResponseInformation:
    case prop::MaximumQos:
    case prop::RetainAvailable:
    case prop::WildcardSubscriptionAvailable:
    case prop::SubscriptionIdentifierAvailable:
    case prop::SharedSubscriptionAvailable:
        return PropType::Byte;
    case prop::ServerKeepAlive:
    case prop::ReceiveMaximum:
    case prop::TopicAliasMaximum:
    case prop::TopicAlias:
        return PropType::TwoByte;
    case prop::MessageExpiryInterval:
    case prop::SessionExpiryInterval:
    case prop::WillDelayInterval:
    case prop::MaximumPacketSize:
        return PropType::FourByte;
    case prop::SubscriptionIdentifier:
        return PropType::VarInt;
    case prop::ContentType:
    case prop::ResponseTopic:
    case prop::AssignedClientIdentifier:
    case prop::AuthenticationMethod:
    case prop::ResponseInformation:
    case prop::ServerReference:
    case prop::ReasonString:
        return PropType::Utf8String;
    case prop::CorrelationData:
    case prop::AuthenticationData:
        return PropType::Binary;
    case prop::UserPropertyId:
        return PropType::StringPair;
    case prop::ExperimentalSecurityLevel:
        if (opts.experimental_security_id)
            return PropType::Byte;
        return std::nullopt;
    default:
        return std::nullopt;
    }
}

// Reads from a fully-buffered packet body; any truncation here means the
// declared remaining length lied, which is malformed, not incomplete.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    bool failed() const { return failed_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    std::uint8_t u8()
    {
        if (remaining() < 1)
        {
            failed_ = true;
            return 0;
        }
        return data_[pos_++];
    }

    std::uint16_t u16()
    {
        if (remaining() < 2)
        {
            failed_ = true;
            return 0;
        }
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32()
    {
        if (remaining() < 4)
        {
            failed_ = true;
            return 0;
        }
        std::uint32_t v = (static_cast<std::uint32_t>(data_[pos_]) << 24) |
                          (static_cast<std::uint32_t>(data_[pos_ + 1]) << 16) |
                          (static_cast<std::uint32_t>(data_[pos_ + 2]) << 8) |
                          static_cast<std::uint32_t>(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    std::uint32_t varint()
    {
        VarIntDecode d = decode_varint(data_.subspan(pos_));
        if (d.status != DecodeStatus::Ok)
        {
            failed_ = true;
            return 0;
        }
        pos_ += d.consumed;
        return d.value;
    }

    std::vector<std::uint8_t> binary()
    {
        std::uint16_t len = u16();
        if (failed_ || remaining() < len)
        {
            failed_ = true;
            return {};
        }
        std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + len);
        pos_ += len;
        return out;
    }

    // UTF-8 string; validity enforced by the caller via valid_mqtt_string.
    std::string string()
    {
        std::uint16_t len = u16();
        if (failed_ || remaining() < len)
        {
            failed_ = true;
            return {};
        }
        std::string out(reinterpret_cast<const char*>(data_.data() + pos_), len);
        pos_ += len;
        return out;
    }

    std::span<const std::uint8_t> rest()
    {
        auto out = data_.subspan(pos_);
        pos_ = data_.size();
        return out;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    bool failed_ = false;
};

class Writer {
public:
    std::vector<std::uint8_t>& bytes() { return out_; }

    void u8(std::uint8_t v) { out_.push_back(v); }

    void u16(std::uint16_t v)
    {
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }

    void u32(std::uint32_t v)
    {
        out_.push_back(static_cast<std::uint8_t>(v >> 24));
        out_.push_back(static_cast<std::uint8_t>(v >> 16));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }

    void varint(std::uint32_t v) { encode_varint(v, out_); }

    void string(const std::string& s)
    {
        if (s.size() > 0xFFFF)
            throw EncodeError("string exceeds 65535 bytes");
        if (!valid_mqtt_string(s))
            throw EncodeError("string is not valid MQTT UTF-8");
        u16(static_cast<std::uint16_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }

    void binary(const std::vector<std::uint8_t>& b)
    {
        if (b.size() > 0xFFFF)
            throw EncodeError("binary data exceeds 65535 bytes");
        u16(static_cast<std::uint16_t>(b.size()));
        out_.insert(out_.end(), b.begin(), b.end());
    }

    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

private:
    std::vector<std::uint8_t> out_;
};

struct BodyResult {
    bool ok = true;
    std::string error;

    static BodyResult fail(std::string msg) { return {false, std::move(msg)}; }
};

BodyResult parse_properties(Reader& r, const DecodeOptions& opts, Properties& out)
{
    std::uint32_t len = r.varint();
    if (r.failed())
        return BodyResult::fail("bad property length");
    if (r.remaining() < len)
        return BodyResult::fail("property block exceeds packet");

    std::size_t end = r.remaining() - len;
    while (r.remaining() > end)
    {
        std::uint32_t id = r.varint();
        if (r.failed())
            return BodyResult::fail("bad property identifier");
        auto type = property_type(id, opts);
        if (!type)
            return BodyResult::fail("unknown property identifier");

        Property p;
        p.id = id;
        switch (*type)
        {
        case PropType::Byte:
            p.value = r.u8();
            break;
        case PropType::TwoByte:
            p.value = r.u16();
            break;
        case PropType::FourByte:
        case PropType::VarInt:
            p.value = (*type == PropType::FourByte) ? r.u32() : r.varint();
            break;
        case PropType::Utf8String: {
            std::string s = r.string();
            if (!r.failed() && !valid_mqtt_string(s))
                return BodyResult::fail("property string is not valid UTF-8");
            p.value = std::move(s);
            break;
        }
        case PropType::Binary:
            p.value = r.binary();
            break;
        case PropType::StringPair: {
            UserProperty up;
            up.key = r.string();
            up.value = r.string();
            if (!r.failed() && (!valid_mqtt_string(up.key) || !valid_mqtt_string(up.value)))
                return BodyResult::fail("user property is not valid UTF-8");
            p.value = std::move(up);
            break;
        }
        }
        if (r.failed() || r.remaining() < end)
            return BodyResult::fail("truncated property");
        out.push_back(std::move(p));
    }
    return {};
}

void encode_properties(Writer& w, const Properties& props)
{
    // Build the block separately so its length prefix can be computed exactly.
    Writer block;
    DecodeOptions permissive{.experimental_security_id = true};
    for (const Property& p : props)
    {
        auto type = property_type(p.id, permissive);
        if (!type)
            throw EncodeError("unknown property identifier");
        block.varint(p.id);
        switch (*type)
        {
        case PropType::Byte:
            if (!std::holds_alternative<std::uint8_t>(p.value))
                throw EncodeError("property value type mismatch (byte expected)");
            block.u8(std::get<std::uint8_t>(p.value));
            break;
        case PropType::TwoByte:
            if (!std::holds_alternative<std::uint16_t>(p.value))
                throw EncodeError("property value type mismatch (two byte int expected)");
            block.u16(std::get<std::uint16_t>(p.value));
            break;
        case PropType::FourByte:
            if (!std::holds_alternative<std::uint32_t>(p.value))
                throw EncodeError("property value type mismatch (four byte int expected)");
            block.u32(std::get<std::uint32_t>(p.value));
            break;
        case PropType::VarInt:
            if (!std::holds_alternative<std::uint32_t>(p.value))
                throw EncodeError("property value type mismatch (varint expected)");
            block.varint(std::get<std::uint32_t>(p.value));
            break;
        case PropType::Utf8String:
            if (!std::holds_alternative<std::string>(p.value))
                throw EncodeError("property value type mismatch (string expected)");
            block.string(std::get<std::string>(p.value));
            break;
        case PropType::Binary:
            if (!std::holds_alternative<std::vector<std::uint8_t>>(p.value))
                throw EncodeError("property value type mismatch (binary expected)");
            block.binary(std::get<std::vector<std::uint8_t>>(p.value));
            break;
        case PropType::StringPair: {
            if (!std::holds_alternative<UserProperty>(p.value))
                throw EncodeError("property value type mismatch (string pair expected)");
            const auto& up = std::get<UserProperty>(p.value);
            block.string(up.key);
            block.string(up.value);
            break;
        }
        }
    }
    w.varint(static_cast<std::uint32_t>(block.bytes().size()));
    w.raw(block.bytes());
}

// --- per-type body parsers -------------------------------------------------

BodyResult parse_connect(Reader& r, const DecodeOptions& opts, Connect& out,
                         std::optional<Version>& seen_version)
{
    std::string name = r.string();
    std::uint8_t level = r.u8();
    if (r.failed())
        return BodyResult::fail("truncated CONNECT header");
    if (name != "MQTT" || (level != 4 && level != 5))
        return BodyResult::fail("unsupported protocol version");
    out.protocol_version = (level == 5) ? Version::V5 : Version::V4;
    seen_version = out.protocol_version;

    std::uint8_t flags = r.u8();
    std::uint16_t keep_alive = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated CONNECT header");
    if (flags & 0x01)
        return BodyResult::fail("CONNECT reserved flag set"); // [MQTT-3.1.2-3]

    out.clean_start = (flags & 0x02) != 0;
    out.keep_alive_s = keep_alive;
    const bool will_flag = (flags & 0x04) != 0;
    const std::uint8_t will_qos = (flags >> 3) & 0x03;
    const bool will_retain = (flags & 0x20) != 0;
    const bool has_password = (flags & 0x40) != 0;
    const bool has_username = (flags & 0x80) != 0;
    if (!will_flag && (will_qos != 0 || will_retain))
        return BodyResult::fail("will flags without will"); // [MQTT-3.1.2-11]
    if (will_qos > 2)
        return BodyResult::fail("invalid will qos");
    if (out.protocol_version == Version::V4 && has_password && !has_username)
        return BodyResult::fail("password without username"); // [MQTT-3.1.2-22]

    if (out.protocol_version == Version::V5)
    {
        if (auto res = parse_properties(r, opts, out.properties); !res.ok)
            return res;
    }

    out.client_id = r.string();
    if (r.failed())
        return BodyResult::fail("truncated client identifier");
    if (!valid_mqtt_string(out.client_id))
        return BodyResult::fail("client identifier is not valid UTF-8");

    if (will_flag)
    {
        // Will messages are parsed for framing correctness and dropped; this
        // broker does not store or publish wills.
        if (out.protocol_version == Version::V5)
        {
            Properties will_props;
            if (auto res = parse_properties(r, opts, will_props); !res.ok)
                return res;
        }
        std::string will_topic = r.string();
        if (r.failed() || !valid_mqtt_string(will_topic))
            return BodyResult::fail("invalid will topic");
        (void)r.binary();
        if (r.failed())
            return BodyResult::fail("truncated will payload");
    }

    if (has_username)
    {
        std::string u = r.string();
        if (r.failed() || !valid_mqtt_string(u))
            return BodyResult::fail("invalid username");
        out.username = std::move(u);
    }
    if (has_password)
    {
        std::vector<std::uint8_t> pw = r.binary();
        if (r.failed())
            return BodyResult::fail("truncated password");
        out.password = std::move(pw);
    }
    return {};
}

BodyResult parse_connack(Reader& r, Version version, const DecodeOptions& opts, Connack& out)
{
    std::uint8_t ack_flags = r.u8();
    std::uint8_t code = r.u8();
    if (r.failed())
        return BodyResult::fail("truncated CONNACK");
    if (ack_flags & 0xFE)
        return BodyResult::fail("CONNACK reserved flags set"); // [MQTT-3.2.2.1]
    out.session_present = (ack_flags & 0x01) != 0;
    out.reason_code = code;
    if (version == Version::V5)
        return parse_properties(r, opts, out.properties);
    return {};
}

BodyResult parse_publish(Reader& r, Version version, const DecodeOptions& opts,
                         std::uint8_t flags, Publish& out)
{
    out.retain = (flags & 0x01) != 0;
    out.qos = (flags >> 1) & 0x03;
    out.dup = (flags & 0x08) != 0;
    if (out.qos == 3)
        return BodyResult::fail("invalid PUBLISH qos"); // [MQTT-3.3.1-4]

    out.topic = r.string();
    if (r.failed())
        return BodyResult::fail("truncated topic name");
    if (!valid_mqtt_string(out.topic))
        return BodyResult::fail("topic name is not valid UTF-8");

    if (out.qos > 0)
    {
        std::uint16_t pid = r.u16();
        if (r.failed())
            return BodyResult::fail("truncated packet identifier");
        if (pid == 0)
            return BodyResult::fail("zero packet identifier"); // [MQTT-2.2.1-2]
        out.packet_id = pid;
    }
    if (version == Version::V5)
    {
        if (auto res = parse_properties(r, opts, out.properties); !res.ok)
            return res;
    }
    auto rest = r.rest();
    out.payload.assign(rest.begin(), rest.end());
    return {};
}

BodyResult parse_puback(Reader& r, Version version, const DecodeOptions& opts, Puback& out)
{
    out.packet_id = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated PUBACK");
    if (out.packet_id == 0)
        return BodyResult::fail("zero packet identifier");
    if (version == Version::V4)
        return {};
    // v5 short forms: 2 bytes means success/no properties, 3 bytes means
    // reason code without a property length field.
    if (r.at_end())
        return {};
    out.reason_code = r.u8();
    if (r.at_end())
        return {};
    return parse_properties(r, opts, out.properties);
}

BodyResult parse_subscribe(Reader& r, Version version, const DecodeOptions& opts, Subscribe& out)
{
    out.packet_id = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated SUBSCRIBE");
    if (out.packet_id == 0)
        return BodyResult::fail("zero packet identifier");
    if (version == Version::V5)
    {
        if (auto res = parse_properties(r, opts, out.properties); !res.ok)
            return res;
    }
    while (!r.at_end())
    {
        SubscribeEntry e;
        e.filter = r.string();
        std::uint8_t options = r.u8();
        if (r.failed())
            return BodyResult::fail("truncated subscription entry");
        if (!valid_mqtt_string(e.filter))
            return BodyResult::fail("topic filter is not valid UTF-8");
        e.qos = options & 0x03;
        if (e.qos == 3)
            return BodyResult::fail("invalid subscription qos");
        if (version == Version::V4)
        {
            if (options & 0xFC)
                return BodyResult::fail("reserved subscription option bits set"); // [MQTT-3.8.3-4]
        }
        else
        {
            // Tolerate No Local / Retain As Published / Retain Handling; the
            // broker grants none of them. Bits 6-7 stay reserved.
            if (options & 0xC0)
                return BodyResult::fail("reserved subscription option bits set");
        }
        out.entries.push_back(std::move(e));
    }
    if (out.entries.empty())
        return BodyResult::fail("SUBSCRIBE without topic filters"); // [MQTT-3.8.3-3]
    return {};
}

BodyResult parse_suback(Reader& r, Version version, const DecodeOptions& opts, Suback& out)
{
    out.packet_id = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated SUBACK");
    if (version == Version::V5)
    {
        if (auto res = parse_properties(r, opts, out.properties); !res.ok)
            return res;
    }
    while (!r.at_end())
        out.reason_codes.push_back(r.u8());
    if (out.reason_codes.empty())
        return BodyResult::fail("SUBACK without reason codes");
    return {};
}

BodyResult parse_unsubscribe(Reader& r, Version version, const DecodeOptions& opts, Unsubscribe& out)
{
    out.packet_id = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated UNSUBSCRIBE");
    if (out.packet_id == 0)
        return BodyResult::fail("zero packet identifier");
    if (version == Version::V5)
    {
        if (auto res = parse_properties(r, opts, out.properties); !res.ok)
            return res;
    }
    while (!r.at_end())
    {
        std::string f = r.string();
        if (r.failed())
            return BodyResult::fail("truncated topic filter");
        if (!valid_mqtt_string(f))
            return BodyResult::fail("topic filter is not valid UTF-8");
        out.filters.push_back(std::move(f));
    }
    if (out.filters.empty())
        return BodyResult::fail("UNSUBSCRIBE without topic filters"); // [MQTT-3.10.3-2]
    return {};
}

BodyResult parse_unsuback(Reader& r, Version version, const DecodeOptions& opts, Unsuback& out)
{
    out.packet_id = r.u16();
    if (r.failed())
        return BodyResult::fail("truncated UNSUBACK");
    if (version == Version::V4)
    {
        // no payload in 3.1.1
        return {};
    }
    if (auto res = parse_properties(r, opts, out.properties); !res.ok)
        return res;
    while (!r.at_end())
        out.reason_codes.push_back(r.u8());
    if (out.reason_codes.empty())
        return BodyResult::fail("UNSUBACK without reason codes");
    return {};
}

BodyResult parse_disconnect(Reader& r, Version version, const DecodeOptions& opts, Disconnect& out)
{
    if (version == Version::V4)
    {
        if (!r.at_end())
            return BodyResult::fail("DISCONNECT with payload");
        return {};
    }
    if (r.at_end())
        return {}; // reason code 0, no properties
    out.reason_code = r.u8();
    if (r.at_end())
        return {};
    return parse_properties(r, opts, out.properties);
}

} // namespace

// ---------------------------------------------------------------------------

VarIntDecode decode_varint(std::span<const std::uint8_t> in)
{
    std::uint32_t value = 0;
    std::uint32_t multiplier = 1;
    std::size_t i = 0;
    for (;;)
    {
        if (i >= in.size())
            return {DecodeStatus::Incomplete, 0, 0};
        std::uint8_t byte = in[i];
        value += static_cast<std::uint32_t>(byte & 0x7F) * multiplier;
        ++i;
        if ((byte & 0x80) == 0)
            return {DecodeStatus::Ok, value, i};
        if (i == 4)
            return {DecodeStatus::Malformed, 0, 0}; // [MQTT-1.5.5-1]
        multiplier *= 128;
    }
}

void encode_varint(std::uint32_t v, std::vector<std::uint8_t>& out)
{
    if (v > kVarIntMax)
        throw EncodeError("variable byte integer out of range");
    do
    {
        std::uint8_t byte = v % 128;
        v /= 128;
        if (v > 0)
            byte |= 0x80;
        out.push_back(byte);
    } while (v > 0);
}

std::vector<std::uint8_t> encode_varint(std::uint32_t v)
{
    std::vector<std::uint8_t> out;
    encode_varint(v, out);
    return out;
}

std::size_t varint_size(std::uint32_t v)
{
    if (v < 128)
        return 1;
    if (v < 16384)
        return 2;
    if (v < 2097152)
        return 3;
    return 4;
}

Property make_user_property(std::string key, std::string value)
{
    return Property{prop::UserPropertyId, UserProperty{std::move(key), std::move(value)}};
}

std::vector<UserProperty> user_properties(const Properties& props)
{
    std::vector<UserProperty> out;
    for (const Property& p : props)
    {
        if (p.id == prop::UserPropertyId && std::holds_alternative<UserProperty>(p.value))
            out.push_back(std::get<UserProperty>(p.value));
    }
    return out;
}

std::size_t user_property_wire_size(const UserProperty& p)
{
    return 1 + 2 + p.key.size() + 2 + p.value.size();
}

const char* packet_type_name(const Packet& p)
{
    static constexpr const char* names[] = {"CONNECT", "CONNACK", "PUBLISH", "PUBACK",
                                            "SUBSCRIBE", "SUBACK", "UNSUBSCRIBE", "UNSUBACK",
                                            "PINGREQ", "PINGRESP", "DISCONNECT"};
    return names[p.index()];
}

PacketDecode decode_packet(std::span<const std::uint8_t> in, Version version, const DecodeOptions& opts)
{
    PacketDecode result;
    if (in.empty())
    {
        result.status = DecodeStatus::Incomplete;
        return result;
    }

    const std::uint8_t first = in[0];
    const std::uint8_t type = first >> 4;
    const std::uint8_t flags = first & 0x0F;

    VarIntDecode rem = decode_varint(in.subspan(1));
    if (rem.status == DecodeStatus::Incomplete)
    {
        result.status = DecodeStatus::Incomplete;
        return result;
    }
    if (rem.status == DecodeStatus::Malformed)
    {
        result.status = DecodeStatus::Malformed;
        result.error = "bad remaining length";
        return result;
    }

    const std::size_t total = 1 + rem.consumed + rem.value;
    if (in.size() < total)
    {
        result.status = DecodeStatus::Incomplete;
        return result;
    }

    auto malformed = [&](std::string msg) {
        result.status = DecodeStatus::Malformed;
        result.error = std::move(msg);
        return result;
    };

    // Flags are mandated per type except for PUBLISH [MQTT-2.1.3-1].
    switch (static_cast<PacketType>(type))
    {
    case PacketType::Publish:
        break;
    case PacketType::Subscribe:
    case PacketType::Unsubscribe:
        if (flags != 0x02)
            return malformed("bad fixed header flags");
        break;
    case PacketType::Auth:
        return malformed("unsupported packet type AUTH");
    case PacketType::Pubrec:
    case PacketType::Pubrel:
    case PacketType::Pubcomp:
        return malformed("unsupported packet type (QoS 2 flow)");
    default:
        if (type == 0)
            return malformed("reserved packet type");
        if (flags != 0x00)
            return malformed("bad fixed header flags");
        break;
    }

    Reader r(in.subspan(1 + rem.consumed, rem.value));
    BodyResult body;

    switch (static_cast<PacketType>(type))
    {
    case PacketType::Connect: {
        Connect p;
        body = parse_connect(r, opts, p, result.connect_version);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Connack: {
        Connack p;
        body = parse_connack(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Publish: {
        Publish p;
        body = parse_publish(r, version, opts, flags, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Puback: {
        Puback p;
        body = parse_puback(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Subscribe: {
        Subscribe p;
        body = parse_subscribe(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Suback: {
        Suback p;
        body = parse_suback(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Unsubscribe: {
        Unsubscribe p;
        body = parse_unsubscribe(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Unsuback: {
        Unsuback p;
        body = parse_unsuback(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    case PacketType::Pingreq:
        result.packet = Pingreq{};
        break;
    case PacketType::Pingresp:
        result.packet = Pingresp{};
        break;
    case PacketType::Disconnect: {
        Disconnect p;
        body = parse_disconnect(r, version, opts, p);
        result.packet = std::move(p);
        break;
    }
    default:
        return malformed("reserved packet type");
    }

    if (!body.ok)
        return malformed(std::move(body.error));
    if (r.failed())
        return malformed("truncated packet body");
    if (!r.at_end())
        return malformed("packet body longer than declared");

    result.status = DecodeStatus::Ok;
    result.consumed = total;
    return result;
}

namespace {

std::vector<std::uint8_t> finish(std::uint8_t first_byte, Writer& body)
{
    std::vector<std::uint8_t> out;
    out.reserve(body.bytes().size() + 5);
    out.push_back(first_byte);
    encode_varint(static_cast<std::uint32_t>(body.bytes().size()), out);
    out.insert(out.end(), body.bytes().begin(), body.bytes().end());
    return out;
}

void require_v5_only_properties(const Properties& props, Version version)
{
    if (version == Version::V4 && !props.empty())
        throw EncodeError("properties are not representable in MQTT 3.1.1");
}

struct PacketEncoder {
    Version version;

    std::vector<std::uint8_t> operator()(const Connect& p) const
    {
        const Version v = p.protocol_version;
        if (v != Version::V4 && v != Version::V5)
            throw EncodeError("unsupported protocol version");
        require_v5_only_properties(p.properties, v);
        if (v == Version::V4 && p.password && !p.username)
            throw EncodeError("password without username");

        Writer w;
        w.string("MQTT");
        w.u8(static_cast<std::uint8_t>(v));
        std::uint8_t flags = 0;
        if (p.clean_start)
            flags |= 0x02;
        if (p.password)
            flags |= 0x40;
        if (p.username)
            flags |= 0x80;
        w.u8(flags);
        w.u16(p.keep_alive_s);
        if (v == Version::V5)
            encode_properties(w, p.properties);
        w.string(p.client_id);
        if (p.username)
            w.string(*p.username);
        if (p.password)
            w.binary(*p.password);
        return finish(0x10, w);
    }

    std::vector<std::uint8_t> operator()(const Connack& p) const
    {
        require_v5_only_properties(p.properties, version);
        Writer w;
        w.u8(p.session_present ? 0x01 : 0x00);
        w.u8(p.reason_code);
        if (version == Version::V5)
            encode_properties(w, p.properties);
        return finish(0x20, w);
    }

    std::vector<std::uint8_t> operator()(const Publish& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (p.qos > 2)
            throw EncodeError("invalid qos");
        if ((p.qos > 0) != p.packet_id.has_value())
            throw EncodeError("packet id must be present iff qos > 0");
        if (p.packet_id && *p.packet_id == 0)
            throw EncodeError("zero packet identifier");

        Writer w;
        w.string(p.topic);
        if (p.packet_id)
            w.u16(*p.packet_id);
        if (version == Version::V5)
            encode_properties(w, p.properties);
        w.raw(p.payload);

        std::uint8_t first = 0x30;
        if (p.retain)
            first |= 0x01;
        first |= static_cast<std::uint8_t>(p.qos << 1);
        if (p.dup)
            first |= 0x08;
        return finish(first, w);
    }

    std::vector<std::uint8_t> operator()(const Puback& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (p.packet_id == 0)
            throw EncodeError("zero packet identifier");
        if (version == Version::V4 && p.reason_code != 0)
            throw EncodeError("reason codes are not representable in MQTT 3.1.1");

        Writer w;
        w.u16(p.packet_id);
        if (version == Version::V5 && !(p.reason_code == 0 && p.properties.empty()))
        {
            w.u8(p.reason_code);
            if (!p.properties.empty())
                encode_properties(w, p.properties);
        }
        return finish(0x40, w);
    }

    std::vector<std::uint8_t> operator()(const Subscribe& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (p.entries.empty())
            throw EncodeError("SUBSCRIBE without topic filters");
        if (p.packet_id == 0)
            throw EncodeError("zero packet identifier");

        Writer w;
        w.u16(p.packet_id);
        if (version == Version::V5)
            encode_properties(w, p.properties);
        for (const auto& e : p.entries)
        {
            if (e.qos > 2)
                throw EncodeError("invalid subscription qos");
            w.string(e.filter);
            w.u8(e.qos);
        }
        return finish(0x82, w);
    }

    std::vector<std::uint8_t> operator()(const Suback& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (p.reason_codes.empty())
            throw EncodeError("SUBACK without reason codes");

        Writer w;
        w.u16(p.packet_id);
        if (version == Version::V5)
            encode_properties(w, p.properties);
        w.raw(p.reason_codes);
        return finish(0x90, w);
    }

    std::vector<std::uint8_t> operator()(const Unsubscribe& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (p.filters.empty())
            throw EncodeError("UNSUBSCRIBE without topic filters");
        if (p.packet_id == 0)
            throw EncodeError("zero packet identifier");

        Writer w;
        w.u16(p.packet_id);
        if (version == Version::V5)
            encode_properties(w, p.properties);
        for (const auto& f : p.filters)
            w.string(f);
        return finish(0xA2, w);
    }

    std::vector<std::uint8_t> operator()(const Unsuback& p) const
    {
        require_v5_only_properties(p.properties, version);
        Writer w;
        w.u16(p.packet_id);
        if (version == Version::V5)
        {
            if (p.reason_codes.empty())
                throw EncodeError("UNSUBACK without reason codes");
            encode_properties(w, p.properties);
            w.raw(p.reason_codes);
        }
        else if (!p.reason_codes.empty())
        {
            throw EncodeError("reason codes are not representable in MQTT 3.1.1");
        }
        return finish(0xB0, w);
    }

    std::vector<std::uint8_t> operator()(const Pingreq&) const
    {
        Writer w;
        return finish(0xC0, w);
    }

    std::vector<std::uint8_t> operator()(const Pingresp&) const
    {
        Writer w;
        return finish(0xD0, w);
    }

    std::vector<std::uint8_t> operator()(const Disconnect& p) const
    {
        require_v5_only_properties(p.properties, version);
        if (version == Version::V4)
        {
            if (p.reason_code != 0)
                throw EncodeError("reason codes are not representable in MQTT 3.1.1");
            Writer w;
            return finish(0xE0, w);
        }
        Writer w;
        if (!(p.reason_code == 0 && p.properties.empty()))
        {
            w.u8(p.reason_code);
            if (!p.properties.empty())
                encode_properties(w, p.properties);
        }
        return finish(0xE0, w);
    }
};

} // namespace

std::vector<std::uint8_t> encode_packet(const Packet& p, Version version)
{
    return std::visit(PacketEncoder{version}, p);
}

bool valid_mqtt_string(std::string_view s)
{
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n)
    {
        unsigned char c = p[i];
        if (c == 0x00)
            return false;
        if (c < 0x80)
        {
            ++i;
            continue;
        }

        std::size_t len;
        unsigned char lo = 0x80, hi = 0xBF;
        if (c >= 0xC2 && c <= 0xDF)
            len = 2;
        else if (c >= 0xE0 && c <= 0xEF)
        {
            len = 3;
            if (c == 0xE0)
                lo = 0xA0; // reject overlong
            else if (c == 0xED)
                hi = 0x9F; // reject surrogates
        }
        else if (c >= 0xF0 && c <= 0xF4)
        {
            len = 4;
            if (c == 0xF0)
                lo = 0x90; // reject overlong
            else if (c == 0xF4)
                hi = 0x8F; // reject > U+10FFFF
        }
        else
            return false; // 0x80-0xC1 continuation/overlong lead, 0xF5+ invalid

        if (i + len > n)
            return false;
        if (p[i + 1] < lo || p[i + 1] > hi)
            return false;
        for (std::size_t k = 2; k < len; ++k)
        {
            if (p[i + k] < 0x80 || p[i + k] > 0xBF)
                return false;
        }
        i += len;
    }
    return true;
}

} // namespace mqttsec::codec
