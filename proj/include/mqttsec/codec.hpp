#ifndef MQTTSEC_CODEC_HPP
#define MQTTSEC_CODEC_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Encoder/decoder for the MQTT v5 / v3.1.1 wire format subset the broker speaks.
// Pure functions over bytes and values; safe to call concurrently.

namespace mqttsec::codec {

inline constexpr std::uint32_t kVarIntMax = 268'435'455;

enum class Version : std::uint8_t {
    V4 = 4, // MQTT 3.1.1
    V5 = 5,
};

enum class DecodeStatus : std::uint8_t {
    Ok,
    Incomplete, // need more bytes; caller may buffer and retry
    Malformed,  // protocol violation; connection must close
};

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Variable byte integer

struct VarIntDecode {
    DecodeStatus status = DecodeStatus::Malformed;
    std::uint32_t value = 0;
    std::size_t consumed = 0;
};

VarIntDecode decode_varint(std::span<const std::uint8_t> in);
void encode_varint(std::uint32_t v, std::vector<std::uint8_t>& out); // throws EncodeError when v > kVarIntMax
std::vector<std::uint8_t> encode_varint(std::uint32_t v);
std::size_t varint_size(std::uint32_t v);

// ---------------------------------------------------------------------------
// Properties (MQTT v5)

struct UserProperty {
    std::string key;
    std::string value;

    bool operator==(const UserProperty&) const = default;
};

namespace prop {
inline constexpr std::uint32_t PayloadFormatIndicator = 0x01;
inline constexpr std::uint32_t MessageExpiryInterval = 0x02;
inline constexpr std::uint32_t ContentType = 0x03;
inline constexpr std::uint32_t ResponseTopic = 0x08;
inline constexpr std::uint32_t CorrelationData = 0x09;
inline constexpr std::uint32_t SubscriptionIdentifier = 0x0B;
inline constexpr std::uint32_t SessionExpiryInterval = 0x11;
inline constexpr std::uint32_t AssignedClientIdentifier = 0x12;
inline constexpr std::uint32_t ServerKeepAlive = 0x13;
inline constexpr std::uint32_t AuthenticationMethod = 0x15;
inline constexpr std::uint32_t AuthenticationData = 0x16;
inline constexpr std::uint32_t RequestProblemInformation = 0x17;
inline constexpr std::uint32_t WillDelayInterval = 0x18;
inline constexpr std::uint32_t RequestResponseInformation = 0x19;
inline constexpr std::uint32_t ResponseInformation = 0x1A;
inline constexpr std::uint32_t ServerReference = 0x1C;
inline constexpr std::uint32_t ReasonString = 0x1F;
inline constexpr std::uint32_t ReceiveMaximum = 0x21;
inline constexpr std::uint32_t TopicAliasMaximum = 0x22;
inline constexpr std::uint32_t TopicAlias = 0x23;
inline constexpr std::uint32_t MaximumQos = 0x24;
inline constexpr std::uint32_t RetainAvailable = 0x25;
inline constexpr std::uint32_t UserPropertyId = 0x26;
inline constexpr std::uint32_t MaximumPacketSize = 0x27;
inline constexpr std::uint32_t WildcardSubscriptionAvailable = 0x28;
inline constexpr std::uint32_t SubscriptionIdentifierAvailable = 0x29;
inline constexpr std::uint32_t SharedSubscriptionAvailable = 0x2A;

// Unassigned identifier used by the optional compact security-level encoding.
// Decoding it is gated behind DecodeOptions::experimental_security_id and ships
// disabled; the broker never enables it.
inline constexpr std::uint32_t ExperimentalSecurityLevel = 0x78;
} // namespace prop

// Value alternatives: Byte, TwoByte, FourByte/VarInt (shared uint32 slot; the
// id's table type picks the wire form), Utf8String, BinaryData, StringPair.
using PropertyValue = std::variant<std::uint8_t, std::uint16_t, std::uint32_t,
                                   std::string, std::vector<std::uint8_t>, UserProperty>;

struct Property {
    std::uint32_t id = 0;
    PropertyValue value;

    bool operator==(const Property&) const = default;
};

using Properties = std::vector<Property>;

Property make_user_property(std::string key, std::string value);

// All User Properties in wire order.
std::vector<UserProperty> user_properties(const Properties& props);

// Wire size of one encoded User Property: 1 (id) + 2+len(key) + 2+len(value).
std::size_t user_property_wire_size(const UserProperty& p);

// ---------------------------------------------------------------------------
// Packets

struct Connect {
    std::string client_id;
    Version protocol_version = Version::V5;
    bool clean_start = true;
    std::uint16_t keep_alive_s = 60;
    Properties properties; // v5 only
    std::optional<std::string> username;
    std::optional<std::vector<std::uint8_t>> password;

    bool operator==(const Connect&) const = default;
};

struct Connack {
    std::uint8_t reason_code = 0;
    bool session_present = false;
    Properties properties;

    bool operator==(const Connack&) const = default;
};

struct Publish {
    std::string topic;
    std::vector<std::uint8_t> payload;
    std::uint8_t qos = 0;
    bool retain = false;
    bool dup = false;
    std::optional<std::uint16_t> packet_id; // present iff qos > 0
    Properties properties;

    bool operator==(const Publish&) const = default;
};

struct Puback {
    std::uint16_t packet_id = 0;
    std::uint8_t reason_code = 0;
    Properties properties;

    bool operator==(const Puback&) const = default;
};

struct SubscribeEntry {
    std::string filter;
    std::uint8_t qos = 0; // requested

    bool operator==(const SubscribeEntry&) const = default;
};

struct Subscribe {
    std::uint16_t packet_id = 0;
    std::vector<SubscribeEntry> entries;
    Properties properties;

    bool operator==(const Subscribe&) const = default;
};

struct Suback {
    std::uint16_t packet_id = 0;
    std::vector<std::uint8_t> reason_codes;
    Properties properties;

    bool operator==(const Suback&) const = default;
};

struct Unsubscribe {
    std::uint16_t packet_id = 0;
    std::vector<std::string> filters;
    Properties properties;

    bool operator==(const Unsubscribe&) const = default;
};

struct Unsuback {
    std::uint16_t packet_id = 0;
    std::vector<std::uint8_t> reason_codes; // empty for v4 (no payload on the wire)
    Properties properties;

    bool operator==(const Unsuback&) const = default;
};

struct Pingreq {
    bool operator==(const Pingreq&) const = default;
};

struct Pingresp {
    bool operator==(const Pingresp&) const = default;
};

struct Disconnect {
    std::uint8_t reason_code = 0;
    Properties properties;

    bool operator==(const Disconnect&) const = default;
};

using Packet = std::variant<Connect, Connack, Publish, Puback, Subscribe, Suback,
                            Unsubscribe, Unsuback, Pingreq, Pingresp, Disconnect>;

const char* packet_type_name(const Packet& p);

// ---------------------------------------------------------------------------
// Reason codes (v5) and v4 CONNACK return codes used by the broker

namespace reason {
inline constexpr std::uint8_t Success = 0x00;
inline constexpr std::uint8_t NoSubscriptionExisted = 0x11;
inline constexpr std::uint8_t UnspecifiedError = 0x80;
inline constexpr std::uint8_t MalformedPacket = 0x81;
inline constexpr std::uint8_t ProtocolError = 0x82;
inline constexpr std::uint8_t ImplementationSpecificError = 0x83;
inline constexpr std::uint8_t UnsupportedProtocolVersion = 0x84;
inline constexpr std::uint8_t ClientIdentifierNotValid = 0x85;
inline constexpr std::uint8_t ServerBusy = 0x89;
inline constexpr std::uint8_t KeepAliveTimeout = 0x8D;
inline constexpr std::uint8_t TopicFilterInvalid = 0x8F;
inline constexpr std::uint8_t TopicNameInvalid = 0x90;
inline constexpr std::uint8_t SessionTakenOver = 0x8E;
inline constexpr std::uint8_t PacketTooLarge = 0x95;
inline constexpr std::uint8_t QuotaExceeded = 0x97;
inline constexpr std::uint8_t RetainNotSupported = 0x9A;
inline constexpr std::uint8_t QosNotSupported = 0x9B;

// v4 CONNACK return codes
inline constexpr std::uint8_t V4UnacceptableProtocol = 0x01;
inline constexpr std::uint8_t V4IdentifierRejected = 0x02;
inline constexpr std::uint8_t V4ServerUnavailable = 0x03;
// v4 SUBACK per-filter failure
inline constexpr std::uint8_t V4SubackFailure = 0x80;
} // namespace reason

// ---------------------------------------------------------------------------
// Packet encode/decode

struct DecodeOptions {
    bool experimental_security_id = false;
};

struct PacketDecode {
    DecodeStatus status = DecodeStatus::Malformed;
    Packet packet;
    std::size_t consumed = 0;
    std::string error; // diagnostic for Malformed
    // Set whenever a CONNECT got far enough to reveal its protocol level,
    // even if a later field was malformed; lets the server answer a broken
    // CONNECT in the dialect the client speaks.
    std::optional<Version> connect_version;
};

// `version` selects the wire dialect for version-dependent packets; CONNECT is
// self-describing and ignores it. Trailing bytes beyond one packet are
// tolerated; `consumed` tells the framer where the next packet starts.
PacketDecode decode_packet(std::span<const std::uint8_t> in, Version version = Version::V5,
                           const DecodeOptions& opts = {});

// Throws EncodeError on packets violating the wire rules (qos without packet
// id, oversize strings, properties on a v4 packet, ...).
std::vector<std::uint8_t> encode_packet(const Packet& p, Version version = Version::V5);

// ---------------------------------------------------------------------------
// String validation helpers (shared with the topic router)

// Structurally valid UTF-8 and free of U+0000 [MQTT-1.5.4-1, MQTT-1.5.4-2].
bool valid_mqtt_string(std::string_view s);

} // namespace mqttsec::codec

#endif
