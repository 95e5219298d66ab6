#pragma once

#include "mqttsec/codec.hpp"
#include "mqttsec/security.hpp"
#include "mqttsec/transport.hpp"

#include <chrono>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mqttsec::client {

class MqttError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClientOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
    bool tls = false;
    codec::Version version = codec::Version::V5;
    std::string client_id;
    std::optional<security::EnforcementFlag> connect_flag; // ("s","1"/"0") on CONNECT
    std::uint16_t keep_alive_s = 60;
    bool clean_start = true;
    int io_timeout_ms = 5000;
};

// Single-threaded blocking client: every call both drives the socket and
// collects PUBLISHes that arrive while waiting for something else.
class BlockingClient {
public:
    BlockingClient() = default;
    ~BlockingClient();

    BlockingClient(const BlockingClient&) = delete;
    BlockingClient& operator=(const BlockingClient&) = delete;

    // Socket connect (+TLS handshake) and CONNECT→CONNACK exchange. The full
    // span is timed; see last_connect_duration(). Throws on transport
    // failure; a CONNACK with an error reason is returned, not thrown.
    codec::Connack connect(const ClientOptions& opts);

    std::chrono::nanoseconds last_connect_duration() const { return connect_duration_; }
    const std::string& negotiated_tls_version() const { return tls_version_; }
    const std::string& negotiated_tls_cipher() const { return tls_cipher_; }

    codec::Suback subscribe(const std::string& filter, std::uint8_t qos,
                            std::optional<security::EnforcementFlag> flag = std::nullopt);

    codec::Unsuback unsubscribe(const std::string& filter);

    // qos 0 → sent, returns nullopt. qos 1 → waits for the matching PUBACK.
    std::optional<codec::Puback> publish(const std::string& topic,
                                         std::vector<std::uint8_t> payload, std::uint8_t qos,
                                         std::optional<security::EnforcementFlag> flag = std::nullopt,
                                         bool retain = false);

    // Next inbound PUBLISH, waiting up to timeout_ms. QoS 1 inbound messages
    // are acknowledged automatically.
    std::optional<codec::Publish> receive(int timeout_ms);

    void ping();
    void disconnect();
    void close();
    bool connected() const { return connected_; }

private:
    void send(const codec::Packet& p);
    codec::Packet await(const std::function<bool(const codec::Packet&)>& want, int timeout_ms);
    bool pump(int timeout_ms); // reads once, dispatches buffered packets
    void drain();              // decode rxbuf_ into inbox_/pending_

    transport::ClientConnection conn_;
    std::string tls_version_;
    std::string tls_cipher_;
    codec::Version version_ = codec::Version::V5;
    bool connected_ = false;
    int io_timeout_ms_ = 5000;
    std::vector<std::uint8_t> rxbuf_;
    std::deque<codec::Packet> pending_;
    std::deque<codec::Publish> inbox_;
    std::uint16_t next_pid_ = 0;
    std::chrono::nanoseconds connect_duration_{0};
};

} // namespace mqttsec::client
