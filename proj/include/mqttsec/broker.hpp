#pragma once

#include "mqttsec/audit.hpp"
#include "mqttsec/codec.hpp"
#include "mqttsec/config.hpp"
#include "mqttsec/security.hpp"
#include "mqttsec/topics.hpp"
#include "mqttsec/transport.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace mqttsec::broker {

// Counter snapshot; every field is monotonic except sessions_active.
struct BrokerStats {
    std::uint64_t connections_accepted = 0;
    std::uint64_t handshake_failures = 0;
    std::uint64_t sessions_active = 0;
    std::uint64_t sessions_taken_over = 0;
    std::uint64_t keepalive_expirations = 0;
    std::uint64_t publishes_received = 0;
    std::uint64_t messages_forwarded = 0;
    std::uint64_t deliveries_denied = 0;
    std::uint64_t invalid_security_values = 0;
    std::uint64_t malformed_packets = 0;
    std::uint64_t queue_overflows = 0;
    std::uint64_t audit_errors = 0;
};

// One PUBLISH-in to PUBLISH-out measurement: decode of the inbound packet to
// write_all() returning for one subscriber socket.
struct ForwardSample {
    std::chrono::nanoseconds latency{0};
};

// Test hook: observes every frame just before it is written to a client
// socket, tagged with the receiver's identity and connection level.
using WriteTap = std::function<void(const std::string& client_id,
                                    security::SecurityLevel connection_level,
                                    std::span<const std::uint8_t> frame)>;

class Broker {
public:
    explicit Broker(config::BrokerConfig cfg);
    ~Broker();

    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    // Binds all listeners (throws TransportError/ConfigError on failure) and
    // spawns the accept and housekeeping threads.
    void start();

    // Stops accepting, kicks every session, joins all broker threads. Safe to
    // call twice; the destructor calls it.
    void stop();

    // Actual bound port of a configured listener; resolves port 0 to the
    // kernel-assigned one. Throws if no such listener.
    std::uint16_t port(const std::string& listener_name) const;

    BrokerStats stats() const;

    const config::BrokerConfig& config() const { return cfg_; }

    // Must be set before start(); called from writer threads.
    void set_write_tap(WriteTap tap) { tap_ = std::move(tap); }

    // Drains collected forwarding samples (measure_forwarding only).
    std::vector<ForwardSample> take_forward_samples();

private:
    struct OutboundFrame {
        std::vector<std::uint8_t> bytes;
        // Set on forwarded PUBLISHes when measure_forwarding is on.
        std::optional<std::chrono::steady_clock::time_point> received_at;
    };

    struct Session {
        std::string client_id;
        codec::Version version = codec::Version::V5;
        security::ClientSecurityProfile profile;
        transport::ConnectionInfo info;
        std::unique_ptr<transport::Stream> stream;
        std::uint16_t keep_alive_s = 0;
        std::atomic<std::int64_t> last_activity_ns{0};
        // Set under the broker session mutex when this session loses its
        // registry slot (takeover or shutdown); the reader polls it.
        std::atomic<bool> kicked{false};

        std::mutex qmu;
        std::condition_variable qcv;
        std::deque<OutboundFrame> queue;
        bool closing = false;
        std::thread writer;
        std::uint16_t next_pid = 0;
    };
    using SessionPtr = std::shared_ptr<Session>;

    void accept_loop(transport::Listener* listener);
    void run_connection(transport::Listener* listener, int fd);
    void run_session(transport::Accepted acc);
    void housekeeping_loop();

    // Returns the registered session, or nullptr when the CONNECT was refused
    // (the refusal answer has already been written directly to the stream).
    SessionPtr handle_connect(transport::Accepted& acc, const codec::Connect& con);

    void dispatch_packet(const SessionPtr& sess, codec::Packet& pkt, bool& stop_session,
                         std::chrono::steady_clock::time_point received_at);
    // Wire-level refusals (bad topic, retain, QoS beyond the cap) before the
    // security dispatch proper.
    void handle_publish_checked(const SessionPtr& sess, codec::Publish& pub, bool& stop_session,
                                std::chrono::steady_clock::time_point received_at);
    void handle_publish(const SessionPtr& sess, codec::Publish& pub,
                        std::chrono::steady_clock::time_point received_at);
    void handle_subscribe(const SessionPtr& sess, const codec::Subscribe& sub);
    void handle_unsubscribe(const SessionPtr& sess, const codec::Unsubscribe& unsub);

    // False when the frame was dropped (session closing or queue overflow).
    bool enqueue(const SessionPtr& sess, std::vector<std::uint8_t> bytes,
                 std::optional<std::chrono::steady_clock::time_point> received_at = {});
    void writer_loop(const SessionPtr& sess);
    // Sends a final packet (best effort), then wakes the reader and lets the
    // writer drain. Never blocks on the peer.
    void kick_session(const SessionPtr& sess, std::vector<std::uint8_t> farewell);

    void audit_decision(const Session& pub, const security::ClientSecurityProfile& pub_eff,
                        const Session& sub, const security::ClientSecurityProfile& sub_eff,
                        const std::string& topic, const security::DeliveryDecision& d);

    std::vector<std::uint8_t> encode_for(const Session& sess, const codec::Packet& pkt) const;

    config::BrokerConfig cfg_;
    std::vector<std::unique_ptr<transport::Listener>> listeners_;
    topics::SubscriptionTable table_;
    audit::AuditLog audit_;
    WriteTap tap_;

    // Guards sessions_, auto_id_seq_, and the kicked hand-off during takeover;
    // subscription-table writes happen under it too so a takeover cannot
    // interleave with the old session's SUBSCRIBE.
    mutable std::mutex smu_;
    std::map<std::string, SessionPtr> sessions_;
    std::uint64_t auto_id_seq_ = 0;

    std::vector<std::thread> accept_threads_;
    std::thread housekeeper_;
    std::atomic<bool> running_{false};
    std::atomic<bool> stopping_{false};

    // Detached connection threads; stop() waits for the count to hit zero.
    std::atomic<std::size_t> live_connections_{0};
    std::mutex conn_mu_;
    std::condition_variable conn_cv_;

    std::mutex samples_mu_;
    std::vector<ForwardSample> samples_;

    struct Counters {
        std::atomic<std::uint64_t> connections_accepted{0};
        std::atomic<std::uint64_t> handshake_failures{0};
        std::atomic<std::uint64_t> sessions_taken_over{0};
        std::atomic<std::uint64_t> keepalive_expirations{0};
        std::atomic<std::uint64_t> publishes_received{0};
        std::atomic<std::uint64_t> messages_forwarded{0};
        std::atomic<std::uint64_t> deliveries_denied{0};
        std::atomic<std::uint64_t> invalid_security_values{0};
        std::atomic<std::uint64_t> malformed_packets{0};
        std::atomic<std::uint64_t> queue_overflows{0};
    };
    Counters ctr_;
};

} // namespace mqttsec::broker
