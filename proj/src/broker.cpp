#include "mqttsec/broker.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <utility>
#include <variant>

namespace mqttsec::broker {

using codec::Version;
using security::EnforcementFlag;
using security::SecurityLevel;

namespace {

// QoS-1 packet ids for forwarded messages; zero is reserved [MQTT-2.2.1-2].
std::uint16_t next_nonzero(std::uint16_t& pid)
{
    if (++pid == 0)
        ++pid;
    return pid;
}

std::int64_t steady_ns(std::chrono::steady_clock::time_point t)
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(t.time_since_epoch()).count();
}

} // namespace

Broker::Broker(config::BrokerConfig cfg) : cfg_(std::move(cfg))
{
    config::validate(cfg_);
    if (!cfg_.audit_path.empty())
        audit_.open(cfg_.audit_path, cfg_.audit_log_delivered);
}

Broker::~Broker()
{
    stop();
}

void Broker::start()
{
    if (running_.exchange(true))
        return;
    stopping_.store(false);

    // OpenSSL writes to a dead peer raise SIGPIPE; the broker must survive
    // clients vanishing mid-write.
    std::signal(SIGPIPE, SIG_IGN);

    listeners_.clear();
    for (const auto& lc : cfg_.listeners)
        listeners_.push_back(std::make_unique<transport::Listener>(lc));

    for (auto& l : listeners_)
        accept_threads_.emplace_back([this, lp = l.get()] { accept_loop(lp); });
    housekeeper_ = std::thread([this] { housekeeping_loop(); });
}

void Broker::stop()
{
    if (!running_.load())
        return;
    stopping_.store(true);

    for (auto& l : listeners_)
        l->close();
    for (auto& t : accept_threads_)
        if (t.joinable())
            t.join();
    accept_threads_.clear();
    if (housekeeper_.joinable())
        housekeeper_.join();

    std::vector<SessionPtr> live;
    {
        std::lock_guard lock(smu_);
        for (auto& [id, s] : sessions_)
            live.push_back(s);
    }
    for (auto& s : live)
    {
        s->kicked.store(true);
        s->stream->shutdown();
    }

    std::unique_lock lock(conn_mu_);
    conn_cv_.wait(lock, [this] { return live_connections_.load() == 0; });
    lock.unlock();

    listeners_.clear();
    running_.store(false);
}

std::uint16_t Broker::port(const std::string& listener_name) const
{
    for (const auto& l : listeners_)
        if (l->config().name == listener_name)
            return l->bound_port();
    throw config::ConfigError("no listener named '" + listener_name + "'");
}

BrokerStats Broker::stats() const
{
    BrokerStats s;
    s.connections_accepted = ctr_.connections_accepted.load();
    s.handshake_failures = ctr_.handshake_failures.load();
    {
        std::lock_guard lock(smu_);
        s.sessions_active = sessions_.size();
    }
    s.sessions_taken_over = ctr_.sessions_taken_over.load();
    s.keepalive_expirations = ctr_.keepalive_expirations.load();
    s.publishes_received = ctr_.publishes_received.load();
    s.messages_forwarded = ctr_.messages_forwarded.load();
    s.deliveries_denied = ctr_.deliveries_denied.load();
    s.invalid_security_values = ctr_.invalid_security_values.load();
    s.malformed_packets = ctr_.malformed_packets.load();
    s.queue_overflows = ctr_.queue_overflows.load();
    s.audit_errors = audit_.error_count();
    return s;
}

std::vector<ForwardSample> Broker::take_forward_samples()
{
    std::lock_guard lock(samples_mu_);
    return std::exchange(samples_, {});
}

// ---------------------------------------------------------------------------
// Accept path

void Broker::accept_loop(transport::Listener* listener)
{
    while (!stopping_.load())
    {
        auto fd = listener->accept_fd();
        if (!fd)
            break;
        live_connections_.fetch_add(1);
        std::thread([this, listener, cfd = *fd] { run_connection(listener, cfd); }).detach();
    }
}

void Broker::run_connection(transport::Listener* listener, int fd)
{
    struct CountGuard {
        Broker* b;
        ~CountGuard()
        {
            std::lock_guard lock(b->conn_mu_);
            b->live_connections_.fetch_sub(1);
            b->conn_cv_.notify_all();
        }
    } guard{this};

    std::string peer = transport::Listener::peer_name(fd);
    auto accepted = listener->finish_accept(fd, std::move(peer));
    if (!accepted)
    {
        // Only the TLS handshake can fail here; plain sockets always come up.
        ctr_.handshake_failures.fetch_add(1);
        return;
    }
    ctr_.connections_accepted.fetch_add(1);
    run_session(std::move(*accepted));
}

// ---------------------------------------------------------------------------
// Session lifecycle

void Broker::run_session(transport::Accepted acc)
{
    std::vector<std::uint8_t> rxbuf;
    std::uint8_t chunk[8192];

    // First packet must be a full CONNECT within the grace window.
    codec::Connect con;
    {
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
        for (;;)
        {
            if (stopping_.load() || std::chrono::steady_clock::now() > deadline)
                return;
            auto dec = codec::decode_packet(rxbuf);
            if (dec.status == codec::DecodeStatus::Ok)
            {
                auto* c = std::get_if<codec::Connect>(&dec.packet);
                if (!c)
                    return; // first packet was not CONNECT [MQTT-3.1.0-1]
                con = std::move(*c);
                rxbuf.erase(rxbuf.begin(), rxbuf.begin() + static_cast<long>(dec.consumed));
                break;
            }
            if (dec.status == codec::DecodeStatus::Malformed)
            {
                ctr_.malformed_packets.fetch_add(1);
                // Answer in the dialect the client revealed; an unknown or
                // unsupported version gets the v4-shape refusal every client
                // generation understands [MQTT-3.1.2-2].
                codec::Connack nack;
                if (dec.connect_version == Version::V5)
                {
                    nack.reason_code = codec::reason::MalformedPacket;
                    auto bytes = codec::encode_packet(nack, Version::V5);
                    acc.stream->write_all(bytes.data(), bytes.size());
                }
                else if (!dec.connect_version)
                {
                    nack.reason_code = codec::reason::V4UnacceptableProtocol;
                    auto bytes = codec::encode_packet(nack, Version::V4);
                    acc.stream->write_all(bytes.data(), bytes.size());
                }
                return;
            }
            // The cap applies before a session exists too; nobody gets to
            // stream an arbitrarily large CONNECT at the broker.
            if (rxbuf.size() > cfg_.max_packet_bytes + 8)
                return;
            int n = acc.stream->read_some(chunk, sizeof chunk, 250);
            if (n < 0)
                return;
            if (n > 0)
                rxbuf.insert(rxbuf.end(), chunk, chunk + n);
        }
    }

    SessionPtr sess = handle_connect(acc, con);
    if (!sess)
        return;

    bool stop_session = false;
    while (!stop_session && !sess->kicked.load() && !stopping_.load())
    {
        std::size_t off = 0;
        while (off < rxbuf.size())
        {
            auto dec = codec::decode_packet(
                std::span(rxbuf.data() + off, rxbuf.size() - off), sess->version);
            if (dec.status == codec::DecodeStatus::Ok)
            {
                if (dec.consumed > cfg_.max_packet_bytes)
                {
                    if (sess->version == Version::V5)
                        kick_session(sess, encode_for(*sess, codec::Disconnect{
                                                                codec::reason::PacketTooLarge, {}}));
                    stop_session = true;
                    break;
                }
                auto received_at = std::chrono::steady_clock::now();
                sess->last_activity_ns.store(steady_ns(received_at));
                try
                {
                    dispatch_packet(sess, dec.packet, stop_session, received_at);
                }
                catch (const std::exception& e)
                {
                    // One misbehaving session must never take the broker
                    // down with it.
                    std::fprintf(stderr, "mqttsec: session '%s' dropped: %s\n",
                                 sess->client_id.c_str(), e.what());
                    stop_session = true;
                }
                off += dec.consumed;
                if (stop_session || sess->kicked.load())
                    break;
                continue;
            }
            if (dec.status == codec::DecodeStatus::Malformed)
            {
                ctr_.malformed_packets.fetch_add(1);
                if (sess->version == Version::V5)
                    kick_session(sess, encode_for(*sess, codec::Disconnect{
                                                            codec::reason::MalformedPacket, {}}));
                stop_session = true;
                break;
            }
            // Incomplete: enforce the size cap as soon as the remaining
            // length is known rather than buffering toward it.
            if (rxbuf.size() - off >= 2)
            {
                auto vi = codec::decode_varint(
                    std::span(rxbuf.data() + off + 1, rxbuf.size() - off - 1));
                if (vi.status == codec::DecodeStatus::Ok &&
                    1 + vi.consumed + vi.value > cfg_.max_packet_bytes)
                {
                    if (sess->version == Version::V5)
                        kick_session(sess, encode_for(*sess, codec::Disconnect{
                                                                codec::reason::PacketTooLarge, {}}));
                    stop_session = true;
                }
            }
            break;
        }
        if (off > 0)
            rxbuf.erase(rxbuf.begin(), rxbuf.begin() + static_cast<long>(off));
        if (stop_session)
            break;

        int n = sess->stream->read_some(chunk, sizeof chunk, 250);
        if (n < 0)
            break;
        if (n > 0)
            rxbuf.insert(rxbuf.end(), chunk, chunk + n);
    }

    // Teardown: let the writer drain what is already queued, then drop the
    // registry slot if this session still owns it.
    {
        std::lock_guard lock(sess->qmu);
        sess->closing = true;
    }
    sess->qcv.notify_all();
    if (sess->writer.joinable())
        sess->writer.join();
    sess->stream->shutdown();

    {
        std::lock_guard lock(smu_);
        auto it = sessions_.find(sess->client_id);
        if (it != sessions_.end() && it->second == sess)
        {
            sessions_.erase(it);
            table_.remove_client(sess->client_id);
        }
    }
}

Broker::SessionPtr Broker::handle_connect(transport::Accepted& acc, const codec::Connect& con)
{
    const Version version = con.protocol_version;

    auto refuse = [&](std::uint8_t v5_reason, std::uint8_t v4_code) {
        codec::Connack nack;
        nack.reason_code = version == Version::V5 ? v5_reason : v4_code;
        auto bytes = codec::encode_packet(nack, version);
        acc.stream->write_all(bytes.data(), bytes.size());
        return nullptr;
    };

    if (stopping_.load())
        return nullptr;

    auto parsed = security::parse_security_property(codec::user_properties(con.properties));
    if (parsed.invalid)
    {
        // A declared-but-unusable security flag must not silently degrade to
        // a default; the connection is refused outright.
        ctr_.invalid_security_values.fetch_add(1);
        return refuse(codec::reason::ImplementationSpecificError,
                      codec::reason::V4IdentifierRejected);
    }

    std::string client_id = con.client_id;
    bool assigned = false;
    if (client_id.empty())
    {
        if (version == Version::V4 && !con.clean_start)
            return refuse(0, codec::reason::V4IdentifierRejected); // [MQTT-3.1.3-8]
        std::lock_guard lock(smu_);
        client_id = "auto-" + std::to_string(++auto_id_seq_);
        assigned = true;
    }

    auto sess = std::make_shared<Session>();
    sess->client_id = client_id;
    sess->version = version;
    sess->profile =
        security::derive_profile(acc.info.security_level, parsed.flag, cfg_.legacy_policy);
    sess->info = acc.info;
    sess->stream = std::move(acc.stream);
    sess->keep_alive_s = con.keep_alive_s;
    sess->last_activity_ns.store(steady_ns(std::chrono::steady_clock::now()));

    if (sess->profile.flag == EnforcementFlag::Enforce &&
        sess->profile.transport_level == SecurityLevel::NonSecured)
        std::fprintf(stderr,
                     "mqttsec: client '%s' requests enforcement over a non-secured "
                     "connection; the flag cannot raise its own level\n",
                     client_id.c_str());

    SessionPtr old;
    bool at_limit = false;
    {
        std::lock_guard lock(smu_);
        auto it = sessions_.find(client_id);
        // Reconnecting under an existing id replaces a session instead of
        // adding one, so it passes even at the limit.
        if (it == sessions_.end() && sessions_.size() >= cfg_.session_limit)
        {
            at_limit = true;
        }
        else if (it != sessions_.end())
        {
            old = it->second;
            ctr_.sessions_taken_over.fetch_add(1);
            old->kicked.store(true);
            it->second = sess;
            // Clean session semantics: the old connection's subscriptions
            // die with it rather than transferring to the new one.
            table_.remove_client(client_id);
        }
        else
        {
            sessions_.emplace(client_id, sess);
        }
    }
    if (at_limit)
    {
        acc.stream = std::move(sess->stream); // hand back for the refusal
        return refuse(codec::reason::ServerBusy, codec::reason::V4ServerUnavailable);
    }
    if (old)
    {
        std::vector<std::uint8_t> farewell;
        if (old->version == Version::V5)
            farewell = encode_for(*old, codec::Disconnect{codec::reason::SessionTakenOver, {}});
        kick_session(old, std::move(farewell));
    }

    sess->writer = std::thread([this, sess] { writer_loop(sess); });

    codec::Connack ack;
    ack.reason_code = codec::reason::Success;
    ack.session_present = false;
    if (version == Version::V5)
    {
        ack.properties.push_back({codec::prop::MaximumQos, cfg_.max_qos});
        ack.properties.push_back({codec::prop::RetainAvailable, std::uint8_t{0}});
        ack.properties.push_back({codec::prop::SharedSubscriptionAvailable, std::uint8_t{0}});
        if (assigned)
            ack.properties.push_back({codec::prop::AssignedClientIdentifier, client_id});
    }
    enqueue(sess, encode_for(*sess, ack));
    return sess;
}

// ---------------------------------------------------------------------------
// Packet dispatch

void Broker::dispatch_packet(const SessionPtr& sess, codec::Packet& pkt, bool& stop_session,
                             std::chrono::steady_clock::time_point received_at)
{
    if (auto* pub = std::get_if<codec::Publish>(&pkt))
    {
        handle_publish_checked(sess, *pub, stop_session, received_at);
        return;
    }
    if (auto* sub = std::get_if<codec::Subscribe>(&pkt))
    {
        handle_subscribe(sess, *sub);
        return;
    }
    if (auto* unsub = std::get_if<codec::Unsubscribe>(&pkt))
    {
        handle_unsubscribe(sess, *unsub);
        return;
    }
    if (std::get_if<codec::Pingreq>(&pkt))
    {
        enqueue(sess, encode_for(*sess, codec::Pingresp{}));
        return;
    }
    if (std::get_if<codec::Disconnect>(&pkt))
    {
        stop_session = true;
        return;
    }
    if (std::get_if<codec::Puback>(&pkt))
        return; // ack for a forwarded QoS-1 message; nothing is retransmitted

    // CONNECT twice, or a server-to-client packet from a client: protocol
    // error, drop the connection [MQTT-3.1.0-2].
    if (sess->version == Version::V5)
        kick_session(sess, encode_for(*sess, codec::Disconnect{codec::reason::ProtocolError, {}}));
    stop_session = true;
}

void Broker::handle_subscribe(const SessionPtr& sess, const codec::Subscribe& sub)
{
    codec::Suback ack;
    ack.packet_id = sub.packet_id;

    auto parsed = security::parse_security_property(codec::user_properties(sub.properties));
    if (parsed.invalid)
    {
        ctr_.invalid_security_values.fetch_add(1);
        ack.reason_codes.assign(sub.entries.size(),
                                sess->version == Version::V5
                                    ? codec::reason::ImplementationSpecificError
                                    : codec::reason::V4SubackFailure);
        enqueue(sess, encode_for(*sess, ack));
        return;
    }

    for (const auto& e : sub.entries)
    {
        if (!topics::valid_topic_filter(e.filter))
        {
            ack.reason_codes.push_back(sess->version == Version::V5
                                           ? codec::reason::TopicFilterInvalid
                                           : codec::reason::V4SubackFailure);
            continue;
        }
        std::uint8_t granted = std::min(e.qos, cfg_.max_qos);
        {
            std::lock_guard lock(smu_);
            // A takeover may have raced this packet; a kicked session must
            // not leave subscriptions behind for its replacement to inherit.
            if (!sess->kicked.load())
                table_.subscribe({sess->client_id, e.filter, granted, parsed.flag});
        }
        ack.reason_codes.push_back(granted);
    }
    enqueue(sess, encode_for(*sess, ack));
}

void Broker::handle_unsubscribe(const SessionPtr& sess, const codec::Unsubscribe& unsub)
{
    codec::Unsuback ack;
    ack.packet_id = unsub.packet_id;
    for (const auto& f : unsub.filters)
    {
        bool removed;
        {
            std::lock_guard lock(smu_);
            removed = table_.unsubscribe(sess->client_id, f);
        }
        if (sess->version == Version::V5)
            ack.reason_codes.push_back(removed ? codec::reason::Success
                                               : codec::reason::NoSubscriptionExisted);
    }
    enqueue(sess, encode_for(*sess, ack));
}

void Broker::handle_publish_checked(const SessionPtr& sess, codec::Publish& pub,
                                    bool& stop_session,
                                    std::chrono::steady_clock::time_point received_at)
{
    ctr_.publishes_received.fetch_add(1);

    if (!topics::valid_topic_name(pub.topic))
    {
        if (sess->version == Version::V5)
            kick_session(sess,
                         encode_for(*sess, codec::Disconnect{codec::reason::TopicNameInvalid, {}}));
        stop_session = true;
        return;
    }
    if (pub.retain)
    {
        if (sess->version == Version::V5)
        {
            // CONNACK advertised Retain Available 0 [MQTT-3.3.1-11].
            kick_session(sess, encode_for(*sess, codec::Disconnect{
                                                     codec::reason::RetainNotSupported, {}}));
            stop_session = true;
            return;
        }
        pub.retain = false; // v4 has no way to advertise; degrade to plain delivery
    }
    if (pub.qos > cfg_.max_qos)
    {
        if (sess->version == Version::V5)
            kick_session(sess,
                         encode_for(*sess, codec::Disconnect{codec::reason::QosNotSupported, {}}));
        stop_session = true;
        return;
    }

    handle_publish(sess, pub, received_at);
}

void Broker::handle_publish(const SessionPtr& sess, codec::Publish& pub,
                            std::chrono::steady_clock::time_point received_at)
{
    auto parsed = security::parse_security_property(codec::user_properties(pub.properties));
    if (parsed.invalid)
    {
        // Refuse just this message: the sender declared a security intent the
        // broker cannot honor, so the message must not travel on a guess.
        ctr_.invalid_security_values.fetch_add(1);
        if (pub.qos > 0)
            enqueue(sess, encode_for(*sess, codec::Puback{
                                                *pub.packet_id,
                                                sess->version == Version::V5
                                                    ? codec::reason::ImplementationSpecificError
                                                    : codec::reason::Success,
                                                {}}));
        return;
    }

    security::ClientSecurityProfile pub_eff =
        parsed.flag ? security::make_profile(sess->profile.transport_level, *parsed.flag,
                                             security::FlagSource::ExplicitMessage)
                    : sess->profile;

    auto matched = table_.match_subscribers(pub.topic);

    std::vector<SessionPtr> targets(matched.size());
    {
        std::lock_guard lock(smu_);
        for (std::size_t i = 0; i < matched.size(); ++i)
        {
            auto it = sessions_.find(matched[i].client_id);
            if (it != sessions_.end())
                targets[i] = it->second;
        }
    }

    for (std::size_t i = 0; i < matched.size(); ++i)
    {
        const auto& m = matched[i];
        const SessionPtr& target = targets[i];
        if (!target || target->kicked.load())
            continue;

        security::ClientSecurityProfile sub_eff =
            m.override_flag
                ? security::make_profile(target->profile.transport_level, *m.override_flag,
                                         security::FlagSource::ExplicitMessage)
                : target->profile;

        auto decision = security::decide_delivery(pub_eff, sub_eff);
        audit_decision(*sess, pub_eff, *target, sub_eff, pub.topic, decision);
        if (!decision.deliver)
        {
            ctr_.deliveries_denied.fetch_add(1);
            continue;
        }

        codec::Publish out;
        out.topic = pub.topic;
        out.payload = pub.payload;
        out.qos = std::min(pub.qos, m.granted_qos);
        out.retain = false;
        out.dup = false;
        if (out.qos > 0)
        {
            std::lock_guard lock(target->qmu);
            out.packet_id = next_nonzero(target->next_pid);
        }
        if (target->version == Version::V5)
            out.properties = pub.properties;

        if (enqueue(target, codec::encode_packet(out, target->version),
                    cfg_.measure_forwarding ? std::optional(received_at) : std::nullopt))
            ctr_.messages_forwarded.fetch_add(1);
    }

    // The security decision is invisible to the publisher: a QoS-1 PUBLISH is
    // acknowledged as accepted whether or not anyone received it.
    if (pub.qos > 0)
        enqueue(sess, encode_for(*sess, codec::Puback{*pub.packet_id, codec::reason::Success, {}}));
}

void Broker::audit_decision(const Session& pub, const security::ClientSecurityProfile& pub_eff,
                            const Session& sub, const security::ClientSecurityProfile& sub_eff,
                            const std::string& topic, const security::DeliveryDecision& d)
{
    if (!audit_.enabled())
        return;
    audit::AuditEvent ev;
    ev.timestamp = std::chrono::system_clock::now();
    ev.publisher_id = pub.client_id;
    ev.subscriber_id = sub.client_id;
    ev.topic = topic;
    ev.decision = d;
    ev.publisher_level = pub_eff.transport_level;
    ev.publisher_flag = pub_eff.flag;
    ev.subscriber_level = sub_eff.transport_level;
    ev.subscriber_flag = sub_eff.flag;
    audit_.write(ev);
}

// ---------------------------------------------------------------------------
// Outbound queues

bool Broker::enqueue(const SessionPtr& sess, std::vector<std::uint8_t> bytes,
                     std::optional<std::chrono::steady_clock::time_point> received_at)
{
    {
        std::lock_guard lock(sess->qmu);
        if (sess->closing)
            return false;
        if (sess->queue.size() >= cfg_.outbound_queue_limit)
        {
            // A consumer that cannot keep up is cut off rather than allowed
            // to grow the queue without bound.
            ctr_.queue_overflows.fetch_add(1);
            sess->closing = true;
            sess->kicked.store(true);
            sess->stream->shutdown();
            sess->qcv.notify_all();
            return false;
        }
        sess->queue.push_back({std::move(bytes), received_at});
    }
    sess->qcv.notify_one();
    return true;
}

void Broker::writer_loop(const SessionPtr& sess)
{
    for (;;)
    {
        OutboundFrame frame;
        {
            std::unique_lock lock(sess->qmu);
            sess->qcv.wait(lock, [&] { return sess->closing || !sess->queue.empty(); });
            if (sess->queue.empty())
                return; // closing and drained
            frame = std::move(sess->queue.front());
            sess->queue.pop_front();
        }
        if (tap_)
            tap_(sess->client_id, sess->profile.transport_level, frame.bytes);
        bool ok = sess->stream->write_all(frame.bytes.data(), frame.bytes.size());
        if (ok && frame.received_at)
        {
            auto latency = std::chrono::steady_clock::now() - *frame.received_at;
            std::lock_guard lock(samples_mu_);
            samples_.push_back(
                {std::chrono::duration_cast<std::chrono::nanoseconds>(latency)});
        }
        if (!ok)
        {
            sess->kicked.store(true);
            sess->stream->shutdown();
            std::lock_guard lock(sess->qmu);
            sess->closing = true;
            sess->queue.clear();
            return;
        }
    }
}

void Broker::kick_session(const SessionPtr& sess, std::vector<std::uint8_t> farewell)
{
    {
        std::lock_guard lock(sess->qmu);
        if (!sess->closing && !farewell.empty())
            sess->queue.push_back({std::move(farewell), std::nullopt});
        sess->closing = true;
    }
    sess->kicked.store(true);
    sess->qcv.notify_all();
}

// ---------------------------------------------------------------------------
// Housekeeping

void Broker::housekeeping_loop()
{
    using namespace std::chrono;
    while (!stopping_.load())
    {
        std::this_thread::sleep_for(milliseconds(200));

        std::vector<SessionPtr> live;
        {
            std::lock_guard lock(smu_);
            for (auto& [id, s] : sessions_)
                live.push_back(s);
        }
        auto now = steady_ns(steady_clock::now());
        for (auto& s : live)
        {
            if (s->keep_alive_s == 0 || s->kicked.load())
                continue;
            // One and a half keep-alive periods of silence [MQTT-3.1.2-24].
            auto limit_ns = static_cast<std::int64_t>(s->keep_alive_s) * 1'500'000'000LL;
            if (now - s->last_activity_ns.load() > limit_ns)
            {
                ctr_.keepalive_expirations.fetch_add(1);
                std::vector<std::uint8_t> farewell;
                if (s->version == Version::V5)
                    farewell =
                        encode_for(*s, codec::Disconnect{codec::reason::KeepAliveTimeout, {}});
                kick_session(s, std::move(farewell));
            }
        }
    }
}

std::vector<std::uint8_t> Broker::encode_for(const Session& sess, const codec::Packet& pkt) const
{
    return codec::encode_packet(pkt, sess.version);
}

} // namespace mqttsec::broker
