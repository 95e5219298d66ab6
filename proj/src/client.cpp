#include "mqttsec/client.hpp"

namespace mqttsec::client {

namespace {

codec::Properties flag_properties(std::optional<security::EnforcementFlag> flag,
                                  codec::Version version)
{
    codec::Properties props;
    if (flag)
    {
        // v3.1.1 has no property section to carry the flag; such clients fall
        // under the broker's legacy policy instead.
        if (version == codec::Version::V4)
            throw MqttError("the security flag requires MQTT 5");
        props.push_back(codec::make_user_property(
            "s", *flag == security::EnforcementFlag::Enforce ? "1" : "0"));
    }
    return props;
}

} // namespace

BlockingClient::~BlockingClient()
{
    close();
}

codec::Connack BlockingClient::connect(const ClientOptions& opts)
{
    close();
    version_ = opts.version;
    io_timeout_ms_ = opts.io_timeout_ms;

    transport::ConnectOptions copts;
    copts.host = opts.host;
    copts.port = opts.port;
    copts.tls = opts.tls;
    copts.timeout_ms = opts.io_timeout_ms;

    auto t0 = std::chrono::steady_clock::now();
    conn_ = transport::connect_stream(copts);
    tls_version_ = conn_.tls_version;
    tls_cipher_ = conn_.tls_cipher;

    codec::Connect con;
    con.protocol_version = opts.version;
    con.client_id = opts.client_id;
    con.clean_start = opts.clean_start;
    con.keep_alive_s = opts.keep_alive_s;
    con.properties = flag_properties(opts.connect_flag, opts.version);
    send(con);

    auto pkt = await(
        [](const codec::Packet& p) { return std::holds_alternative<codec::Connack>(p); },
        opts.io_timeout_ms);
    connect_duration_ = std::chrono::steady_clock::now() - t0;

    auto ack = std::get<codec::Connack>(pkt);
    connected_ = ack.reason_code == 0;
    if (!connected_)
        close();
    return ack;
}

codec::Suback BlockingClient::subscribe(const std::string& filter, std::uint8_t qos,
                                        std::optional<security::EnforcementFlag> flag)
{
    codec::Subscribe sub;
    sub.packet_id = ++next_pid_ ? next_pid_ : ++next_pid_;
    sub.entries.push_back({filter, qos});
    sub.properties = flag_properties(flag, version_);
    send(sub);

    std::uint16_t pid = sub.packet_id;
    auto pkt = await(
        [pid](const codec::Packet& p) {
            auto* s = std::get_if<codec::Suback>(&p);
            return s && s->packet_id == pid;
        },
        io_timeout_ms_);
    return std::get<codec::Suback>(pkt);
}

codec::Unsuback BlockingClient::unsubscribe(const std::string& filter)
{
    codec::Unsubscribe uns;
    uns.packet_id = ++next_pid_ ? next_pid_ : ++next_pid_;
    uns.filters.push_back(filter);
    send(uns);

    std::uint16_t pid = uns.packet_id;
    auto pkt = await(
        [pid](const codec::Packet& p) {
            auto* u = std::get_if<codec::Unsuback>(&p);
            return u && u->packet_id == pid;
        },
        io_timeout_ms_);
    return std::get<codec::Unsuback>(pkt);
}

std::optional<codec::Puback> BlockingClient::publish(
    const std::string& topic, std::vector<std::uint8_t> payload, std::uint8_t qos,
    std::optional<security::EnforcementFlag> flag, bool retain)
{
    codec::Publish pub;
    pub.topic = topic;
    pub.payload = std::move(payload);
    pub.qos = qos;
    pub.retain = retain;
    pub.properties = flag_properties(flag, version_);
    if (qos > 0)
        pub.packet_id = ++next_pid_ ? next_pid_ : ++next_pid_;
    send(pub);

    if (qos == 0)
        return std::nullopt;

    std::uint16_t pid = *pub.packet_id;
    auto pkt = await(
        [pid](const codec::Packet& p) {
            auto* a = std::get_if<codec::Puback>(&p);
            return a && a->packet_id == pid;
        },
        io_timeout_ms_);
    return std::get<codec::Puback>(pkt);
}

std::optional<codec::Publish> BlockingClient::receive(int timeout_ms)
{
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;)
    {
        if (!inbox_.empty())
        {
            auto out = std::move(inbox_.front());
            inbox_.pop_front();
            return out;
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0)
            return std::nullopt;
        if (!pump(static_cast<int>(std::min<long long>(left, 100))))
        {
            // The broker may close right behind its final packet; pump has
            // already decoded whatever arrived before the EOF.
            if (inbox_.empty())
                return std::nullopt;
        }
    }
}

void BlockingClient::ping()
{
    send(codec::Pingreq{});
    await([](const codec::Packet& p) { return std::holds_alternative<codec::Pingresp>(p); },
          io_timeout_ms_);
}

void BlockingClient::disconnect()
{
    if (!conn_.stream)
        return;
    try
    {
        send(codec::Disconnect{});
    }
    catch (const std::exception&)
    {
    }
    close();
}

void BlockingClient::close()
{
    if (conn_.stream)
        conn_.stream->shutdown();
    conn_.stream.reset();
    connected_ = false;
    rxbuf_.clear();
    pending_.clear();
    inbox_.clear();
}

void BlockingClient::send(const codec::Packet& p)
{
    if (!conn_.stream)
        throw MqttError("not connected");
    auto bytes = codec::encode_packet(p, version_);
    if (!conn_.stream->write_all(bytes.data(), bytes.size()))
        throw MqttError("connection lost while sending");
}

void BlockingClient::drain()
{
    for (;;)
    {
        auto d = codec::decode_packet(rxbuf_, version_);
        if (d.status == codec::DecodeStatus::Malformed)
            throw MqttError("malformed packet from broker: " + d.error);
        if (d.status == codec::DecodeStatus::Incomplete)
            break;
        rxbuf_.erase(rxbuf_.begin(), rxbuf_.begin() + static_cast<long>(d.consumed));

        if (auto* pub = std::get_if<codec::Publish>(&d.packet))
        {
            if (pub->qos > 0 && pub->packet_id)
            {
                codec::Puback ack;
                ack.packet_id = *pub->packet_id;
                send(ack);
            }
            inbox_.push_back(std::move(*pub));
        }
        else
            pending_.push_back(std::move(d.packet));
    }
}

bool BlockingClient::pump(int timeout_ms)
{
    if (!conn_.stream)
        return false;

    drain();
    std::uint8_t buf[4096];
    int n = conn_.stream->read_some(buf, sizeof buf, timeout_ms);
    if (n < 0)
    {
        connected_ = false; // peer gone; already-decoded packets stay readable
        return false;
    }
    rxbuf_.insert(rxbuf_.end(), buf, buf + n);
    // Decode immediately so the caller never waits out another poll slice
    // for a packet that has already arrived.
    drain();
    return true;
}

codec::Packet BlockingClient::await(const std::function<bool(const codec::Packet&)>& want,
                                    int timeout_ms)
{
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    auto take = [&]() -> std::optional<codec::Packet> {
        for (auto it = pending_.begin(); it != pending_.end(); ++it)
        {
            if (want(*it))
            {
                codec::Packet out = std::move(*it);
                pending_.erase(it);
                return out;
            }
        }
        return std::nullopt;
    };

    for (;;)
    {
        if (auto got = take())
            return std::move(*got);
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0)
            throw MqttError("timed out waiting for broker response");
        if (!pump(static_cast<int>(std::min<long long>(left, 100))))
        {
            // A refusal CONNACK or a DISCONNECT farewell is typically
            // followed by an immediate close; pump has already decoded it.
            if (auto got = take())
                return std::move(*got);
            throw MqttError("connection closed by broker");
        }
    }
}

} // namespace mqttsec::client
