#include "mqttsec/client.hpp"

#include "CLI11.hpp"

#include <cstdio>

using namespace mqttsec;

int main(int argc, char** argv)
{
    CLI::App app{"mqttsec-pub - publish one message"};

    client::ClientOptions opts;
    bool tls = false, plain = false, v4 = false;
    bool enforce = false, relax = false, at_connect = false;
    std::string topic, payload;
    int qos = 0;

    app.add_option("--host", opts.host, "Broker host");
    app.add_option("-p,--port", opts.port, "Broker port (default 1883, or 8883 with --tls)");
    app.add_flag("--tls", tls, "Connect over TLS");
    app.add_flag("--plain", plain, "Connect over plain TCP (default)");
    app.add_flag("--v4", v4, "Speak MQTT 3.1.1 (no security property support)");
    app.add_option("-t,--topic", topic, "Topic name")->required();
    app.add_option("-m,--payload", payload, "Message payload");
    app.add_option("-q,--qos", qos, "QoS 0 or 1")->check(CLI::Range(0, 1));
    app.add_flag("--enforce", enforce, "Demand the message stay at this connection's level");
    app.add_flag("--relax", relax, "Waive enforcement for this message");
    app.add_flag("--at-connect", at_connect,
                 "Attach the flag to CONNECT instead of the PUBLISH");
    app.add_option("-i,--client-id", opts.client_id, "Client identifier");
    app.add_option("--timeout-ms", opts.io_timeout_ms, "I/O timeout");

    CLI11_PARSE(app, argc, argv);

    if (tls && plain)
    {
        std::fprintf(stderr, "mqttsec-pub: --tls and --plain are mutually exclusive\n");
        return 2;
    }
    if (enforce && relax)
    {
        std::fprintf(stderr, "mqttsec-pub: --enforce and --relax are mutually exclusive\n");
        return 2;
    }

    opts.tls = tls;
    if (app.count("--port") == 0)
        opts.port = tls ? 8883 : 1883;
    if (v4)
        opts.version = codec::Version::V4;

    std::optional<security::EnforcementFlag> flag;
    if (enforce)
        flag = security::EnforcementFlag::Enforce;
    if (relax)
        flag = security::EnforcementFlag::Relax;
    if (at_connect)
        opts.connect_flag = flag;

    try
    {
        client::BlockingClient c;
        auto ack = c.connect(opts);
        if (ack.reason_code != 0)
        {
            std::fprintf(stderr, "mqttsec-pub: connection refused (reason 0x%02x)\n",
                         ack.reason_code);
            return 1;
        }

        std::vector<std::uint8_t> bytes(payload.begin(), payload.end());
        auto puback = c.publish(topic, std::move(bytes), static_cast<std::uint8_t>(qos),
                                at_connect ? std::nullopt : flag);
        if (qos == 1)
        {
            if (!puback)
            {
                std::fprintf(stderr, "mqttsec-pub: no PUBACK received\n");
                return 1;
            }
            if (puback->reason_code >= 0x80)
            {
                std::fprintf(stderr, "mqttsec-pub: publish refused (reason 0x%02x)\n",
                             puback->reason_code);
                return 1;
            }
        }
        c.disconnect();
        return 0;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "mqttsec-pub: %s\n", e.what());
        return 1;
    }
}
