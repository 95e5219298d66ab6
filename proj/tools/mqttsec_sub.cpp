#include "mqttsec/client.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>

using namespace mqttsec;

namespace {

std::atomic_bool g_stop{false};

void on_signal(int)
{
    g_stop.store(true);
}

void print_message(const codec::Publish& msg)
{
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch())
                  .count() %
              1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char stamp[64];
    std::snprintf(stamp, sizeof stamp, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec, static_cast<int>(ms));

    std::string payload(msg.payload.begin(), msg.payload.end());
    std::printf("%s %s %s\n", stamp, msg.topic.c_str(), payload.c_str());
    std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mqttsec-sub - subscribe and print messages"};

    client::ClientOptions opts;
    bool tls = false, plain = false, v4 = false;
    bool enforce = false, relax = false, at_connect = false;
    std::vector<std::string> filters;
    int qos = 0;
    long long count = 0;

    app.add_option("--host", opts.host, "Broker host");
    app.add_option("-p,--port", opts.port, "Broker port (default 1883, or 8883 with --tls)");
    app.add_flag("--tls", tls, "Connect over TLS");
    app.add_flag("--plain", plain, "Connect over plain TCP (default)");
    app.add_flag("--v4", v4, "Speak MQTT 3.1.1 (no security property support)");
    app.add_option("-f,--filter", filters, "Topic filter (repeatable)")->required();
    app.add_option("-q,--qos", qos, "Requested QoS 0 or 1")->check(CLI::Range(0, 1));
    app.add_flag("--enforce", enforce, "Accept only messages matching this connection's level");
    app.add_flag("--relax", relax, "Accept messages from any level");
    app.add_flag("--at-connect", at_connect,
                 "Attach the flag to CONNECT instead of the SUBSCRIBE");
    app.add_option("-i,--client-id", opts.client_id, "Client identifier");
    app.add_option("-n,--count", count, "Exit after this many messages (0 = run until ^C)");

    CLI11_PARSE(app, argc, argv);

    if (tls && plain)
    {
        std::fprintf(stderr, "mqttsec-sub: --tls and --plain are mutually exclusive\n");
        return 2;
    }
    if (enforce && relax)
    {
        std::fprintf(stderr, "mqttsec-sub: --enforce and --relax are mutually exclusive\n");
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
            std::fprintf(stderr, "mqttsec-sub: connection refused (reason 0x%02x)\n",
                         ack.reason_code);
            return 1;
        }

        for (const auto& f : filters)
        {
            auto sub = c.subscribe(f, static_cast<std::uint8_t>(qos),
                                   at_connect ? std::nullopt : flag);
            for (auto rc : sub.reason_codes)
                if (rc >= 0x80)
                {
                    std::fprintf(stderr, "mqttsec-sub: filter '%s' refused (reason 0x%02x)\n",
                                 f.c_str(), rc);
                    return 1;
                }
        }

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);

        long long seen = 0;
        while (!g_stop.load() && (count == 0 || seen < count))
        {
            auto msg = c.receive(250);
            if (!msg)
            {
                if (!c.connected())
                {
                    std::fprintf(stderr, "mqttsec-sub: connection closed by broker\n");
                    return 1;
                }
                continue;
            }
            print_message(*msg);
            ++seen;
        }
        c.disconnect();
        return 0;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "mqttsec-sub: %s\n", e.what());
        return 1;
    }
}
