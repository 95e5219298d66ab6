#include "mqttsec/broker.hpp"
#include "mqttsec/config.hpp"
#include "mqttsec/security.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <thread>

using namespace mqttsec;

namespace {

std::atomic_bool g_stop{false};

void on_signal(int)
{
    g_stop.store(true);
}

// Split "[bind:]port"; a bare number is a port on all interfaces.
bool parse_endpoint(const std::string& text, std::string& bind, std::uint16_t& port)
{
    auto colon = text.rfind(':');
    std::string portpart = colon == std::string::npos ? text : text.substr(colon + 1);
    try
    {
        unsigned long v = std::stoul(portpart);
        if (v > 65535)
            return false;
        port = static_cast<std::uint16_t>(v);
    }
    catch (const std::exception&)
    {
        return false;
    }
    if (colon != std::string::npos)
        bind = text.substr(0, colon);
    return true;
}

transport::ListenerConfig* find_listener(config::BrokerConfig& cfg, const std::string& name)
{
    for (auto& l : cfg.listeners)
        if (l.name == name)
            return &l;
    return nullptr;
}

void print_decision_table()
{
    std::printf("%-12s %-8s   %-12s %-8s   %s\n", "pub-level", "pub-flag", "sub-level",
                "sub-flag", "outcome");
    for (const auto& row : security::decision_truth_table())
    {
        std::string outcome = row.decision.deliver ? "deliver" : "deny";
        if (row.decision.reason)
            outcome += std::string(" (") + security::reason_name(*row.decision.reason) + ")";
        std::printf("%-12s %-8s   %-12s %-8s   %s\n", security::level_name(row.pub_level),
                    security::flag_name(row.pub_flag), security::level_name(row.sub_level),
                    security::flag_name(row.sub_flag), outcome.c_str());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mqttsecd - MQTT broker enforcing per-client security levels"};

    std::string config_path;
    std::string plain_ep, tls_ep, cert_path, key_path, policy, audit_path;
    int max_qos = -1;
    long long session_limit = -1, queue_limit = -1, max_packet = -1;
    bool audit_delivered = false, measure = false, show_table = false;

    app.add_option("-c,--config", config_path, "Broker config file");
    app.add_option("--plain", plain_ep, "Plain listener as [bind:]port (overrides config)");
    app.add_option("--tls", tls_ep, "TLS listener as [bind:]port (overrides config)");
    app.add_option("--cert", cert_path, "Certificate PEM for --tls");
    app.add_option("--key", key_path, "Private key PEM for --tls");
    app.add_option("--legacy-policy", policy,
                   "infer-from-transport | always-relaxed (overrides config)");
    app.add_option("--max-qos", max_qos, "Highest accepted QoS, 0 or 1")
        ->check(CLI::Range(0, 1));
    app.add_option("--session-limit", session_limit, "Concurrent session cap");
    app.add_option("--audit", audit_path, "Audit log path (JSONL)");
    app.add_flag("--audit-delivered", audit_delivered, "Also log delivered messages");
    app.add_option("--max-packet-bytes", max_packet, "Per-packet size cap");
    app.add_option("--queue-limit", queue_limit, "Outbound queue cap per session");
    app.add_flag("--measure-forwarding", measure, "Collect broker-side latency samples");
    app.add_flag("--decision-table", show_table,
                 "Print the 16-row delivery decision table and exit");

    CLI11_PARSE(app, argc, argv);

    if (show_table)
    {
        print_decision_table();
        return 0;
    }

    config::BrokerConfig cfg;
    try
    {
        if (!config_path.empty())
            cfg = config::load_config(config_path);

        // Flags override whatever the file said.
        if (!plain_ep.empty())
        {
            auto* l = find_listener(cfg, "plain");
            if (!l)
            {
                cfg.listeners.emplace_back();
                l = &cfg.listeners.back();
                l->name = "plain";
            }
            if (!parse_endpoint(plain_ep, l->bind_address, l->port))
            {
                std::fprintf(stderr, "mqttsecd: bad --plain endpoint '%s'\n", plain_ep.c_str());
                return 1;
            }
        }
        if (!tls_ep.empty())
        {
            auto* l = find_listener(cfg, "tls");
            if (!l)
            {
                cfg.listeners.emplace_back();
                l = &cfg.listeners.back();
                l->name = "tls";
                l->kind = transport::ListenerKind::Tls;
            }
            if (!parse_endpoint(tls_ep, l->bind_address, l->port))
            {
                std::fprintf(stderr, "mqttsecd: bad --tls endpoint '%s'\n", tls_ep.c_str());
                return 1;
            }
            if (!cert_path.empty())
                l->cert_path = cert_path;
            if (!key_path.empty())
                l->key_path = key_path;
        }
        if (!policy.empty())
        {
            if (policy == "infer-from-transport")
                cfg.legacy_policy = security::LegacyPolicy::InferFromTransport;
            else if (policy == "always-relaxed")
                cfg.legacy_policy = security::LegacyPolicy::AlwaysRelaxed;
            else
            {
                std::fprintf(stderr, "mqttsecd: unknown legacy policy '%s'\n", policy.c_str());
                return 1;
            }
        }
        if (max_qos >= 0)
            cfg.max_qos = static_cast<std::uint8_t>(max_qos);
        if (session_limit > 0)
            cfg.session_limit = static_cast<std::size_t>(session_limit);
        if (!audit_path.empty())
            cfg.audit_path = audit_path;
        if (audit_delivered)
            cfg.audit_log_delivered = true;
        if (max_packet > 0)
            cfg.max_packet_bytes = static_cast<std::size_t>(max_packet);
        if (queue_limit > 0)
            cfg.outbound_queue_limit = static_cast<std::size_t>(queue_limit);
        if (measure)
            cfg.measure_forwarding = true;

        if (cfg.listeners.empty())
        {
            // Bare invocation: a plain listener on the standard port.
            transport::ListenerConfig l;
            l.name = "plain";
            cfg.listeners.push_back(l);
        }

        broker::Broker broker(cfg);
        broker.start();

        for (const auto& l : cfg.listeners)
            std::printf("mqttsecd: listening on %s:%u (%s)\n", l.bind_address.c_str(),
                        broker.port(l.name),
                        l.kind == transport::ListenerKind::Tls ? "tls" : "plain");
        std::fflush(stdout);

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop.load())
            std::this_thread::sleep_for(std::chrono::milliseconds(200));

        broker.stop();

        auto st = broker.stats();
        std::printf("mqttsecd: %llu connections, %llu publishes, %llu forwarded, "
                    "%llu denied, %llu invalid security values\n",
                    (unsigned long long)st.connections_accepted,
                    (unsigned long long)st.publishes_received,
                    (unsigned long long)st.messages_forwarded,
                    (unsigned long long)st.deliveries_denied,
                    (unsigned long long)st.invalid_security_values);
        return 0;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "mqttsecd: %s\n", e.what());
        return 1;
    }
}
