#include "mqttsec/config.hpp"

#include "doctest.h"

#include <cstdio>
#include <fstream>

using namespace mqttsec;

TEST_CASE("minimal config: one plain listener, everything else defaulted")
{
    auto cfg = config::parse_config("listener.main.kind = plain\n");
    REQUIRE(cfg.listeners.size() == 1);
    CHECK(cfg.listeners[0].name == "main");
    CHECK(cfg.listeners[0].kind == transport::ListenerKind::Plain);
    CHECK(cfg.listeners[0].bind_address == "0.0.0.0");
    CHECK(cfg.listeners[0].port == 1883);
    CHECK(cfg.legacy_policy == security::LegacyPolicy::InferFromTransport);
    CHECK(cfg.max_qos == 1);
    CHECK(cfg.session_limit == 1024);
    CHECK(cfg.audit_path.empty());
    CHECK_FALSE(cfg.audit_log_delivered);
    CHECK_FALSE(cfg.measure_forwarding);
    CHECK(cfg.max_packet_bytes == std::size_t{1} << 20);
    CHECK(cfg.outbound_queue_limit == 1000);
}

TEST_CASE("full config round-trips every key")
{
    const char* text = R"(
# listeners
listener.open.kind = plain
listener.open.bind = 127.0.0.1
listener.open.port = 11883

listener.secure.kind = tls
listener.secure.port = 18883
listener.secure.cert = /tmp/server.crt
listener.secure.key = /tmp/server.key
listener.secure.min_tls = 1.3
listener.secure.ciphers = HIGH:!aNULL
listener.secure.client_cert = true

legacy_policy = always-relaxed
max_qos = 0
session_limit = 7
audit.path = /tmp/audit.jsonl
audit.log_delivered = true
measure_forwarding = true
max_packet_bytes = 4096
outbound_queue_limit = 32
)";
    auto cfg = config::parse_config(text);
    REQUIRE(cfg.listeners.size() == 2);

    const auto& open = cfg.listeners[0];
    CHECK(open.name == "open");
    CHECK(open.kind == transport::ListenerKind::Plain);
    CHECK(open.bind_address == "127.0.0.1");
    CHECK(open.port == 11883);

    const auto& secure = cfg.listeners[1];
    CHECK(secure.kind == transport::ListenerKind::Tls);
    CHECK(secure.port == 18883);
    CHECK(secure.cert_path == "/tmp/server.crt");
    CHECK(secure.key_path == "/tmp/server.key");
    CHECK(secure.min_tls_version == transport::TlsVersion::V1_3);
    CHECK(secure.cipher_list == "HIGH:!aNULL");
    CHECK(secure.require_client_cert);

    CHECK(cfg.legacy_policy == security::LegacyPolicy::AlwaysRelaxed);
    CHECK(cfg.max_qos == 0);
    CHECK(cfg.session_limit == 7);
    CHECK(cfg.audit_path == "/tmp/audit.jsonl");
    CHECK(cfg.audit_log_delivered);
    CHECK(cfg.measure_forwarding);
    CHECK(cfg.max_packet_bytes == 4096);
    CHECK(cfg.outbound_queue_limit == 32);
}

TEST_CASE("tls kind moves the default port off 1883")
{
    auto cfg = config::parse_config("listener.s.kind = tls\n"
                                    "listener.s.cert = c.pem\n"
                                    "listener.s.key = k.pem\n");
    CHECK(cfg.listeners[0].port == 8883);

    // An explicit port set after the kind always wins.
    cfg = config::parse_config("listener.s.kind = tls\n"
                               "listener.s.port = 1883\n"
                               "listener.s.cert = c.pem\n"
                               "listener.s.key = k.pem\n");
    CHECK(cfg.listeners[0].port == 1883);
}

TEST_CASE("comments, blank lines, and whitespace are tolerated")
{
    auto cfg = config::parse_config("\n"
                                    "   # full-line comment\n"
                                    "listener.a.kind = plain   # trailing comment\n"
                                    "\t listener.a.port\t=\t0 \n"
                                    "\n");
    CHECK(cfg.listeners[0].port == 0); // ephemeral
}

TEST_CASE("config rejections")
{
    auto bad = [](const char* text) {
        CHECK_THROWS_AS((void)config::parse_config(text), config::ConfigError);
    };

    bad("");                                            // no listeners
    bad("nonsense_key = 1\n");                          // unknown key
    bad("listener.a.kind = plain\nmax_qos = 2\n");      // QoS 2 unsupported
    bad("listener.a.kind = plain\nmax_qos = -1\n");
    bad("listener.a.kind = plain\nsession_limit = 0\n");
    bad("listener.a.kind = plain\noutbound_queue_limit = 0\n");
    bad("listener.a.kind = plain\nmax_packet_bytes = 8\n"); // below floor
    bad("listener.a.kind = plain\nmeasure_forwarding = yes\n");
    bad("listener.a.kind = plain\nlegacy_policy = maybe\n");
    bad("listener.a.kind = carrier-pigeon\n");
    bad("listener.a.port = 70000\n");
    bad("listener.a.min_tls = 1.1\n");
    bad("listener.a.wat = 1\n");                        // unknown listener field
    bad("listener.a = plain\n");                        // missing field part
    bad("listener.a.kind = plain\nlistener.a.kind\n");  // no '='
    bad("= value\n");                                   // empty key
    bad("listener.t.kind = tls\n");                     // tls without cert/key
    bad("listener.t.kind = tls\nlistener.t.cert = c\n");
    // same explicit port twice
    bad("listener.a.kind = plain\nlistener.a.port = 5555\n"
        "listener.b.kind = plain\nlistener.b.port = 5555\n");
}

TEST_CASE("validate catches duplicate listener names built programmatically")
{
    config::BrokerConfig cfg;
    transport::ListenerConfig a;
    a.name = "x";
    a.port = 1;
    transport::ListenerConfig b;
    b.name = "x";
    b.port = 2;
    cfg.listeners = {a, b};
    CHECK_THROWS_AS(config::validate(cfg), config::ConfigError);
}

TEST_CASE("ephemeral port zero may repeat across listeners")
{
    auto cfg = config::parse_config("listener.a.kind = plain\nlistener.a.port = 0\n"
                                    "listener.b.kind = plain\nlistener.b.port = 0\n");
    CHECK(cfg.listeners.size() == 2);
}

TEST_CASE("load_config reads a file and reports a missing one")
{
    std::string path = "/tmp/mqttsec_test_config.conf";
    {
        std::ofstream out(path);
        out << "listener.main.kind = plain\nlistener.main.port = 0\n";
    }
    auto cfg = config::load_config(path);
    CHECK(cfg.listeners[0].port == 0);
    std::remove(path.c_str());

    CHECK_THROWS_AS((void)config::load_config("/tmp/definitely-not-here.conf"),
                    config::ConfigError);
}
