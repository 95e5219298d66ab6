#pragma once

#include "mqttsec/security.hpp"
#include "mqttsec/transport.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mqttsec::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BrokerConfig {
    std::vector<transport::ListenerConfig> listeners;
    security::LegacyPolicy legacy_policy = security::LegacyPolicy::InferFromTransport;
    std::uint8_t max_qos = 1;
    std::size_t session_limit = 1024;
    std::string audit_path;            // empty → audit disabled
    bool audit_log_delivered = false;  // also record Deliver outcomes
    bool measure_forwarding = false;   // broker-side latency samples
    std::size_t max_packet_bytes = 1 << 20;
    std::size_t outbound_queue_limit = 1000;
};

// Key-value file, one `key = value` per line, '#' comments.
//
//   listener.<name>.kind         plain | tls
//   listener.<name>.bind         address (default 0.0.0.0)
//   listener.<name>.port         1-65535, or 0 for an ephemeral port
//   listener.<name>.cert         PEM path (tls)
//   listener.<name>.key          PEM path (tls)
//   listener.<name>.min_tls      1.2 | 1.3       (default 1.2)
//   listener.<name>.ciphers      OpenSSL cipher list (optional)
//   listener.<name>.client_cert  true | false    (request peer cert)
//   legacy_policy                infer-from-transport | always-relaxed
//   max_qos                      0 | 1
//   session_limit                positive integer
//   audit.path                   JSONL file path
//   audit.log_delivered          true | false
//   measure_forwarding           true | false
//   max_packet_bytes             positive integer
//   outbound_queue_limit         positive integer
BrokerConfig parse_config(const std::string& text);

BrokerConfig load_config(const std::string& path);

// Shared by parse_config and CLI flag handling: at least one listener,
// distinct ports (ephemeral 0s exempt), TLS listeners carry cert+key.
void validate(const BrokerConfig& cfg);

} // namespace mqttsec::config
