#include "mqttsec/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mqttsec::config {

namespace {

std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key)
{
    if (v == "true")
        return true;
    if (v == "false")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& v, const std::string& key, std::uint64_t max)
{
    std::uint64_t out = 0;
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    std::istringstream(v) >> out;
    if (out > max)
        throw ConfigError(key + ": value " + v + " out of range");
    return out;
}

transport::ListenerConfig& listener_by_name(BrokerConfig& cfg, const std::string& name)
{
    for (auto& l : cfg.listeners)
        if (l.name == name)
            return l;
    transport::ListenerConfig l;
    l.name = name;
    cfg.listeners.push_back(std::move(l));
    return cfg.listeners.back();
}

void apply_listener_key(transport::ListenerConfig& l, const std::string& field,
                        const std::string& value, const std::string& key)
{
    if (field == "kind")
    {
        if (value == "plain")
            l.kind = transport::ListenerKind::Plain;
        else if (value == "tls")
        {
            l.kind = transport::ListenerKind::Tls;
            if (l.port == 1883)
                l.port = 8883;
        }
        else
            throw ConfigError(key + ": expected plain or tls, got '" + value + "'");
    }
    else if (field == "bind")
        l.bind_address = value;
    else if (field == "port")
        l.port = static_cast<std::uint16_t>(parse_uint(value, key, 65535));
    else if (field == "cert")
        l.cert_path = value;
    else if (field == "key")
        l.key_path = value;
    else if (field == "min_tls")
    {
        if (value == "1.2")
            l.min_tls_version = transport::TlsVersion::V1_2;
        else if (value == "1.3")
            l.min_tls_version = transport::TlsVersion::V1_3;
        else
            throw ConfigError(key + ": expected 1.2 or 1.3, got '" + value + "'");
    }
    else if (field == "ciphers")
        l.cipher_list = value;
    else if (field == "client_cert")
        l.require_client_cert = parse_bool(value, key);
    else
        throw ConfigError("unknown configuration key '" + key + "'");
}

} // namespace

BrokerConfig parse_config(const std::string& text)
{
    BrokerConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    while (std::getline(in, line))
    {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;

        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");

        if (key.rfind("listener.", 0) == 0)
        {
            std::string rest = key.substr(9);
            auto dot = rest.find('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 >= rest.size())
                throw ConfigError("bad listener key '" + key + "'");
            apply_listener_key(listener_by_name(cfg, rest.substr(0, dot)),
                               rest.substr(dot + 1), value, key);
        }
        else if (key == "legacy_policy")
        {
            if (value == "infer-from-transport")
                cfg.legacy_policy = security::LegacyPolicy::InferFromTransport;
            else if (value == "always-relaxed")
                cfg.legacy_policy = security::LegacyPolicy::AlwaysRelaxed;
            else
                throw ConfigError(
                    "legacy_policy: expected infer-from-transport or always-relaxed, got '" +
                    value + "'");
        }
        else if (key == "max_qos")
            cfg.max_qos = static_cast<std::uint8_t>(parse_uint(value, key, 1));
        else if (key == "session_limit")
            cfg.session_limit = parse_uint(value, key, 1u << 20);
        else if (key == "audit.path")
            cfg.audit_path = value;
        else if (key == "audit.log_delivered")
            cfg.audit_log_delivered = parse_bool(value, key);
        else if (key == "measure_forwarding")
            cfg.measure_forwarding = parse_bool(value, key);
        else if (key == "max_packet_bytes")
            cfg.max_packet_bytes = parse_uint(value, key, 256u << 20);
        else if (key == "outbound_queue_limit")
            cfg.outbound_queue_limit = parse_uint(value, key, 1u << 20);
        else
            throw ConfigError("unknown configuration key '" + key + "'");
    }

    validate(cfg);
    return cfg;
}

BrokerConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void validate(const BrokerConfig& cfg)
{
    if (cfg.listeners.empty())
        throw ConfigError("at least one listener is required");

    std::set<std::uint16_t> ports;
    std::set<std::string> names;
    for (const auto& l : cfg.listeners)
    {
        if (!names.insert(l.name).second)
            throw ConfigError("duplicate listener name '" + l.name + "'");
        if (l.port != 0 && !ports.insert(l.port).second)
            throw ConfigError("duplicate listener port " + std::to_string(l.port));
        if (l.kind == transport::ListenerKind::Tls)
        {
            if (l.cert_path.empty() || l.key_path.empty())
                throw ConfigError("listener '" + l.name + "': tls requires cert and key");
        }
    }
    if (cfg.session_limit == 0)
        throw ConfigError("session_limit must be positive");
    if (cfg.max_packet_bytes < 16)
        throw ConfigError("max_packet_bytes too small");
    if (cfg.outbound_queue_limit == 0)
        throw ConfigError("outbound_queue_limit must be positive");
}

} // namespace mqttsec::config
