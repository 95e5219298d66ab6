// Acceptance gate: one line per criterion, nonzero exit when any fail.
// Thresholds and run counts are fixed constants here, not tunable knobs.

#include "mqttsec/broker.hpp"
#include "mqttsec/client.hpp"
#include "mqttsec/codec.hpp"
#include "mqttsec/security.hpp"
#include "mqttsec/stats.hpp"
#include "mqttsec/topics.hpp"
#include "mqttsec/transport.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

using namespace mqttsec;
using client::BlockingClient;
using client::ClientOptions;
using security::ClientSecurityProfile;
using security::EnforcementFlag;
using security::LegacyPolicy;
using security::SecurityLevel;

namespace {

constexpr int kBenchRuns = 500;          // both benchmark campaigns
constexpr double kForwardMaxRatio = 1.10; // enforced median vs relaxed median
constexpr std::size_t kPropertyOverheadBytes = 7;
constexpr int kCodecRoundTrips = 10000;
constexpr int kFuzzInputs = 10000;
constexpr int kRouterTables = 1000;
constexpr int kPopulationMessages = 10000;

int g_failures = 0;

void report(int number, const char* label, bool ok, const std::string& detail)
{
    std::printf("%s  %d. %s%s%s\n", ok ? "PASS" : "FAIL", number, label,
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++g_failures;
}

const char* cert_path()
{
    static std::string cert = [] {
        transport::generate_self_signed_cert("/tmp/mqttsec_acceptance.crt",
                                             "/tmp/mqttsec_acceptance.key", "localhost", 1);
        return std::string("/tmp/mqttsec_acceptance.crt");
    }();
    return cert.c_str();
}

const char* key_path()
{
    cert_path();
    return "/tmp/mqttsec_acceptance.key";
}

config::BrokerConfig two_listener_config()
{
    config::BrokerConfig cfg;
    transport::ListenerConfig plain;
    plain.name = "plain";
    plain.bind_address = "127.0.0.1";
    plain.port = 0;
    transport::ListenerConfig tls;
    tls.name = "tls";
    tls.kind = transport::ListenerKind::Tls;
    tls.bind_address = "127.0.0.1";
    tls.port = 0;
    tls.cert_path = cert_path();
    tls.key_path = key_path();
    cfg.listeners = {plain, tls};
    return cfg;
}

ClientOptions client_opts(const broker::Broker& b, bool tls, std::string id,
                          std::optional<EnforcementFlag> flag = std::nullopt,
                          codec::Version version = codec::Version::V5)
{
    ClientOptions o;
    o.host = "127.0.0.1";
    o.port = b.port(tls ? "tls" : "plain");
    o.tls = tls;
    o.client_id = std::move(id);
    o.connect_flag = flag;
    o.version = version;
    return o;
}

std::vector<std::uint8_t> bytes_of(const std::string& s)
{
    return {s.begin(), s.end()};
}

std::string string_of(const std::vector<std::uint8_t>& b)
{
    return {b.begin(), b.end()};
}

// ---------------------------------------------------------------------------
// 1. Decision-table oracle

// The delivery rule restated from scratch: a deny happens exactly when an
// enforcing secured party faces a non-secured counterpart.
bool oracle_denies(SecurityLevel pub_level, EnforcementFlag pub_flag, SecurityLevel sub_level,
                   EnforcementFlag sub_flag)
{
    bool publisher_blocks = pub_level == SecurityLevel::Secured &&
                            pub_flag == EnforcementFlag::Enforce &&
                            sub_level != SecurityLevel::Secured;
    bool subscriber_blocks = sub_level == SecurityLevel::Secured &&
                             sub_flag == EnforcementFlag::Enforce &&
                             pub_level != SecurityLevel::Secured;
    return publisher_blocks || subscriber_blocks;
}

bool criterion_decision_table()
{
    const SecurityLevel levels[] = {SecurityLevel::NonSecured, SecurityLevel::Secured};
    const EnforcementFlag flags[] = {EnforcementFlag::Relax, EnforcementFlag::Enforce};

    int rows = 0, deny_rows = 0, mismatches = 0;
    std::set<std::tuple<int, int, int, int>> named_deny_cases;

    auto t0 = std::chrono::steady_clock::now();
    for (auto pl : levels)
        for (auto pf : flags)
            for (auto sl : levels)
                for (auto sf : flags)
                {
                    ++rows;
                    auto pub = security::make_profile(pl, pf, security::FlagSource::ExplicitConnect);
                    auto sub = security::make_profile(sl, sf, security::FlagSource::ExplicitConnect);
                    auto got = security::decide_delivery(pub, sub);
                    bool deny = oracle_denies(pl, pf, sl, sf);
                    if (got.deliver == deny)
                        ++mismatches;
                    if (!got.deliver)
                    {
                        ++deny_rows;
                        // A non-secured publisher's flag is inert, so both its
                        // flag variants name the same case.
                        auto named_pf = pl == SecurityLevel::Secured ? pf : EnforcementFlag::Relax;
                        named_deny_cases.insert({static_cast<int>(pl), static_cast<int>(named_pf),
                                                 static_cast<int>(sl), static_cast<int>(sf)});
                    }
                }

    // The published table must agree with the live engine row by row.
    for (const auto& row : security::decision_truth_table())
    {
        auto pub = security::make_profile(row.pub_level, row.pub_flag,
                                          security::FlagSource::ExplicitConnect);
        auto sub = security::make_profile(row.sub_level, row.sub_flag,
                                          security::FlagSource::ExplicitConnect);
        if (security::decide_delivery(pub, sub) != row.decision)
            ++mismatches;
    }
    auto elapsed = std::chrono::steady_clock::now() - t0;

    bool ok = rows == 16 && mismatches == 0 && deny_rows == 4 && named_deny_cases.size() == 3 &&
              elapsed < std::chrono::seconds(1);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "16 combinations, engine matches oracle, %d deny rows forming %zu distinct "
                  "cases (a non-secured publisher's flag is inert)",
                  deny_rows, named_deny_cases.size());
    report(1, "decision-table oracle", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 2. Scenario suite over real sockets

bool criterion_scenarios()
{
    const std::string audit_file = "/tmp/mqttsec_acceptance_audit.jsonl";
    std::remove(audit_file.c_str());

    auto t0 = std::chrono::steady_clock::now();
    int delivered_ok = 0, withheld_ok = 0;
    {
        auto cfg = two_listener_config();
        cfg.audit_path = audit_file;
        broker::Broker b(cfg);
        b.start();

        // secured -> secured: delivered
        {
            BlockingClient sub, pub;
            sub.connect(client_opts(b, true, "s1-sub", EnforcementFlag::Enforce));
            sub.subscribe("case/1", 0);
            pub.connect(client_opts(b, true, "s1-pub", EnforcementFlag::Enforce));
            pub.publish("case/1", bytes_of("one"), 1);
            if (auto m = sub.receive(3000); m && string_of(m->payload) == "one")
                ++delivered_ok;
            sub.disconnect();
            pub.disconnect();
        }
        // secured enforcing -> non-secured: withheld
        {
            BlockingClient sub, pub;
            sub.connect(client_opts(b, false, "s2-sub", EnforcementFlag::Relax));
            sub.subscribe("case/2", 0);
            pub.connect(client_opts(b, true, "s2-pub", EnforcementFlag::Enforce));
            pub.publish("case/2", bytes_of("two"), 1);
            if (!sub.receive(400))
                ++withheld_ok;
            sub.disconnect();
            pub.disconnect();
        }
        // non-secured -> secured enforcing: withheld
        {
            BlockingClient sub, pub;
            sub.connect(client_opts(b, true, "s3-sub", EnforcementFlag::Enforce));
            sub.subscribe("case/3", 0);
            pub.connect(client_opts(b, false, "s3-pub", EnforcementFlag::Relax));
            pub.publish("case/3", bytes_of("three"), 1);
            if (!sub.receive(400))
                ++withheld_ok;
            sub.disconnect();
            pub.disconnect();
        }
        // relaxed secured -> non-secured: delivered
        {
            BlockingClient sub, pub;
            sub.connect(client_opts(b, false, "s4-sub", EnforcementFlag::Relax));
            sub.subscribe("case/4", 0);
            pub.connect(client_opts(b, true, "s4-pub", EnforcementFlag::Relax));
            pub.publish("case/4", bytes_of("four"), 1);
            if (auto m = sub.receive(3000); m && string_of(m->payload) == "four")
                ++delivered_ok;
            sub.disconnect();
            pub.disconnect();
        }
        b.stop();
    }

    // The two withheld cases must each have left a deny record.
    int deny_pub_enforces = 0, deny_sub_enforces = 0;
    std::ifstream in(audit_file);
    std::string line;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || j["decision"] != "deny")
            continue;
        if (j["topic"] == "case/2" && j["reason"] == "publisher-enforces")
            ++deny_pub_enforces;
        if (j["topic"] == "case/3" && j["reason"] == "subscriber-enforces")
            ++deny_sub_enforces;
    }
    std::remove(audit_file.c_str());
    auto elapsed = std::chrono::steady_clock::now() - t0;

    bool ok = delivered_ok == 2 && withheld_ok == 2 && deny_pub_enforces == 1 &&
              deny_sub_enforces == 1 && elapsed < std::chrono::seconds(30);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%d/2 delivered, %d/2 withheld, audit records %d+%d", delivered_ok,
                  withheld_ok, deny_pub_enforces, deny_sub_enforces);
    report(2, "socket scenario suite", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 3. Property overhead in bytes

bool criterion_overhead()
{
    auto flag_prop = codec::make_user_property("s", "1");

    codec::Publish pub;
    pub.topic = "home/kitchen/temperature";
    pub.payload = bytes_of("21.5");
    auto pub_plainsize = codec::encode_packet(pub).size();
    pub.properties = {flag_prop};
    auto pub_flagsize = codec::encode_packet(pub).size();

    codec::Connect con;
    con.client_id = "sensor-1";
    auto con_plainsize = codec::encode_packet(con).size();
    con.properties = {flag_prop};
    auto con_flagsize = codec::encode_packet(con).size();

    codec::Subscribe sub;
    sub.packet_id = 1;
    sub.entries = {{"home/#", 1}};
    auto sub_plainsize = codec::encode_packet(sub).size();
    sub.properties = {flag_prop};
    auto sub_flagsize = codec::encode_packet(sub).size();

    bool ok = pub_flagsize - pub_plainsize == kPropertyOverheadBytes &&
              con_flagsize - con_plainsize == kPropertyOverheadBytes &&
              sub_flagsize - sub_plainsize == kPropertyOverheadBytes;
    char detail[160];
    std::snprintf(detail, sizeof detail, "PUBLISH +%zu, CONNECT +%zu, SUBSCRIBE +%zu bytes",
                  pub_flagsize - pub_plainsize, con_flagsize - con_plainsize,
                  sub_flagsize - sub_plainsize);
    report(3, "security property costs exactly 7 bytes", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 4. Forwarding overhead (broker-side, enforcement on vs off)

std::vector<double> forward_campaign(broker::Broker& b, EnforcementFlag flag, int runs,
                                     int warmup)
{
    BlockingClient sub, pub;
    sub.connect(client_opts(b, true, "fwd-sub", flag));
    sub.subscribe("fwd/x", 0);
    pub.connect(client_opts(b, true, "fwd-pub", flag));

    std::vector<std::uint8_t> payload(64, 0x42);
    for (int i = 0; i < warmup; ++i)
    {
        pub.publish("fwd/x", payload, 1);
        sub.receive(3000);
    }
    (void)b.take_forward_samples();

    for (int i = 0; i < runs; ++i)
    {
        pub.publish("fwd/x", payload, 1);
        sub.receive(3000);
    }
    std::vector<double> ms;
    for (const auto& s : b.take_forward_samples())
        ms.push_back(std::chrono::duration<double, std::milli>(s.latency).count());
    pub.disconnect();
    sub.disconnect();
    return ms;
}

bool criterion_forwarding()
{
    auto cfg = two_listener_config();
    cfg.measure_forwarding = true;
    broker::Broker b(cfg);
    b.start();

    // Same TLS transport both ways; the flags are the only variable.
    auto t0 = std::chrono::steady_clock::now();
    auto relaxed = forward_campaign(b, EnforcementFlag::Relax, kBenchRuns, 100);
    auto enforced = forward_campaign(b, EnforcementFlag::Enforce, kBenchRuns, 100);
    auto elapsed = std::chrono::steady_clock::now() - t0;
    b.stop();

    if (relaxed.size() != static_cast<std::size_t>(kBenchRuns) ||
        enforced.size() != static_cast<std::size_t>(kBenchRuns))
    {
        report(4, "forwarding overhead", false, "sample campaign incomplete");
        return false;
    }
    auto r = stats::summary_stats(relaxed);
    auto e = stats::summary_stats(enforced);
    double ratio = e.median / r.median;
    bool ok = ratio <= kForwardMaxRatio && elapsed < std::chrono::minutes(2);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "n=%d medians %.4f ms relaxed vs %.4f ms enforced, ratio %.3f (cap %.2f)",
                  kBenchRuns, r.median, e.median, ratio, kForwardMaxRatio);
    report(4, "forwarding overhead within bound", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 5. Connection establishment benchmark

std::vector<double> connect_campaign(broker::Broker& b, bool tls, int runs,
                                     std::size_t& failures)
{
    std::vector<double> ms;
    for (int i = 0; i < runs; ++i)
    {
        try
        {
            BlockingClient c;
            auto ack = c.connect(client_opts(b, tls, "bench-" + std::to_string(i)));
            if (ack.reason_code != 0)
            {
                ++failures;
                continue;
            }
            ms.push_back(std::chrono::duration<double, std::milli>(c.last_connect_duration())
                             .count());
            c.disconnect();
        }
        catch (const std::exception&)
        {
            ++failures;
        }
    }
    return ms;
}

bool criterion_connect_bench()
{
    auto cfg = two_listener_config();
    broker::Broker b(cfg);
    b.start();

    std::size_t plain_failures = 0, tls_failures = 0;
    auto t0 = std::chrono::steady_clock::now();
    auto plain = connect_campaign(b, false, kBenchRuns, plain_failures);
    auto tls = connect_campaign(b, true, kBenchRuns, tls_failures);
    auto elapsed = std::chrono::steady_clock::now() - t0;
    b.stop();

    if (plain.empty() || tls.empty())
    {
        report(5, "connection benchmark", false, "no successful runs");
        return false;
    }
    auto p = stats::summary_stats(plain);
    auto t = stats::summary_stats(tls);

    std::printf("     connect-plain: n=%zu avg %.3f stddev %.3f min %.3f max %.3f ms"
                " (%zu failed)\n",
                p.count, p.avg, p.stddev, p.min, p.max, plain_failures);
    std::printf("     connect-tls:   n=%zu avg %.3f stddev %.3f min %.3f max %.3f ms"
                " (%zu failed)\n",
                t.count, t.avg, t.stddev, t.min, t.max, tls_failures);

    bool ok = t.avg > p.avg && elapsed < std::chrono::minutes(3);
    char detail[120];
    std::snprintf(detail, sizeof detail, "TLS average %.2fx the plain average", t.avg / p.avg);
    report(5, "TLS connections cost more than plain", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 6. Codec properties

codec::Properties random_user_props(std::mt19937& rng)
{
    std::uniform_int_distribution<int> count(0, 3);
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<int> ch('a', 'z');
    codec::Properties props;
    int n = count(rng);
    for (int i = 0; i < n; ++i)
    {
        std::string k, v;
        for (int j = len(rng); j > 0; --j)
            k.push_back(static_cast<char>(ch(rng)));
        for (int j = len(rng); j > 0; --j)
            v.push_back(static_cast<char>(ch(rng)));
        props.push_back(codec::make_user_property(k, v));
    }
    return props;
}

std::string random_topic(std::mt19937& rng)
{
    std::uniform_int_distribution<int> levels(1, 4);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_int_distribution<int> ch('a', 'z');
    std::string t;
    int n = levels(rng);
    for (int i = 0; i < n; ++i)
    {
        if (i)
            t.push_back('/');
        for (int j = len(rng); j > 0; --j)
            t.push_back(static_cast<char>(ch(rng)));
    }
    return t;
}

codec::Packet random_packet(std::mt19937& rng, codec::Version version)
{
    std::uniform_int_distribution<int> kind(0, 10);
    std::uniform_int_distribution<int> pid(1, 65535);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> qos(0, 1);
    std::uniform_int_distribution<int> size(0, 48);
    const bool v5 = version == codec::Version::V5;

    switch (kind(rng))
    {
    case 0: {
        codec::Connect c;
        c.protocol_version = version;
        c.client_id = random_topic(rng);
        c.clean_start = qos(rng) != 0;
        c.keep_alive_s = static_cast<std::uint16_t>(pid(rng));
        if (v5)
            c.properties = random_user_props(rng);
        if (qos(rng))
            c.username = "user";
        return c;
    }
    case 1: {
        codec::Connack c;
        c.session_present = qos(rng) != 0;
        if (v5)
            c.properties = random_user_props(rng);
        return c;
    }
    case 2: {
        codec::Publish p;
        p.topic = random_topic(rng);
        for (int i = size(rng); i > 0; --i)
            p.payload.push_back(static_cast<std::uint8_t>(byte(rng)));
        p.qos = static_cast<std::uint8_t>(qos(rng));
        if (p.qos)
            p.packet_id = static_cast<std::uint16_t>(pid(rng));
        p.retain = qos(rng) != 0;
        p.dup = p.qos == 1 && qos(rng) != 0;
        if (v5)
            p.properties = random_user_props(rng);
        return p;
    }
    case 3: {
        codec::Puback a;
        a.packet_id = static_cast<std::uint16_t>(pid(rng));
        // A v4 PUBACK has no reason byte on the wire, so only v5 can carry one.
        if (v5 && qos(rng))
            a.reason_code = 0x10;
        return a;
    }
    case 4: {
        codec::Subscribe s;
        s.packet_id = static_cast<std::uint16_t>(pid(rng));
        int n = 1 + qos(rng);
        for (int i = 0; i < n; ++i)
            s.entries.push_back({random_topic(rng), static_cast<std::uint8_t>(qos(rng))});
        if (v5)
            s.properties = random_user_props(rng);
        return s;
    }
    case 5: {
        codec::Suback s;
        s.packet_id = static_cast<std::uint16_t>(pid(rng));
        int n = 1 + qos(rng);
        for (int i = 0; i < n; ++i)
            s.reason_codes.push_back(qos(rng) ? 0x01 : 0x00);
        return s;
    }
    case 6: {
        codec::Unsubscribe u;
        u.packet_id = static_cast<std::uint16_t>(pid(rng));
        u.filters.push_back(random_topic(rng));
        return u;
    }
    case 7: {
        codec::Unsuback u;
        u.packet_id = static_cast<std::uint16_t>(pid(rng));
        if (v5)
            u.reason_codes.push_back(0x00);
        return u;
    }
    case 8:
        return codec::Pingreq{};
    case 9:
        return codec::Pingresp{};
    default: {
        codec::Disconnect d;
        d.reason_code = 0x00;
        if (v5)
            d.properties = random_user_props(rng);
        return d;
    }
    }
}

bool criterion_codec()
{
    std::mt19937 rng(20260822);
    std::uniform_int_distribution<int> pick_version(0, 1);
    auto t0 = std::chrono::steady_clock::now();

    int round_trip_failures = 0;
    for (int i = 0; i < kCodecRoundTrips; ++i)
    {
        auto version = pick_version(rng) ? codec::Version::V5 : codec::Version::V4;
        auto pkt = random_packet(rng, version);
        auto bytes = codec::encode_packet(pkt, version);
        auto dec = codec::decode_packet(bytes, version);
        if (dec.status != codec::DecodeStatus::Ok || dec.consumed != bytes.size() ||
            !(dec.packet == pkt))
            ++round_trip_failures;
    }

    // Framing: packets survive arbitrary concatenation.
    int framing_failures = 0;
    std::uniform_int_distribution<int> per_batch(2, 8);
    for (int batch = 0; batch < 500; ++batch)
    {
        auto version = pick_version(rng) ? codec::Version::V5 : codec::Version::V4;
        std::vector<codec::Packet> sent;
        std::vector<std::uint8_t> wire;
        int n = per_batch(rng);
        for (int i = 0; i < n; ++i)
        {
            sent.push_back(random_packet(rng, version));
            auto bytes = codec::encode_packet(sent.back(), version);
            wire.insert(wire.end(), bytes.begin(), bytes.end());
        }
        std::size_t off = 0;
        bool batch_ok = true;
        for (int i = 0; batch_ok && i < n; ++i)
        {
            auto dec = codec::decode_packet(
                std::span(wire.data() + off, wire.size() - off), version);
            if (dec.status != codec::DecodeStatus::Ok || !(dec.packet == sent[i]))
                batch_ok = false;
            else
                off += dec.consumed;
        }
        if (!batch_ok || off != wire.size())
            ++framing_failures;
    }

    // Fuzz: random bytes never crash the decoder and never over-consume.
    int fuzz_failures = 0;
    std::uniform_int_distribution<int> fuzz_len(0, 64);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < kFuzzInputs; ++i)
    {
        std::vector<std::uint8_t> junk;
        for (int j = fuzz_len(rng); j > 0; --j)
            junk.push_back(static_cast<std::uint8_t>(byte(rng)));
        for (auto version : {codec::Version::V4, codec::Version::V5})
        {
            auto dec = codec::decode_packet(junk, version);
            if (dec.status == codec::DecodeStatus::Ok && dec.consumed > junk.size())
                ++fuzz_failures;
        }
    }
    auto elapsed = std::chrono::steady_clock::now() - t0;

    bool ok = round_trip_failures == 0 && framing_failures == 0 && fuzz_failures == 0 &&
              elapsed < std::chrono::seconds(30);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%d round trips, 500 concatenations, %d fuzz inputs, %d failures",
                  kCodecRoundTrips, kFuzzInputs,
                  round_trip_failures + framing_failures + fuzz_failures);
    report(6, "codec round-trip, framing and fuzz", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 7. Topic matching oracle

// Recursive wildcard matching written independently of the trie.
bool naive_match_levels(const std::vector<std::string>& f, std::size_t fi,
                        const std::vector<std::string>& t, std::size_t ti)
{
    if (fi == f.size())
        return ti == t.size();
    if (f[fi] == "#")
        return true; // validity guarantees it is the last level
    if (ti == t.size())
        return false;
    if (f[fi] != "+" && f[fi] != t[ti])
        return false;
    return naive_match_levels(f, fi + 1, t, ti + 1);
}

std::vector<std::string> split_levels(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s)
    {
        if (c == '/')
        {
            out.push_back(cur);
            cur.clear();
        }
        else
            cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

bool naive_match(const std::string& filter, const std::string& topic)
{
    if ((filter[0] == '+' || filter[0] == '#') && topic[0] == '$')
        return false;
    return naive_match_levels(split_levels(filter), 0, split_levels(topic), 0);
}

bool criterion_topics()
{
    auto t0 = std::chrono::steady_clock::now();

    // Exhaustive enumeration over a small alphabet, up to 4 levels.
    std::vector<std::string> topics, filters;
    const std::vector<std::string> topic_parts = {"a", "b", "", "$s"};
    const std::vector<std::string> filter_parts = {"a", "b", "", "+", "#"};
    std::function<void(int, std::string, const std::vector<std::string>&,
                       std::vector<std::string>&, bool (*)(std::string_view))>
        build = [&](int depth, std::string prefix, const std::vector<std::string>& parts,
                    std::vector<std::string>& out, bool (*valid)(std::string_view)) {
            if (!prefix.empty() || depth > 0)
                if (valid(prefix))
                    out.push_back(prefix);
            if (depth == 4)
                return;
            for (const auto& p : parts)
                build(depth + 1, depth == 0 ? p : prefix + "/" + p, parts, out, valid);
        };
    build(0, "", topic_parts, topics, topics::valid_topic_name);
    build(0, "", filter_parts, filters, topics::valid_topic_filter);

    long pairs = 0;
    int mismatches = 0;
    for (const auto& f : filters)
        for (const auto& t : topics)
        {
            ++pairs;
            if (topics::matches(f, t) != naive_match(f, t))
                ++mismatches;
        }

    // Randomized tables: the trie agrees with a linear scan.
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> n_clients(1, 15);
    std::uniform_int_distribution<int> n_subs(1, 4);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> flag3(0, 2);
    std::uniform_int_distribution<std::size_t> pick_filter(0, filters.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_topic(0, topics.size() - 1);
    int table_mismatches = 0;

    for (int round = 0; round < kRouterTables; ++round)
    {
        topics::SubscriptionTable table;
        std::vector<topics::Subscription> stored;
        int clients = n_clients(rng);
        for (int c = 0; c < clients; ++c)
        {
            int subs = n_subs(rng);
            for (int s = 0; s < subs; ++s)
            {
                topics::Subscription sub;
                sub.client_id = "c" + std::to_string(c);
                sub.filter = filters[pick_filter(rng)];
                sub.granted_qos = static_cast<std::uint8_t>(coin(rng));
                int f = flag3(rng);
                if (f == 1)
                    sub.override_flag = EnforcementFlag::Relax;
                else if (f == 2)
                    sub.override_flag = EnforcementFlag::Enforce;
                // Mirror the replace-on-duplicate contract.
                std::erase_if(stored, [&](const topics::Subscription& old) {
                    return old.client_id == sub.client_id && old.filter == sub.filter;
                });
                stored.push_back(sub);
                table.subscribe(sub);
            }
        }

        const auto& topic = topics[pick_topic(rng)];

        // Linear-scan expectation with per-client merge.
        std::map<std::string, topics::Subscription> expect;
        for (const auto& sub : stored)
        {
            if (!naive_match(sub.filter, topic))
                continue;
            auto [it, fresh] = expect.try_emplace(sub.client_id, sub);
            if (fresh)
                continue;
            it->second.granted_qos = std::max(it->second.granted_qos, sub.granted_qos);
            // Strictest flag wins: Enforce > absent > Relax.
            auto& have = it->second.override_flag;
            if (sub.override_flag == EnforcementFlag::Enforce ||
                have == EnforcementFlag::Enforce)
                have = EnforcementFlag::Enforce;
            else if (!sub.override_flag || !have)
                have = std::nullopt;
            else
                have = EnforcementFlag::Relax;
        }

        auto got = table.match_subscribers(topic);
        bool same = got.size() == expect.size();
        for (const auto& g : got)
        {
            auto it = expect.find(g.client_id);
            if (it == expect.end() || it->second.granted_qos != g.granted_qos ||
                it->second.override_flag != g.override_flag)
                same = false;
        }
        if (!same)
            ++table_mismatches;
    }
    auto elapsed = std::chrono::steady_clock::now() - t0;

    bool ok = mismatches == 0 && table_mismatches == 0 && elapsed < std::chrono::seconds(30);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%ld filter/topic pairs, %d randomized tables, %d mismatches", pairs,
                  kRouterTables, mismatches + table_mismatches);
    report(7, "topic matcher vs naive oracle", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 8. Legacy (v3.1.1) compatibility

struct LegacyProbe {
    bool tls;
    std::optional<EnforcementFlag> flag; // v5 counterparty's connect flag
};

bool criterion_legacy()
{
    int checks = 0, correct = 0;

    for (auto policy : {LegacyPolicy::InferFromTransport, LegacyPolicy::AlwaysRelaxed})
    {
        auto cfg = two_listener_config();
        cfg.legacy_policy = policy;
        broker::Broker b(cfg);
        b.start();

        const std::vector<LegacyProbe> counterparts = {
            {false, EnforcementFlag::Relax},
            {true, EnforcementFlag::Relax},
            {true, EnforcementFlag::Enforce},
        };

        for (bool legacy_tls : {false, true})
        {
            auto legacy_profile = security::derive_profile(
                legacy_tls ? SecurityLevel::Secured : SecurityLevel::NonSecured, std::nullopt,
                policy);

            // The v4 client subscribing, a v5 publisher on each profile.
            {
                BlockingClient sub;
                sub.connect(client_opts(b, legacy_tls, "legacy-sub", std::nullopt,
                                        codec::Version::V4));
                sub.subscribe("leg/in", 0);
                for (std::size_t i = 0; i < counterparts.size(); ++i)
                {
                    const auto& cp = counterparts[i];
                    auto cp_profile = security::derive_profile(
                        cp.tls ? SecurityLevel::Secured : SecurityLevel::NonSecured, cp.flag,
                        policy);
                    bool expect =
                        security::decide_delivery(cp_profile, legacy_profile).deliver;

                    BlockingClient pub;
                    pub.connect(client_opts(b, cp.tls, "cp-pub", cp.flag));
                    pub.publish("leg/in", bytes_of("m" + std::to_string(i)), 1);
                    pub.disconnect();

                    auto got = sub.receive(expect ? 3000 : 400);
                    ++checks;
                    if (expect == got.has_value())
                        ++correct;
                }
                sub.disconnect();
            }
            // The v4 client publishing, a v5 subscriber on each profile.
            for (std::size_t i = 0; i < counterparts.size(); ++i)
            {
                const auto& cp = counterparts[i];
                auto cp_profile = security::derive_profile(
                    cp.tls ? SecurityLevel::Secured : SecurityLevel::NonSecured, cp.flag,
                    policy);
                bool expect = security::decide_delivery(legacy_profile, cp_profile).deliver;

                BlockingClient sub;
                sub.connect(client_opts(b, cp.tls, "cp-sub", cp.flag));
                sub.subscribe("leg/out", 0);

                BlockingClient pub;
                pub.connect(client_opts(b, legacy_tls, "legacy-pub", std::nullopt,
                                        codec::Version::V4));
                pub.publish("leg/out", bytes_of("m"), 1);
                pub.disconnect();

                auto got = sub.receive(expect ? 3000 : 400);
                ++checks;
                if (expect == got.has_value())
                    ++correct;
                sub.disconnect();
            }
        }
        b.stop();
    }

    bool ok = checks == 24 && correct == checks;
    char detail[120];
    std::snprintf(detail, sizeof detail,
                  "%d/%d flows match the derived-profile prediction (both policies)", correct,
                  checks);
    report(8, "legacy v3.1.1 compatibility", ok, detail);
    return ok;
}

// ---------------------------------------------------------------------------
// 9. No-leak byte tap

bool criterion_no_leak()
{
    auto cfg = two_listener_config();
    // Subscribers are drained in batches, so give the queues ample headroom;
    // an overflow drop here would silently shrink the evidence base.
    cfg.outbound_queue_limit = 20000;
    broker::Broker b(cfg);

    // Enforce-tagged payloads carry "E:"; nothing else in any frame does.
    std::atomic<long> leaks{0};
    std::atomic<long> enforced_to_secured{0};
    b.set_write_tap([&](const std::string&, SecurityLevel level,
                        std::span<const std::uint8_t> frame) {
        static constexpr std::uint8_t needle[] = {'E', ':'};
        bool tagged = std::search(frame.begin(), frame.end(), std::begin(needle),
                                  std::end(needle)) != frame.end();
        if (!tagged)
            return;
        if (level == SecurityLevel::NonSecured)
            leaks.fetch_add(1);
        else
            enforced_to_secured.fetch_add(1);
    });
    b.start();

    struct Member {
        bool tls;
        std::optional<EnforcementFlag> flag;
        codec::Version version;
    };
    const std::vector<Member> members = {
        {false, std::nullopt, codec::Version::V5},
        {false, EnforcementFlag::Relax, codec::Version::V5},
        {false, EnforcementFlag::Enforce, codec::Version::V5}, // inert
        {true, std::nullopt, codec::Version::V5},              // inferred Enforce
        {true, EnforcementFlag::Relax, codec::Version::V5},
        {true, EnforcementFlag::Enforce, codec::Version::V5},
        {false, std::nullopt, codec::Version::V4},
        {true, std::nullopt, codec::Version::V4},
    };

    std::vector<std::unique_ptr<BlockingClient>> clients;
    std::vector<ClientSecurityProfile> profiles;
    for (std::size_t i = 0; i < members.size(); ++i)
    {
        const auto& m = members[i];
        auto c = std::make_unique<BlockingClient>();
        c->connect(client_opts(b, m.tls, "pop-" + std::to_string(i), m.flag, m.version));
        c->subscribe("pop/data", 0);
        clients.push_back(std::move(c));
        profiles.push_back(security::derive_profile(
            m.tls ? SecurityLevel::Secured : SecurityLevel::NonSecured, m.flag,
            cfg.legacy_policy));
    }

    std::mt19937 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    std::uniform_int_distribution<int> d100(0, 99);
    long sent_enforced = 0;

    for (int i = 0; i < kPopulationMessages; ++i)
    {
        auto who = pick(rng);
        const auto& m = members[who];

        // v5 publishers sometimes override per message.
        std::optional<EnforcementFlag> msg_flag;
        if (m.version == codec::Version::V5)
        {
            int roll = d100(rng);
            if (roll < 20)
                msg_flag = EnforcementFlag::Enforce;
            else if (roll < 40)
                msg_flag = EnforcementFlag::Relax;
        }
        auto effective = msg_flag
                             ? security::make_profile(profiles[who].transport_level, *msg_flag,
                                                      security::FlagSource::ExplicitMessage)
                             : profiles[who];
        bool enforced = effective.required_level == SecurityLevel::Secured;
        sent_enforced += enforced ? 1 : 0;

        char payload[16];
        std::snprintf(payload, sizeof payload, "%c:%06d", enforced ? 'E' : 'R', i);
        clients[who]->publish("pop/data", bytes_of(payload), 1, msg_flag);

        if (i % 500 == 499)
            for (auto& c : clients)
                while (c->receive(1))
                    ;
    }
    for (auto& c : clients)
        while (c->receive(50))
            ;

    auto stats_snapshot = b.stats();
    for (auto& c : clients)
        c->disconnect();
    b.stop();

    bool vacuous = sent_enforced == 0 || enforced_to_secured.load() == 0 ||
                   stats_snapshot.deliveries_denied == 0;
    bool ok = leaks.load() == 0 && !vacuous;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "%d messages (%ld enforce-tagged), %ld tagged frames to secured streams, "
                  "%llu denials, %ld leaks to non-secured streams",
                  kPopulationMessages, sent_enforced, enforced_to_secured.load(),
                  (unsigned long long)stats_snapshot.deliveries_denied, leaks.load());
    report(9, "no enforce-tagged bytes on non-secured streams", ok, detail);
    return ok;
}

} // namespace

int main()
{
    std::printf("acceptance: broker security-level enforcement\n");

    struct Criterion {
        bool (*run)();
        const char* label;
        int number;
    };
    const Criterion list[] = {
        {criterion_decision_table, "decision table", 1},
        {criterion_scenarios, "scenarios", 2},
        {criterion_overhead, "overhead", 3},
        {criterion_forwarding, "forwarding", 4},
        {criterion_connect_bench, "connect bench", 5},
        {criterion_codec, "codec", 6},
        {criterion_topics, "topics", 7},
        {criterion_legacy, "legacy", 8},
        {criterion_no_leak, "no-leak", 9},
    };

    for (const auto& c : list)
    {
        try
        {
            c.run();
        }
        catch (const std::exception& e)
        {
            report(c.number, c.label, false, std::string("exception: ") + e.what());
        }
    }

    std::printf("acceptance: %d of 9 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
