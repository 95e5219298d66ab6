#include "mqttsec/audit.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace mqttsec;

namespace {

audit::AuditEvent sample_event(bool deliver)
{
    audit::AuditEvent ev;
    ev.timestamp = std::chrono::system_clock::time_point{} + std::chrono::milliseconds(1500);
    ev.publisher_id = "pub-1";
    ev.subscriber_id = "sub-1";
    ev.topic = "plant/line1/temp";
    ev.decision = deliver
                      ? security::DeliveryDecision::allowed()
                      : security::DeliveryDecision::denied(security::DenyReason::PublisherEnforces);
    ev.publisher_level = security::SecurityLevel::Secured;
    ev.publisher_flag = security::EnforcementFlag::Enforce;
    ev.subscriber_level = security::SecurityLevel::NonSecured;
    ev.subscriber_flag = security::EnforcementFlag::Relax;
    return ev;
}

std::vector<nlohmann::json> read_lines(const std::string& path)
{
    std::ifstream in(path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            out.push_back(nlohmann::json::parse(line));
    return out;
}

} // namespace

TEST_CASE("denied event serializes with reason and both profiles")
{
    auto j = nlohmann::json::parse(audit::to_json_line(sample_event(false)));
    CHECK(j["ts"] == "1970-01-01T00:00:01.500Z");
    CHECK(j["publisher"] == "pub-1");
    CHECK(j["subscriber"] == "sub-1");
    CHECK(j["topic"] == "plant/line1/temp");
    CHECK(j["decision"] == "deny");
    CHECK(j["reason"] == "publisher-enforces");
    CHECK(j["publisher_level"] == "secured");
    CHECK(j["publisher_flag"] == "enforce");
    CHECK(j["subscriber_level"] == "non-secured");
    CHECK(j["subscriber_flag"] == "relax");
}

TEST_CASE("delivered event has no reason field")
{
    auto j = nlohmann::json::parse(audit::to_json_line(sample_event(true)));
    CHECK(j["decision"] == "deliver");
    CHECK_FALSE(j.contains("reason"));
}

TEST_CASE("subscriber-side denial carries its own reason label")
{
    auto ev = sample_event(false);
    ev.decision = security::DeliveryDecision::denied(security::DenyReason::SubscriberEnforces);
    auto j = nlohmann::json::parse(audit::to_json_line(ev));
    CHECK(j["reason"] == "subscriber-enforces");
}

TEST_CASE("log records denials always, deliveries only when asked")
{
    std::string path = "/tmp/mqttsec_test_audit.jsonl";
    std::remove(path.c_str());
    {
        audit::AuditLog log;
        log.open(path, false);
        log.write(sample_event(false));
        log.write(sample_event(true)); // suppressed
        log.write(sample_event(false));
        CHECK(log.error_count() == 0);
    }
    auto lines = read_lines(path);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0]["decision"] == "deny");
    CHECK(lines[1]["decision"] == "deny");
    std::remove(path.c_str());
}

TEST_CASE("log_delivered keeps both outcomes")
{
    std::string path = "/tmp/mqttsec_test_audit2.jsonl";
    std::remove(path.c_str());
    {
        audit::AuditLog log;
        log.open(path, true);
        log.write(sample_event(true));
        log.write(sample_event(false));
    }
    auto lines = read_lines(path);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0]["decision"] == "deliver");
    CHECK(lines[1]["decision"] == "deny");
    std::remove(path.c_str());
}

TEST_CASE("a default-constructed log swallows events silently")
{
    audit::AuditLog log;
    CHECK_FALSE(log.enabled());
    log.write(sample_event(false)); // no crash, nothing written anywhere
    CHECK(log.error_count() == 0);
}

TEST_CASE("open on an unwritable path throws")
{
    audit::AuditLog log;
    CHECK_THROWS_AS(log.open("/no-such-dir/audit.jsonl", false), std::runtime_error);
}

TEST_CASE("open appends to an existing file")
{
    std::string path = "/tmp/mqttsec_test_audit3.jsonl";
    std::remove(path.c_str());
    {
        audit::AuditLog log;
        log.open(path, false);
        log.write(sample_event(false));
    }
    {
        audit::AuditLog log;
        log.open(path, false);
        log.write(sample_event(false));
    }
    CHECK(read_lines(path).size() == 2);
    std::remove(path.c_str());
}
