#include "mqttsec/audit.hpp"

#include "json.hpp"

#include <ctime>
#include <stdexcept>

namespace mqttsec::audit {

namespace {

std::string iso8601(std::chrono::system_clock::time_point tp)
{
    auto t = std::chrono::system_clock::to_time_t(tp);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch())
                  .count() %
              1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms));
    return buf;
}

} // namespace

std::string to_json_line(const AuditEvent& ev)
{
    nlohmann::json j;
    j["ts"] = iso8601(ev.timestamp);
    j["publisher"] = ev.publisher_id;
    j["subscriber"] = ev.subscriber_id;
    j["topic"] = ev.topic;
    j["decision"] = ev.decision.deliver ? "deliver" : "deny";
    if (ev.decision.reason)
        j["reason"] = security::reason_name(*ev.decision.reason);
    j["publisher_level"] = security::level_name(ev.publisher_level);
    j["publisher_flag"] = security::flag_name(ev.publisher_flag);
    j["subscriber_level"] = security::level_name(ev.subscriber_level);
    j["subscriber_flag"] = security::flag_name(ev.subscriber_flag);
    return j.dump();
}

void AuditLog::open(const std::string& path, bool log_delivered)
{
    std::lock_guard lock(mu_);
    out_.open(path, std::ios::app);
    if (!out_)
        throw std::runtime_error("cannot open audit log: " + path);
    enabled_ = true;
    log_delivered_ = log_delivered;
}

void AuditLog::write(const AuditEvent& ev)
{
    if (!enabled_)
        return;
    if (ev.decision.deliver && !log_delivered_)
        return;

    std::string line = to_json_line(ev);
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_)
    {
        errors_.fetch_add(1);
        out_.clear(); // keep trying on later events
    }
}

} // namespace mqttsec::audit
