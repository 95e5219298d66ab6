#pragma once

#include "mqttsec/security.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <string>

namespace mqttsec::audit {

struct AuditEvent {
    std::chrono::system_clock::time_point timestamp;
    std::string publisher_id;
    std::string subscriber_id;
    std::string topic;
    security::DeliveryDecision decision;
    security::SecurityLevel publisher_level;
    security::EnforcementFlag publisher_flag;
    security::SecurityLevel subscriber_level;
    security::EnforcementFlag subscriber_flag;
};

// Line-delimited JSON, one object per event. Write failures never propagate:
// enforcement must not depend on audit success, so they only bump a counter.
class AuditLog {
public:
    AuditLog() = default;

    // Throws ConfigError-style runtime_error when the file cannot be opened;
    // a broken audit path is a startup problem, not a runtime one.
    void open(const std::string& path, bool log_delivered);

    bool enabled() const { return enabled_; }
    bool log_delivered() const { return log_delivered_; }

    void write(const AuditEvent& ev);

    std::uint64_t error_count() const { return errors_.load(); }

private:
    bool enabled_ = false;
    bool log_delivered_ = false;
    std::mutex mu_;
    std::ofstream out_;
    std::atomic<std::uint64_t> errors_{0};
};

std::string to_json_line(const AuditEvent& ev);

} // namespace mqttsec::audit
