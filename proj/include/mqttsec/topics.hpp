#pragma once

#include "mqttsec/security.hpp"

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace mqttsec::topics {

// Topic names carry no wildcards; filters may use '+' (one level) and '#'
// (final level, matches the rest including zero levels). [MQTT-4.7]
bool valid_topic_name(std::string_view s);
bool valid_topic_filter(std::string_view s);

// Level-by-level wildcard match. Filters starting with a wildcard never match
// topics whose first level starts with '$'. [MQTT-4.7.2-1]
bool matches(std::string_view filter, std::string_view topic);

struct Subscription {
    std::string client_id;
    std::string filter;
    std::uint8_t granted_qos = 0;
    std::optional<security::EnforcementFlag> override_flag;

    bool operator==(const Subscription&) const = default;
};

// Filter trie keyed by topic levels. Readers share, writers exclude; every
// operation sees an atomically consistent table.
class SubscriptionTable {
public:
    // Replaces any existing (client_id, filter) entry.
    void subscribe(Subscription sub);

    // False when no such (client_id, filter) entry existed.
    bool unsubscribe(const std::string& client_id, const std::string& filter);

    void remove_client(const std::string& client_id);

    // Every stored subscription whose filter matches, deduplicated per
    // client: highest granted_qos wins, flags merge strictest-first
    // (Enforce > absent > Relax). Sorted by client_id.
    std::vector<Subscription> match_subscribers(const std::string& topic) const;

    std::size_t size() const;

private:
    struct Entry {
        std::string client_id;
        std::uint8_t granted_qos;
        std::optional<security::EnforcementFlag> override_flag;
    };

    struct Node {
        std::map<std::string, Node, std::less<>> children;
        std::vector<Entry> entries;

        bool empty() const { return children.empty() && entries.empty(); }
    };

    mutable std::shared_mutex mu_;
    Node root_;
    std::size_t count_ = 0;
};

} // namespace mqttsec::topics
