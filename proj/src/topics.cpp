#include "mqttsec/topics.hpp"

#include "mqttsec/codec.hpp"

#include <algorithm>
#include <mutex>

namespace mqttsec::topics {

namespace {

std::vector<std::string_view> split_levels(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i)
    {
        if (i == s.size() || s[i] == '/')
        {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool wildcard_rooted(std::string_view filter)
{
    return !filter.empty() && (filter[0] == '+' || filter[0] == '#');
}

bool dollar_topic(std::string_view topic)
{
    return !topic.empty() && topic[0] == '$';
}

} // namespace

bool valid_topic_name(std::string_view s)
{
    if (s.empty() || s.size() > 0xFFFF)
        return false;
    if (s.find('+') != std::string_view::npos || s.find('#') != std::string_view::npos)
        return false;
    return codec::valid_mqtt_string(s);
}

bool valid_topic_filter(std::string_view s)
{
    if (s.empty() || s.size() > 0xFFFF)
        return false;
    if (!codec::valid_mqtt_string(s))
        return false;
    auto levels = split_levels(s);
    for (std::size_t i = 0; i < levels.size(); ++i)
    {
        std::string_view lvl = levels[i];
        if (lvl.find('#') != std::string_view::npos)
        {
            if (lvl != "#" || i + 1 != levels.size())
                return false; // [MQTT-4.7.1-2]
        }
        if (lvl.find('+') != std::string_view::npos && lvl != "+")
            return false; // [MQTT-4.7.1-3]
    }
    return true;
}

bool matches(std::string_view filter, std::string_view topic)
{
    if (dollar_topic(topic) && wildcard_rooted(filter))
        return false;

    auto f = split_levels(filter);
    auto t = split_levels(topic);

    std::size_t i = 0;
    for (; i < f.size(); ++i)
    {
        if (f[i] == "#")
            return true; // validation pins '#' to the final level
        if (i >= t.size())
            return false;
        if (f[i] != "+" && f[i] != t[i])
            return false;
    }
    return i == t.size();
}

void SubscriptionTable::subscribe(Subscription sub)
{
    std::unique_lock lock(mu_);
    Node* node = &root_;
    for (std::string_view lvl : split_levels(sub.filter))
        node = &node->children[std::string(lvl)];

    for (Entry& e : node->entries)
    {
        if (e.client_id == sub.client_id)
        {
            e.granted_qos = sub.granted_qos;
            e.override_flag = sub.override_flag;
            return;
        }
    }
    node->entries.push_back({std::move(sub.client_id), sub.granted_qos, sub.override_flag});
    ++count_;
}

bool SubscriptionTable::unsubscribe(const std::string& client_id, const std::string& filter)
{
    std::unique_lock lock(mu_);
    std::vector<std::pair<Node*, std::string>> path;
    Node* node = &root_;
    for (std::string_view lvl : split_levels(filter))
    {
        auto it = node->children.find(lvl);
        if (it == node->children.end())
            return false;
        path.emplace_back(node, it->first);
        node = &it->second;
    }

    auto it = std::find_if(node->entries.begin(), node->entries.end(),
                           [&](const Entry& e) { return e.client_id == client_id; });
    if (it == node->entries.end())
        return false;
    node->entries.erase(it);
    --count_;

    // Prune now-empty branches bottom-up.
    for (auto p = path.rbegin(); p != path.rend(); ++p)
    {
        Node& child = p->first->children[p->second];
        if (!child.empty())
            break;
        p->first->children.erase(p->second);
    }
    return true;
}

void SubscriptionTable::remove_client(const std::string& client_id)
{
    std::unique_lock lock(mu_);

    auto walk = [&](auto&& self, Node& node) -> void {
        auto removed = std::erase_if(node.entries, [&](const Entry& e) {
            return e.client_id == client_id;
        });
        count_ -= removed;
        for (auto it = node.children.begin(); it != node.children.end();)
        {
            self(self, it->second);
            if (it->second.empty())
                it = node.children.erase(it);
            else
                ++it;
        }
    };
    walk(walk, root_);
}

std::vector<Subscription> SubscriptionTable::match_subscribers(const std::string& topic) const
{
    std::shared_lock lock(mu_);
    auto levels = split_levels(topic);
    const bool dollar = dollar_topic(topic);

    std::map<std::string, Subscription> per_client;
    auto take = [&](const Node& node, const std::string& filter) {
        for (const Entry& e : node.entries)
        {
            auto [it, fresh] = per_client.try_emplace(
                e.client_id,
                Subscription{e.client_id, filter, e.granted_qos, e.override_flag});
            if (fresh)
                continue;
            Subscription& acc = it->second;
            if (e.granted_qos > acc.granted_qos)
            {
                acc.granted_qos = e.granted_qos;
                acc.filter = filter;
            }
            acc.override_flag = security::stricter_flag(acc.override_flag, e.override_flag);
        }
    };

    auto walk = [&](auto&& self, const Node& node, std::size_t i,
                    const std::string& prefix) -> void {
        // A '#' child swallows the remaining levels, including none.
        if (auto hash = node.children.find("#"); hash != node.children.end())
        {
            if (!(dollar && i == 0))
                take(hash->second, prefix.empty() ? "#" : prefix + "/#");
        }
        if (i == levels.size())
        {
            take(node, prefix);
            return;
        }
        std::string_view lvl = levels[i];
        auto next_prefix = [&](std::string_view piece) {
            return i == 0 ? std::string(piece) : prefix + "/" + std::string(piece);
        };
        if (auto it = node.children.find(lvl); it != node.children.end())
            self(self, it->second, i + 1, next_prefix(lvl));
        if (auto plus = node.children.find("+"); plus != node.children.end())
        {
            if (!(dollar && i == 0))
                self(self, plus->second, i + 1, next_prefix("+"));
        }
    };
    walk(walk, root_, 0, "");

    std::vector<Subscription> out;
    out.reserve(per_client.size());
    for (auto& [_, sub] : per_client)
        out.push_back(std::move(sub));
    return out;
}

std::size_t SubscriptionTable::size() const
{
    std::shared_lock lock(mu_);
    return count_;
}

} // namespace mqttsec::topics
