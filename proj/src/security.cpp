#include "mqttsec/security.hpp"

namespace mqttsec::security {

ParsedSecurityFlag parse_security_property(const std::vector<codec::UserProperty>& props)
{
    for (const auto& p : props)
    {
        if (p.key != "s")
            continue;
        if (p.value == "1")
            return {EnforcementFlag::Enforce, false};
        if (p.value == "0")
            return {EnforcementFlag::Relax, false};
        return {std::nullopt, true};
    }
    return {std::nullopt, false};
}

ClientSecurityProfile make_profile(SecurityLevel transport, EnforcementFlag flag,
                                   FlagSource source)
{
    ClientSecurityProfile p;
    p.transport_level = transport;
    p.flag = flag;
    p.flag_source = source;
    p.required_level =
        (flag == EnforcementFlag::Enforce) ? transport : SecurityLevel::NonSecured;
    return p;
}

ClientSecurityProfile derive_profile(SecurityLevel transport,
                                     std::optional<EnforcementFlag> explicit_flag,
                                     LegacyPolicy policy)
{
    if (explicit_flag)
        return make_profile(transport, *explicit_flag, FlagSource::ExplicitConnect);

    EnforcementFlag inferred = EnforcementFlag::Relax;
    if (policy == LegacyPolicy::InferFromTransport && transport == SecurityLevel::Secured)
        inferred = EnforcementFlag::Enforce;
    return make_profile(transport, inferred, FlagSource::InferredLegacy);
}

DeliveryDecision decide_delivery(const ClientSecurityProfile& publisher,
                                 const ClientSecurityProfile& subscriber)
{
    if (subscriber.transport_level < publisher.required_level)
        return DeliveryDecision::denied(DenyReason::PublisherEnforces);
    if (publisher.transport_level < subscriber.required_level)
        return DeliveryDecision::denied(DenyReason::SubscriberEnforces);
    return DeliveryDecision::allowed();
}

std::optional<EnforcementFlag> stricter_flag(std::optional<EnforcementFlag> a,
                                             std::optional<EnforcementFlag> b)
{
    auto rank = [](std::optional<EnforcementFlag> f) {
        if (!f)
            return 1;
        return *f == EnforcementFlag::Enforce ? 2 : 0;
    };
    return rank(a) >= rank(b) ? a : b;
}

std::array<TruthTableRow, 16> decision_truth_table()
{
    constexpr SecurityLevel levels[] = {SecurityLevel::NonSecured, SecurityLevel::Secured};
    constexpr EnforcementFlag flags[] = {EnforcementFlag::Relax, EnforcementFlag::Enforce};

    std::array<TruthTableRow, 16> table;
    std::size_t i = 0;
    for (SecurityLevel pl : levels)
        for (EnforcementFlag pf : flags)
            for (SecurityLevel sl : levels)
                for (EnforcementFlag sf : flags)
                {
                    auto pub = make_profile(pl, pf, FlagSource::ExplicitConnect);
                    auto sub = make_profile(sl, sf, FlagSource::ExplicitConnect);
                    table[i++] = {pl, pf, sl, sf, decide_delivery(pub, sub)};
                }
    return table;
}

const char* level_name(SecurityLevel l)
{
    return l == SecurityLevel::Secured ? "secured" : "non-secured";
}

const char* flag_name(EnforcementFlag f)
{
    return f == EnforcementFlag::Enforce ? "enforce" : "relax";
}

const char* source_name(FlagSource s)
{
    switch (s)
    {
    case FlagSource::ExplicitConnect: return "explicit-connect";
    case FlagSource::ExplicitMessage: return "explicit-message";
    case FlagSource::InferredLegacy: return "inferred-legacy";
    }
    return "?";
}

const char* reason_name(DenyReason r)
{
    return r == DenyReason::PublisherEnforces ? "publisher-enforces" : "subscriber-enforces";
}

} // namespace mqttsec::security
