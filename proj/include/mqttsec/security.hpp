#pragma once

#include "mqttsec/codec.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace mqttsec::security {

// Ordered: higher value = stronger protection. Dispatch only ever compares,
// so further levels slot in without touching the decision logic.
enum class SecurityLevel : std::uint8_t {
    NonSecured = 0,
    Secured = 1,
};

enum class EnforcementFlag : std::uint8_t {
    Relax = 0,
    Enforce = 1,
};

enum class FlagSource : std::uint8_t {
    ExplicitConnect,
    ExplicitMessage,
    InferredLegacy,
};

// How clients that never mention security are treated.
enum class LegacyPolicy : std::uint8_t {
    InferFromTransport, // TLS connection implies Enforce, plain implies Relax
    AlwaysRelaxed,
};

struct ClientSecurityProfile {
    SecurityLevel transport_level = SecurityLevel::NonSecured;
    EnforcementFlag flag = EnforcementFlag::Relax;
    FlagSource flag_source = FlagSource::InferredLegacy;
    SecurityLevel required_level = SecurityLevel::NonSecured;

    bool operator==(const ClientSecurityProfile&) const = default;
};

enum class DenyReason : std::uint8_t {
    PublisherEnforces,
    SubscriberEnforces,
};

struct DeliveryDecision {
    bool deliver = false;
    std::optional<DenyReason> reason; // set iff !deliver

    static DeliveryDecision allowed() { return {true, std::nullopt}; }
    static DeliveryDecision denied(DenyReason r) { return {false, r}; }

    bool operator==(const DeliveryDecision&) const = default;
};

// Result of scanning User Properties for the "s" flag. A present key with a
// value other than "0"/"1" is a protocol-usage error the caller must act on
// (refuse the packet or the connection), not something to ignore.
struct ParsedSecurityFlag {
    std::optional<EnforcementFlag> flag;
    bool invalid = false;
};

// First "s" occurrence wins; "1" → Enforce, "0" → Relax.
ParsedSecurityFlag parse_security_property(const std::vector<codec::UserProperty>& props);

ClientSecurityProfile make_profile(SecurityLevel transport, EnforcementFlag flag,
                                   FlagSource source);

// CONNECT-time derivation: an explicit flag wins; otherwise the legacy policy
// decides for the client.
ClientSecurityProfile derive_profile(SecurityLevel transport,
                                     std::optional<EnforcementFlag> explicit_flag,
                                     LegacyPolicy policy);

// Deliver iff each side's connection satisfies what the other side requires.
// When both sides are violated the publisher's reason is reported.
DeliveryDecision decide_delivery(const ClientSecurityProfile& publisher,
                                 const ClientSecurityProfile& subscriber);

// Strictest-wins ordering for overlapping subscription overrides:
// Enforce > absent > Relax.
std::optional<EnforcementFlag> stricter_flag(std::optional<EnforcementFlag> a,
                                             std::optional<EnforcementFlag> b);

struct TruthTableRow {
    SecurityLevel pub_level;
    EnforcementFlag pub_flag;
    SecurityLevel sub_level;
    EnforcementFlag sub_flag;
    DeliveryDecision decision;

    bool operator==(const TruthTableRow&) const = default;
};

// All 16 (pub level, pub flag, sub level, sub flag) combinations.
std::array<TruthTableRow, 16> decision_truth_table();

const char* level_name(SecurityLevel l);
const char* flag_name(EnforcementFlag f);
const char* source_name(FlagSource s);
const char* reason_name(DenyReason r);

} // namespace mqttsec::security
