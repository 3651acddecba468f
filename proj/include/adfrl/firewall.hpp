#ifndef ADFRL_FIREWALL_HPP
#define ADFRL_FIREWALL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adfrl/errors.hpp"
#include "adfrl/traffic.hpp"

namespace adfrl::fw {

enum class Verdict : std::uint8_t { ALLOW, DENY };

// Address predicate: wildcard, exact address, or CIDR-style prefix.
struct AddrPred {
    enum class Kind : std::uint8_t { ANY, EXACT, PREFIX } kind = Kind::ANY;
    std::uint32_t addr = 0;
    int prefix_len = 0; // PREFIX only, 0..32

    static AddrPred any() { return {}; }
    static AddrPred exact(std::uint32_t a) { return {Kind::EXACT, a, 32}; }
    static AddrPred prefix(std::uint32_t a, int len);

    bool matches(std::uint32_t a) const;
    // True when every address matched by `other` is also matched by this.
    bool contains(const AddrPred& other) const;
    bool operator==(const AddrPred&) const = default;
};

// Inclusive port range; {0, 65535} is the wildcard.
struct PortPred {
    std::uint16_t lo = 0;
    std::uint16_t hi = 65535;

    static PortPred any() { return {}; }
    static PortPred single(std::uint16_t p) { return {p, p}; }
    static PortPred range(std::uint16_t lo, std::uint16_t hi);

    bool is_any() const { return lo == 0 && hi == 65535; }
    bool matches(std::uint16_t p) const { return p >= lo && p <= hi; }
    bool contains(const PortPred& other) const { return lo <= other.lo && hi >= other.hi; }
    bool operator==(const PortPred&) const = default;
};

// Protocol set as a bitmask over {TCP, UDP, ICMP}.
struct ProtoPred {
    std::uint8_t mask = 0x7;

    static ProtoPred any() { return {}; }
    static ProtoPred only(traffic::Protocol p) {
        return {static_cast<std::uint8_t>(1u << static_cast<int>(p))};
    }

    bool is_any() const { return mask == 0x7; }
    bool matches(traffic::Protocol p) const { return mask & (1u << static_cast<int>(p)); }
    bool contains(const ProtoPred& other) const { return (mask & other.mask) == other.mask; }
    bool operator==(const ProtoPred&) const = default;
};

struct Rule {
    int id = 0;
    AddrPred src_match;
    AddrPred dst_match;
    PortPred src_port_match;
    PortPred dst_port_match;
    ProtoPred proto_match;
    Verdict verdict = Verdict::DENY;
    long created_step = 0;
    std::optional<long> last_match_step;
    long match_count = 0;

    bool matches(const traffic::FlowRecord& rec) const;
    bool same_predicates(const Rule& other) const;
    // Match-wise superset: every flow this rule's predicates admit is also
    // admitted by... see contains() on each predicate.
    bool predicate_superset_of(const Rule& other) const;
};

struct MatchResult {
    Verdict verdict = Verdict::ALLOW;
    std::optional<int> rule_id;
};

struct TimedMatchResult {
    MatchResult result;
    std::uint64_t elapsed_ns = 0;
};

// Ordered first-match rule list. Evaluation updates the matched rule's
// counters; structural changes go through apply_delta, which is pure.
class RuleSet {
public:
    explicit RuleSet(Verdict default_verdict = Verdict::ALLOW)
        : default_verdict_(default_verdict) {}

    const std::vector<Rule>& rules() const { return rules_; }
    Verdict default_verdict() const { return default_verdict_; }
    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    const Rule* find(int id) const;
    int max_id() const;

    // Used by apply_delta and tests; enforces id uniqueness.
    void insert_rule(Rule rule, std::size_t position);
    std::vector<Rule>& mutable_rules() { return rules_; }

    MatchResult evaluate(const traffic::FlowRecord& rec, long step);
    TimedMatchResult timed_evaluate(const traffic::FlowRecord& rec, long step);

private:
    std::vector<Rule> rules_;
    Verdict default_verdict_;
};

// One rule transformation (Kind NOOP is the identity).
struct RuleDelta {
    enum class Kind : std::uint8_t { INSERT, REMOVE, UPDATE, REORDER, NOOP } kind = Kind::NOOP;
    std::optional<Rule> rule;  // INSERT: full rule; UPDATE: replacement predicates
    int target_id = -1;        // REMOVE / UPDATE / REORDER
    std::size_t position = 0;  // INSERT / REORDER, clamped to list bounds

    static RuleDelta noop() { return {}; }
    static RuleDelta insert(Rule r, std::size_t pos);
    static RuleDelta remove(int id);
    static RuleDelta update(int id, Rule replacement);
    static RuleDelta reorder(int id, std::size_t pos);
};

// Applies a delta and returns the transformed set; the input is untouched.
// Throws DeltaError on inconsistent payloads or missing target ids.
RuleSet apply_delta(const RuleSet& ruleset, const RuleDelta& delta);

enum class RedundancyReason : std::uint8_t { SHADOWED, DUPLICATE };

struct RedundancyFinding {
    int rule_id = 0;
    RedundancyReason reason = RedundancyReason::SHADOWED;
    int earlier_rule_id = 0;
};

// DUPLICATE: identical predicates and verdict to an earlier rule.
// SHADOWED: an earlier rule matches a superset of this rule's traffic,
// regardless of verdict. A duplicate is reported as DUPLICATE only.
std::vector<RedundancyFinding> redundancy_scan(const RuleSet& ruleset);

// Line-oriented text format: header `ruleset v1 default=<verdict>` then one
// rule per line `<id> <verdict> <src> <dst> <sport> <dport> <proto>` with `*`
// wildcards. Counters are runtime state and are not serialized.
std::string serialize_ruleset(const RuleSet& ruleset);
RuleSet parse_ruleset(const std::string& text); // throws ConfigError

std::string format_addr_pred(const AddrPred& p);
std::string format_port_pred(const PortPred& p);
std::string format_proto_pred(const ProtoPred& p);

} // namespace adfrl::fw

#endif
