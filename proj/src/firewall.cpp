#include "adfrl/firewall.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

namespace adfrl::fw {

namespace {

std::uint32_t prefix_mask(int len) {
    return len == 0 ? 0u : (len >= 32 ? 0xFFFFFFFFu : ~((1u << (32 - len)) - 1u));
}

} // namespace

AddrPred AddrPred::prefix(std::uint32_t a, int len) {
    if (len < 0 || len > 32) throw ConfigError("firewall: prefix length must be 0..32");
    AddrPred p;
    p.kind = Kind::PREFIX;
    p.prefix_len = len;
    p.addr = a & prefix_mask(len);
    return p;
}

bool AddrPred::matches(std::uint32_t a) const {
    switch (kind) {
        case Kind::ANY: return true;
        case Kind::EXACT: return a == addr;
        case Kind::PREFIX: return (a & prefix_mask(prefix_len)) == addr;
    }
    return false;
}

bool AddrPred::contains(const AddrPred& other) const {
    if (kind == Kind::ANY) return true;
    // Treat both EXACT and PREFIX as prefixes (EXACT is a /32).
    const int self_len = kind == Kind::EXACT ? 32 : prefix_len;
    const std::uint32_t self_net = kind == Kind::EXACT ? addr : (addr & prefix_mask(self_len));
    if (other.kind == Kind::ANY) return self_len == 0;
    const int other_len = other.kind == Kind::EXACT ? 32 : other.prefix_len;
    const std::uint32_t other_net =
        other.kind == Kind::EXACT ? other.addr : (other.addr & prefix_mask(other_len));
    if (self_len > other_len) return false;
    return (other_net & prefix_mask(self_len)) == self_net;
}

PortPred PortPred::range(std::uint16_t lo, std::uint16_t hi) {
    if (lo > hi) throw ConfigError("firewall: port range low must not exceed high");
    return {lo, hi};
}

bool Rule::matches(const traffic::FlowRecord& rec) const {
    return proto_match.matches(rec.protocol) && src_match.matches(rec.src_addr) &&
           dst_match.matches(rec.dst_addr) && src_port_match.matches(rec.src_port) &&
           dst_port_match.matches(rec.dst_port);
}

bool Rule::same_predicates(const Rule& other) const {
    return src_match == other.src_match && dst_match == other.dst_match &&
           src_port_match == other.src_port_match && dst_port_match == other.dst_port_match &&
           proto_match == other.proto_match;
}

bool Rule::predicate_superset_of(const Rule& other) const {
    return src_match.contains(other.src_match) && dst_match.contains(other.dst_match) &&
           src_port_match.contains(other.src_port_match) &&
           dst_port_match.contains(other.dst_port_match) &&
           proto_match.contains(other.proto_match);
}

const Rule* RuleSet::find(int id) const {
    for (const Rule& r : rules_)
        if (r.id == id) return &r;
    return nullptr;
}

int RuleSet::max_id() const {
    int m = 0;
    for (const Rule& r : rules_) m = std::max(m, r.id);
    return m;
}

void RuleSet::insert_rule(Rule rule, std::size_t position) {
    if (find(rule.id)) throw DeltaError("firewall: duplicate rule id " + std::to_string(rule.id));
    position = std::min(position, rules_.size());
    rules_.insert(rules_.begin() + static_cast<std::ptrdiff_t>(position), std::move(rule));
}

MatchResult RuleSet::evaluate(const traffic::FlowRecord& rec, long step) {
    for (Rule& r : rules_) {
        if (r.matches(rec)) {
            r.last_match_step = step;
            ++r.match_count;
            return {r.verdict, r.id};
        }
    }
    return {default_verdict_, std::nullopt};
}

TimedMatchResult RuleSet::timed_evaluate(const traffic::FlowRecord& rec, long step) {
    const auto t0 = std::chrono::steady_clock::now();
    MatchResult res = evaluate(rec, step);
    const auto t1 = std::chrono::steady_clock::now();
    return {res, static_cast<std::uint64_t>(
                     std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count())};
}

// ---------------------------------------------------------------- deltas

RuleDelta RuleDelta::insert(Rule r, std::size_t pos) {
    RuleDelta d;
    d.kind = Kind::INSERT;
    d.rule = std::move(r);
    d.position = pos;
    return d;
}

RuleDelta RuleDelta::remove(int id) {
    RuleDelta d;
    d.kind = Kind::REMOVE;
    d.target_id = id;
    return d;
}

RuleDelta RuleDelta::update(int id, Rule replacement) {
    RuleDelta d;
    d.kind = Kind::UPDATE;
    d.target_id = id;
    d.rule = std::move(replacement);
    return d;
}

RuleDelta RuleDelta::reorder(int id, std::size_t pos) {
    RuleDelta d;
    d.kind = Kind::REORDER;
    d.target_id = id;
    d.position = pos;
    return d;
}

RuleSet apply_delta(const RuleSet& ruleset, const RuleDelta& delta) {
    RuleSet out = ruleset;
    switch (delta.kind) {
        case RuleDelta::Kind::NOOP:
            return out;
        case RuleDelta::Kind::INSERT: {
            if (!delta.rule) throw DeltaError("firewall: INSERT delta carries no rule");
            out.insert_rule(*delta.rule, delta.position);
            return out;
        }
        case RuleDelta::Kind::REMOVE: {
            auto& rules = out.mutable_rules();
            const auto it = std::find_if(rules.begin(), rules.end(),
                                         [&](const Rule& r) { return r.id == delta.target_id; });
            if (it == rules.end())
                throw DeltaError("firewall: REMOVE target id " + std::to_string(delta.target_id) +
                                 " not present");
            rules.erase(it);
            return out;
        }
        case RuleDelta::Kind::UPDATE: {
            if (!delta.rule) throw DeltaError("firewall: UPDATE delta carries no replacement");
            auto& rules = out.mutable_rules();
            const auto it = std::find_if(rules.begin(), rules.end(),
                                         [&](const Rule& r) { return r.id == delta.target_id; });
            if (it == rules.end())
                throw DeltaError("firewall: UPDATE target id " + std::to_string(delta.target_id) +
                                 " not present");
            // Predicates are replaced; id, position, verdict and counters stay.
            it->src_match = delta.rule->src_match;
            it->dst_match = delta.rule->dst_match;
            it->src_port_match = delta.rule->src_port_match;
            it->dst_port_match = delta.rule->dst_port_match;
            it->proto_match = delta.rule->proto_match;
            return out;
        }
        case RuleDelta::Kind::REORDER: {
            auto& rules = out.mutable_rules();
            const auto it = std::find_if(rules.begin(), rules.end(),
                                         [&](const Rule& r) { return r.id == delta.target_id; });
            if (it == rules.end())
                throw DeltaError("firewall: REORDER target id " + std::to_string(delta.target_id) +
                                 " not present");
            Rule moved = std::move(*it);
            rules.erase(it);
            const std::size_t pos = std::min(delta.position, rules.size());
            rules.insert(rules.begin() + static_cast<std::ptrdiff_t>(pos), std::move(moved));
            return out;
        }
    }
    throw DeltaError("firewall: unknown delta kind");
}

std::vector<RedundancyFinding> redundancy_scan(const RuleSet& ruleset) {
    std::vector<RedundancyFinding> findings;
    const auto& rules = ruleset.rules();
    for (std::size_t i = 1; i < rules.size(); ++i) {
        const Rule& later = rules[i];
        int duplicate_of = -1;
        int shadowed_by = -1;
        for (std::size_t j = 0; j < i; ++j) {
            const Rule& earlier = rules[j];
            if (duplicate_of < 0 && earlier.same_predicates(later) &&
                earlier.verdict == later.verdict) {
                duplicate_of = earlier.id;
                break;
            }
            if (shadowed_by < 0 && earlier.predicate_superset_of(later)) shadowed_by = earlier.id;
        }
        if (duplicate_of >= 0) {
            findings.push_back({later.id, RedundancyReason::DUPLICATE, duplicate_of});
        } else if (shadowed_by >= 0) {
            findings.push_back({later.id, RedundancyReason::SHADOWED, shadowed_by});
        }
    }
    return findings;
}

// ---------------------------------------------------------------- text format

std::string format_addr_pred(const AddrPred& p) {
    switch (p.kind) {
        case AddrPred::Kind::ANY: return "*";
        case AddrPred::Kind::EXACT: return traffic::format_ipv4(p.addr);
        case AddrPred::Kind::PREFIX:
            return traffic::format_ipv4(p.addr) + "/" + std::to_string(p.prefix_len);
    }
    return "*";
}

std::string format_port_pred(const PortPred& p) {
    if (p.is_any()) return "*";
    if (p.lo == p.hi) return std::to_string(p.lo);
    return std::to_string(p.lo) + "-" + std::to_string(p.hi);
}

std::string format_proto_pred(const ProtoPred& p) {
    if (p.is_any()) return "*";
    std::string out;
    const char* names[] = {"tcp", "udp", "icmp"};
    for (int i = 0; i < 3; ++i) {
        if (p.mask & (1u << i)) {
            if (!out.empty()) out += ",";
            out += names[i];
        }
    }
    return out.empty() ? "none" : out;
}

namespace {

AddrPred parse_addr_pred(const std::string& s) {
    if (s == "*") return AddrPred::any();
    const auto slash = s.find('/');
    if (slash == std::string::npos) return AddrPred::exact(traffic::parse_ipv4(s));
    const int len = std::stoi(s.substr(slash + 1));
    return AddrPred::prefix(traffic::parse_ipv4(s.substr(0, slash)), len);
}

PortPred parse_port_pred(const std::string& s) {
    if (s == "*") return PortPred::any();
    const auto dash = s.find('-');
    auto parse16 = [](const std::string& t) {
        const unsigned long v = std::stoul(t);
        if (v > 65535) throw ConfigError("firewall: port out of range: " + t);
        return static_cast<std::uint16_t>(v);
    };
    if (dash == std::string::npos) return PortPred::single(parse16(s));
    return PortPred::range(parse16(s.substr(0, dash)), parse16(s.substr(dash + 1)));
}

ProtoPred parse_proto_pred(const std::string& s) {
    if (s == "*") return ProtoPred::any();
    ProtoPred p;
    p.mask = 0;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "tcp")
            p.mask |= 1u << static_cast<int>(traffic::Protocol::TCP);
        else if (tok == "udp")
            p.mask |= 1u << static_cast<int>(traffic::Protocol::UDP);
        else if (tok == "icmp")
            p.mask |= 1u << static_cast<int>(traffic::Protocol::ICMP);
        else
            throw ConfigError("firewall: unknown protocol '" + tok + "'");
    }
    if (p.mask == 0) throw ConfigError("firewall: empty protocol set");
    return p;
}

} // namespace

std::string serialize_ruleset(const RuleSet& ruleset) {
    std::ostringstream out;
    out << "ruleset v1 default="
        << (ruleset.default_verdict() == Verdict::ALLOW ? "ALLOW" : "DENY") << "\n";
    for (const Rule& r : ruleset.rules()) {
        out << r.id << " " << (r.verdict == Verdict::ALLOW ? "ALLOW" : "DENY") << " "
            << format_addr_pred(r.src_match) << " " << format_addr_pred(r.dst_match) << " "
            << format_port_pred(r.src_port_match) << " " << format_port_pred(r.dst_port_match)
            << " " << format_proto_pred(r.proto_match) << "\n";
    }
    return out.str();
}

RuleSet parse_ruleset(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("firewall: empty ruleset text");
    Verdict def;
    if (line == "ruleset v1 default=ALLOW")
        def = Verdict::ALLOW;
    else if (line == "ruleset v1 default=DENY")
        def = Verdict::DENY;
    else
        throw ConfigError("firewall: bad ruleset header: " + line);

    RuleSet rs(def);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string verdict, src, dst, sport, dport, proto;
        Rule r;
        if (!(ls >> r.id >> verdict >> src >> dst >> sport >> dport >> proto))
            throw ConfigError("firewall: malformed rule line: " + line);
        if (verdict == "ALLOW")
            r.verdict = Verdict::ALLOW;
        else if (verdict == "DENY")
            r.verdict = Verdict::DENY;
        else
            throw ConfigError("firewall: bad verdict '" + verdict + "'");
        r.src_match = parse_addr_pred(src);
        r.dst_match = parse_addr_pred(dst);
        r.src_port_match = parse_port_pred(sport);
        r.dst_port_match = parse_port_pred(dport);
        r.proto_match = parse_proto_pred(proto);
        rs.insert_rule(std::move(r), rs.size());
    }
    return rs;
}

} // namespace adfrl::fw
