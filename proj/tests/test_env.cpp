#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "adfrl/env.hpp"
#include "adfrl/errors.hpp"

using namespace adfrl;
using namespace adfrl::env;
using traffic::FeatureExtractor;
using traffic::FlowRecord;
using traffic::Label;
using traffic::Protocol;

namespace {

constexpr int kD = FeatureExtractor::kDim;

FlowRecord flow(double ts, std::uint32_t src, Label label) {
    FlowRecord r;
    r.timestamp = ts;
    r.src_addr = src;
    r.dst_addr = traffic::parse_ipv4("10.0.0.1");
    r.src_port = 40000;
    r.dst_port = 80;
    r.protocol = Protocol::TCP;
    r.bytes = 500;
    r.packets = 5;
    r.duration = 0.2;
    r.label = label;
    return r;
}

const std::uint32_t kAttacker = traffic::parse_ipv4("203.0.113.9");
const std::uint32_t kHostB = traffic::parse_ipv4("192.168.1.2");
const std::uint32_t kHostC = traffic::parse_ipv4("192.168.1.3");
const std::uint32_t kHostX = traffic::parse_ipv4("192.168.1.4");
const std::uint32_t kHostY = traffic::parse_ipv4("192.168.1.5");

traffic::Normalizer unit_normalizer() {
    traffic::Normalizer n;
    n.set_bounds(std::vector<double>(kD, 0.0), std::vector<double>(kD, 10.0));
    return n;
}

// All-zero weights: every gate sits at its fixed point, the logit is 0 and
// omega is exactly 0.5 for any input, which zeroes the shaping term.
detector::DetectorModel flat_detector() {
    detector::DetectorHyper h;
    h.input_dim = kD;
    h.hidden = 2;
    h.kernel = 2;
    h.channels = 2;
    return detector::DetectorModel(h);
}

EnvConfig small_cfg() {
    EnvConfig cfg;
    cfg.window_len = 3;
    cfg.interval_sec = 1.0;
    return cfg;
}

fw::Rule deny_rule(int id, std::uint32_t src, long created) {
    fw::Rule r;
    r.id = id;
    r.src_match = fw::AddrPred::exact(src);
    r.verdict = fw::Verdict::DENY;
    r.created_step = created;
    return r;
}

int action_index(const ActionCatalog& cat, ActionKind kind) {
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat[i] == kind) return static_cast<int>(i);
    return -1;
}

} // namespace

TEST_CASE("action catalog names and classes") {
    const auto cat = default_catalog();
    REQUIRE(cat.size() == 7);
    CHECK(cat[0] == ActionKind::NOOP);
    for (ActionKind k : cat) {
        const auto back = action_from_name(action_name(k));
        REQUIRE(back.has_value());
        CHECK(*back == k);
    }
    CHECK_FALSE(action_from_name("FROB").has_value());
    CHECK_FALSE(is_deny_action(ActionKind::NOOP));
    CHECK(is_deny_action(ActionKind::DENY_SRC));
    CHECK(is_deny_action(ActionKind::DENY_SRC_DPORT));
    CHECK(is_deny_action(ActionKind::WIDEN_TOP));
    CHECK_FALSE(is_deny_action(ActionKind::REMOVE_OLDEST));
    CHECK_FALSE(is_deny_action(ActionKind::PROMOTE_HOT));
}

TEST_CASE("reward combines counts, penalties and shaping, then clamps") {
    const RewardWeights w;
    CHECK(reward(3, 1, 2, 0, false, false, 0.5, true, w, -10, 10) ==
          doctest::Approx(3.02).epsilon(1e-12));
    CHECK(reward(0, 0, 0, 0, true, true, 0.5, false, w, -10, 10) ==
          doctest::Approx(-2.0));
    CHECK(reward(0, 0, 0, 0, false, false, 0.9, true, w, -10, 10) ==
          doctest::Approx(0.5 * 0.4).epsilon(1e-9));
    CHECK(reward(0, 0, 0, 0, false, false, 0.9, false, w, -10, 10) ==
          doctest::Approx(-0.5 * 0.4).epsilon(1e-9));
    CHECK(reward(10, 0, 0, 0, false, false, 0.5, true, w, -10, 10) == 10.0);
    CHECK(reward(0, 10, 0, 0, false, false, 0.5, false, w, -10, 10) == -10.0);

    RewardWeights custom;
    custom.w_tp = 1.0;
    custom.w_fp = 0.5;
    custom.w_fn = 0.25;
    custom.w_tn = 0.0;
    custom.p_infeasible = 2.0;
    custom.p_redundant = 3.0;
    custom.shaping = 0.0;
    CHECK(reward(2, 2, 4, 4, true, true, 0.9, true, custom, -100, 100) ==
          doctest::Approx(2.0 - 1.0 - 1.0 - 5.0).epsilon(1e-12));
}

TEST_CASE("rolling stats aggregate a bounded horizon") {
    RollingStats rs;
    rs.horizon = 3;
    CHECK(rs.deny_rate() == 0.0);
    CHECK(rs.mean_omega() == 0.5);
    CHECK(rs.flagged_fraction(0.7) == 0.0);
    CHECK(rs.fp_estimate(0.7) == 0.0);

    rs.push(10, 4, 0.9);
    rs.push(10, 1, 0.3);
    CHECK(rs.deny_rate() == doctest::Approx(0.25));
    CHECK(rs.mean_omega() == doctest::Approx(0.6));
    CHECK(rs.flagged_fraction(0.7) == doctest::Approx(0.5));
    // Of 5 denials, the 1 in the quiet (omega <= threshold) interval counts.
    CHECK(rs.fp_estimate(0.7) == doctest::Approx(0.2));
    // Threshold comparison is strict, so omega == threshold is quiet.
    CHECK(rs.flagged_fraction(0.9) == 0.0);
    CHECK(rs.fp_estimate(0.9) == doctest::Approx(1.0));

    rs.push(5, 0, 0.1);
    rs.push(5, 0, 0.1);
    CHECK(rs.intervals.size() == 3); // horizon evicts the oldest
    CHECK(rs.intervals.front().flows == 10);
    CHECK(rs.deny_rate() == doctest::Approx(1.0 / 20.0));
}

TEST_CASE("state layout: means, maxima, omega block, firewall block") {
    const std::vector<nn::Vec> win = {{0.2, 0.8}, {0.4, 0.6}};
    RollingStats rolling;
    rolling.push(10, 4, 0.9);
    rolling.push(10, 1, 0.3);
    fw::RuleSet rs;
    rs.insert_rule(deny_rule(1, kAttacker, 0), 0);
    rs.insert_rule(deny_rule(2, kHostB, 0), 1);
    EnvConfig cfg;
    cfg.rule_cap = 64;
    cfg.anomaly_threshold = 0.7;

    const EnvState st = build_state(win, 0.42, rolling, rs, cfg);
    REQUIRE(st.window_aggregates.size() == 4);
    CHECK(st.window_aggregates[0] == doctest::Approx(0.3));
    CHECK(st.window_aggregates[1] == doctest::Approx(0.7));
    CHECK(st.window_aggregates[2] == doctest::Approx(0.4));
    CHECK(st.window_aggregates[3] == doctest::Approx(0.8));
    REQUIRE(st.omega_stats.size() == 3);
    CHECK(st.omega_stats[0] == 0.42);
    CHECK(st.omega_stats[1] == doctest::Approx(0.6));
    CHECK(st.omega_stats[2] == doctest::Approx(0.5));
    REQUIRE(st.firewall_summary.size() == 3);
    CHECK(st.firewall_summary[0] == doctest::Approx(2.0 / 64.0));
    CHECK(st.firewall_summary[1] == doctest::Approx(0.25));
    CHECK(st.firewall_summary[2] == doctest::Approx(0.2));

    const agent::State flat = st.flatten();
    REQUIRE(flat.size() == 10); // 2D + 6 with D = 2
    CHECK(flat[0] == st.window_aggregates[0]);
    CHECK(flat[4] == st.omega_stats[0]);
    CHECK(flat[7] == st.firewall_summary[0]);

    // Fill saturates at 1.
    cfg.rule_cap = 1;
    CHECK(build_state(win, 0.5, rolling, rs, cfg).firewall_summary[0] == 1.0);

    CHECK_THROWS_AS(build_state({}, 0.5, rolling, rs, cfg), UsageError);
    const std::vector<nn::Vec> ragged = {{0.1, 0.2}, {0.1}};
    CHECK_THROWS_AS(build_state(ragged, 0.5, rolling, rs, cfg), ShapeError);
}

TEST_CASE("deny decodes target the highest-omega flow") {
    fw::RuleSet rs;
    DecodeContext ctx;
    ctx.ruleset = &rs;
    ctx.next_rule_id = 7;
    ctx.step = 13;
    ctx.window_flows = {flow(0.1, kHostB, Label::BENIGN), flow(0.2, kAttacker, Label::MALICIOUS),
                        flow(0.3, kHostC, Label::BENIGN)};
    ctx.flow_omegas = {0.3, 0.9, 0.9}; // tie resolves to the first maximum

    const DecodeResult r1 = decode_action(ActionKind::DENY_SRC, ctx);
    CHECK_FALSE(r1.infeasible);
    CHECK(r1.deny_action);
    REQUIRE(r1.delta.kind == fw::RuleDelta::Kind::INSERT);
    CHECK(r1.delta.position == 0);
    REQUIRE(r1.delta.rule.has_value());
    CHECK(r1.delta.rule->id == 7);
    CHECK(r1.delta.rule->created_step == 13);
    CHECK(r1.delta.rule->verdict == fw::Verdict::DENY);
    CHECK(r1.delta.rule->src_match == fw::AddrPred::exact(kAttacker));
    CHECK(r1.delta.rule->dst_port_match.is_any());

    const DecodeResult r2 = decode_action(ActionKind::DENY_SRC_DPORT, ctx);
    CHECK(r2.delta.rule->src_match == fw::AddrPred::exact(kAttacker));
    CHECK(r2.delta.rule->dst_port_match == fw::PortPred::single(80));

    DecodeContext empty;
    empty.ruleset = &rs;
    const DecodeResult r3 = decode_action(ActionKind::DENY_SRC, empty);
    CHECK(r3.infeasible);
    CHECK(r3.deny_action);
    CHECK(r3.delta.kind == fw::RuleDelta::Kind::NOOP);

    const DecodeResult r4 = decode_action(ActionKind::NOOP, ctx);
    CHECK_FALSE(r4.infeasible);
    CHECK_FALSE(r4.deny_action);
    CHECK(r4.delta.kind == fw::RuleDelta::Kind::NOOP);
}

TEST_CASE("widen targets the newest deny rule with an exact source") {
    fw::RuleSet rs;
    rs.insert_rule(deny_rule(1, traffic::parse_ipv4("10.1.2.3"), 5), 0);
    rs.insert_rule(deny_rule(2, traffic::parse_ipv4("10.9.9.9"), 9), 1);
    DecodeContext ctx;
    ctx.ruleset = &rs;

    const DecodeResult r = decode_action(ActionKind::WIDEN_TOP, ctx);
    REQUIRE(r.delta.kind == fw::RuleDelta::Kind::UPDATE);
    CHECK(r.delta.target_id == 2);
    CHECK(r.delta.rule->src_match ==
          fw::AddrPred::prefix(traffic::parse_ipv4("10.9.9.0"), 24));

    // Equal creation steps: the higher id is newer.
    fw::RuleSet tie;
    tie.insert_rule(deny_rule(1, kHostB, 5), 0);
    tie.insert_rule(deny_rule(4, kHostC, 5), 1);
    tie.insert_rule(deny_rule(2, kHostX, 5), 2);
    ctx.ruleset = &tie;
    CHECK(decode_action(ActionKind::WIDEN_TOP, ctx).delta.target_id == 4);

    // Already-widened sources cannot widen again.
    fw::RuleSet widened;
    fw::Rule p = deny_rule(1, 0, 1);
    p.src_match = fw::AddrPred::prefix(traffic::parse_ipv4("10.9.9.0"), 24);
    widened.insert_rule(p, 0);
    ctx.ruleset = &widened;
    CHECK(decode_action(ActionKind::WIDEN_TOP, ctx).infeasible);

    // Allow rules are not deny rules; an empty or allow-only set is infeasible.
    fw::RuleSet allows;
    fw::Rule a = deny_rule(1, kHostB, 1);
    a.verdict = fw::Verdict::ALLOW;
    allows.insert_rule(a, 0);
    ctx.ruleset = &allows;
    CHECK(decode_action(ActionKind::WIDEN_TOP, ctx).infeasible);
    CHECK(decode_action(ActionKind::REMOVE_OLDEST, ctx).infeasible);
    CHECK(decode_action(ActionKind::REMOVE_COLDEST, ctx).infeasible);
}

TEST_CASE("remove decodes pick the oldest and the coldest deny rules") {
    fw::RuleSet rs;
    rs.insert_rule(deny_rule(3, kHostB, 8), 0);
    rs.insert_rule(deny_rule(1, kHostC, 2), 1);
    rs.insert_rule(deny_rule(2, kHostX, 2), 2);
    DecodeContext ctx;
    ctx.ruleset = &rs;

    const DecodeResult oldest = decode_action(ActionKind::REMOVE_OLDEST, ctx);
    REQUIRE(oldest.delta.kind == fw::RuleDelta::Kind::REMOVE);
    CHECK(oldest.delta.target_id == 1); // created 2, lower id on the tie
    CHECK_FALSE(oldest.deny_action);

    // Coldest: never-matched before matched, then oldest creation.
    fw::RuleSet cold;
    fw::Rule m1 = deny_rule(1, kHostB, 1);
    m1.last_match_step = 7;
    fw::Rule m2 = deny_rule(2, kHostC, 3);
    fw::Rule m3 = deny_rule(3, kHostX, 2);
    cold.insert_rule(m1, 0);
    cold.insert_rule(m2, 1);
    cold.insert_rule(m3, 2);
    ctx.ruleset = &cold;
    CHECK(decode_action(ActionKind::REMOVE_COLDEST, ctx).delta.target_id == 3);

    fw::RuleSet all_matched;
    fw::Rule h1 = deny_rule(1, kHostB, 1);
    h1.last_match_step = 7;
    fw::Rule h2 = deny_rule(2, kHostC, 1);
    h2.last_match_step = 2;
    all_matched.insert_rule(h1, 0);
    all_matched.insert_rule(h2, 1);
    ctx.ruleset = &all_matched;
    CHECK(decode_action(ActionKind::REMOVE_COLDEST, ctx).delta.target_id == 2);
}

TEST_CASE("promote targets the most-matched rule of any verdict") {
    fw::RuleSet rs;
    fw::Rule r1 = deny_rule(1, kHostB, 1);
    r1.match_count = 0;
    fw::Rule r2 = deny_rule(2, kHostC, 1);
    r2.verdict = fw::Verdict::ALLOW;
    r2.match_count = 5;
    fw::Rule r3 = deny_rule(3, kHostX, 1);
    r3.match_count = 5;
    rs.insert_rule(r1, 0);
    rs.insert_rule(r2, 1);
    rs.insert_rule(r3, 2);
    DecodeContext ctx;
    ctx.ruleset = &rs;

    const DecodeResult r = decode_action(ActionKind::PROMOTE_HOT, ctx);
    REQUIRE(r.delta.kind == fw::RuleDelta::Kind::REORDER);
    CHECK(r.delta.target_id == 2); // list order wins the tie
    CHECK(r.delta.position == 0);

    fw::RuleSet unmatched;
    unmatched.insert_rule(deny_rule(1, kHostB, 1), 0);
    ctx.ruleset = &unmatched;
    CHECK(decode_action(ActionKind::PROMOTE_HOT, ctx).infeasible);
}

TEST_CASE("decode context validation") {
    DecodeContext no_rules;
    CHECK_THROWS_AS(decode_action(ActionKind::NOOP, no_rules), UsageError);

    fw::RuleSet rs;
    DecodeContext skew;
    skew.ruleset = &rs;
    skew.window_flows = {flow(0.1, kHostB, Label::BENIGN)};
    skew.flow_omegas = {0.5, 0.5};
    CHECK_THROWS_AS(decode_action(ActionKind::NOOP, skew), UsageError);
}

TEST_CASE("flow sources rewind deterministically") {
    std::vector<FlowRecord> recs = {flow(0.1, kHostB, Label::BENIGN),
                                    flow(0.2, kHostC, Label::BENIGN)};
    VectorSource vs(recs);
    CHECK(vs.next()->src_addr == kHostB);
    CHECK(vs.next()->src_addr == kHostC);
    CHECK_FALSE(vs.next().has_value());
    vs.reset(99);
    CHECK(vs.next()->src_addr == kHostB);

    traffic::SyntheticConfig scfg;
    scfg.attacker_addrs = {kAttacker};
    scfg.malicious_fraction = 0.4;
    SyntheticSource a(scfg, 5);
    SyntheticSource b(scfg, 5);
    a.reset(3);
    b.reset(3);
    for (int i = 0; i < 50; ++i) {
        const auto fa = a.next();
        const auto fb = b.next();
        CHECK(fa->timestamp == fb->timestamp);
        CHECK(fa->src_addr == fb->src_addr);
    }
    b.reset(4);
    bool differs = false;
    a.reset(3);
    for (int i = 0; i < 50; ++i)
        differs = differs || a.next()->src_addr != b.next()->src_addr;
    CHECK(differs);

    traffic::SyntheticConfig bad;
    bad.flows_per_sec = -1.0;
    CHECK_THROWS_AS(SyntheticSource(bad, 1), ConfigError);
}

TEST_CASE("environment constructor and reset guardrails") {
    auto det = flat_detector();
    traffic::FeaturePipeline pipe(unit_normalizer());
    CHECK_THROWS_AS(Environment(small_cfg(), nullptr, pipe,
                                std::make_unique<VectorSource>(std::vector<FlowRecord>{})),
                    UsageError);
    CHECK_THROWS_AS(Environment(small_cfg(), &det, pipe, nullptr), UsageError);

    detector::DetectorHyper wrong;
    wrong.input_dim = 4;
    wrong.kernel = 2;
    detector::DetectorModel small(wrong);
    CHECK_THROWS_AS(Environment(small_cfg(), &small, pipe,
                                std::make_unique<VectorSource>(std::vector<FlowRecord>{})),
                    ShapeError);

    // Too few flows to fill the first window.
    std::vector<FlowRecord> two = {flow(0.1, kHostB, Label::BENIGN),
                                   flow(0.2, kHostC, Label::BENIGN)};
    Environment env(small_cfg(), &det, pipe, std::make_unique<VectorSource>(two));
    CHECK_THROWS_AS(env.reset(), UsageError);

    Environment unreset(small_cfg(), &det, pipe,
                        std::make_unique<VectorSource>(std::vector<FlowRecord>{}));
    CHECK_THROWS_AS(unreset.step(0), StateError);
}

TEST_CASE("a hand-stepped episode produces exact counts and rewards") {
    auto det = flat_detector();
    std::vector<FlowRecord> flows = {
        flow(0.1, kAttacker, Label::MALICIOUS), // preamble, never judged
        flow(0.2, kHostB, Label::BENIGN),
        flow(0.3, kHostC, Label::BENIGN),
        flow(0.5, kAttacker, Label::MALICIOUS), // step 1 interval [.., 1.3)
        flow(1.0, kHostX, Label::BENIGN),
        flow(1.3, kAttacker, Label::BENIGN),    // step 2 interval [1.3, 2.3)
        flow(1.8, kAttacker, Label::MALICIOUS),
        flow(2.2, kHostY, Label::BENIGN),
        flow(2.5, kAttacker, Label::MALICIOUS), // step 3, then the source ends
    };
    Environment env(small_cfg(), &det, traffic::FeaturePipeline(unit_normalizer()),
                    std::make_unique<VectorSource>(flows));
    CHECK(env.state_dim() == 2 * kD + 6);
    CHECK(env.action_count() == 7);

    const EnvState first = env.reset();
    CHECK(env.preamble_flows() == 3);
    CHECK(env.flows_processed() == 0);
    CHECK(first.omega_stats[0] == 0.5);
    CHECK(first.firewall_summary[0] == 0.0);
    CHECK(first.step_index == 0);

    // The primed window is exactly the first three flows through the pipeline.
    traffic::FeaturePipeline mirror(unit_normalizer());
    std::vector<nn::Vec> mirror_win;
    for (int i = 0; i < 3; ++i) mirror_win.push_back(mirror.extract(flows[i]).values);
    for (int j = 0; j < kD; ++j) {
        double sum = 0.0, mx = mirror_win[0][j];
        for (const auto& row : mirror_win) {
            sum += row[j];
            mx = std::max(mx, row[j]);
        }
        CHECK(first.window_aggregates[j] == sum / 3.0);
        CHECK(first.window_aggregates[kD + j] == mx);
    }

    const auto cat = env.config().catalog;

    // Step 1: deny the hottest window flow. All omegas tie at 0.5, so the
    // oldest window member (the attacker preamble flow) is chosen.
    const auto s1 = env.step(action_index(cat, ActionKind::DENY_SRC));
    CHECK(s1.outcome.tp == 1); // t=0.5 attacker flow
    CHECK(s1.outcome.fp == 0);
    CHECK(s1.outcome.tn == 1); // t=1.0 bystander
    CHECK(s1.outcome.fn == 0);
    CHECK(s1.outcome.reward == doctest::Approx(2.01).epsilon(1e-12));
    CHECK_FALSE(s1.outcome.delta_was_redundant);
    CHECK_FALSE(s1.outcome.decode_infeasible);
    CHECK(s1.outcome.delta_applied.kind == fw::RuleDelta::Kind::INSERT);
    CHECK_FALSE(s1.episode_end);
    REQUIRE(env.ruleset().size() == 1);
    CHECK(env.ruleset().rules()[0].id == 1);
    CHECK(env.ruleset().rules()[0].src_match == fw::AddrPred::exact(kAttacker));
    CHECK(env.ruleset().rules()[0].match_count == 1);
    CHECK(env.flows_processed() == 2);
    CHECK(s1.state.step_index == 1);
    CHECK(s1.state.firewall_summary[0] == doctest::Approx(1.0 / 64.0));
    // One interval: 2 flows, 1 denied, quiet omega.
    CHECK(s1.state.firewall_summary[1] == doctest::Approx(0.5));
    CHECK(s1.state.firewall_summary[2] == doctest::Approx(1.0));

    // Step 2: NOOP. The benign attacker-address flow is a false positive.
    const auto s2 = env.step(action_index(cat, ActionKind::NOOP));
    CHECK(s2.outcome.tp == 1);
    CHECK(s2.outcome.fp == 1);
    CHECK(s2.outcome.tn == 1);
    CHECK(s2.outcome.fn == 0);
    CHECK(s2.outcome.reward == doctest::Approx(2.0 - 3.0 + 0.01).epsilon(1e-12));
    CHECK(s2.outcome.delta_applied.kind == fw::RuleDelta::Kind::NOOP);
    CHECK(env.ruleset().rules()[0].match_count == 3);
    CHECK_FALSE(s2.episode_end);

    // Step 3: drop the only rule; the final attack flow slips through.
    const auto s3 = env.step(action_index(cat, ActionKind::REMOVE_OLDEST));
    CHECK(env.ruleset().empty());
    CHECK(s3.outcome.tp == 0);
    CHECK(s3.outcome.fn == 1);
    CHECK(s3.outcome.reward == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(s3.episode_end); // source exhausted inside the interval

    // Every judged flow is accounted for exactly once.
    const long total = s1.outcome.tp + s1.outcome.fp + s1.outcome.tn + s1.outcome.fn +
                       s2.outcome.tp + s2.outcome.fp + s2.outcome.tn + s2.outcome.fn +
                       s3.outcome.tp + s3.outcome.fp + s3.outcome.tn + s3.outcome.fn;
    CHECK(total == env.flows_processed());

    CHECK_THROWS_AS(env.step(99), UsageError);

    // A second reset replays the same traffic and primes again.
    env.reset(1);
    CHECK(env.preamble_flows() == 6);
    CHECK(env.ruleset().empty());
}

TEST_CASE("repeated deny of the same source is flagged redundant") {
    auto det = flat_detector();
    std::vector<FlowRecord> flows;
    for (int i = 0; i < 12; ++i)
        flows.push_back(flow(0.1 + 0.45 * i, kAttacker, Label::MALICIOUS));
    Environment env(small_cfg(), &det, traffic::FeaturePipeline(unit_normalizer()),
                    std::make_unique<VectorSource>(flows));
    env.reset();
    const auto cat = env.config().catalog;

    const auto s1 = env.step(action_index(cat, ActionKind::DENY_SRC));
    CHECK_FALSE(s1.outcome.delta_was_redundant);
    const auto s2 = env.step(action_index(cat, ActionKind::DENY_SRC));
    CHECK(s2.outcome.delta_was_redundant);
    CHECK(env.ruleset().size() == 2);
    // reward: all judged flows are attacker tp, minus the redundancy penalty.
    const double expect = 2.0 * s2.outcome.tp - 1.0;
    CHECK(s2.outcome.reward == doctest::Approx(expect).epsilon(1e-12));

    // An infeasible decode costs its own penalty.
    const auto s3 = env.step(action_index(cat, ActionKind::PROMOTE_HOT));
    CHECK_FALSE(s3.outcome.decode_infeasible); // rules have matches by now
    const auto s4 = env.step(action_index(cat, ActionKind::WIDEN_TOP));
    CHECK_FALSE(s4.outcome.decode_infeasible);
    const auto s5 = env.step(action_index(cat, ActionKind::WIDEN_TOP));
    // Newest deny is now a /24 prefix, so widening again is infeasible.
    CHECK(s5.outcome.decode_infeasible);
    CHECK(s5.outcome.delta_applied.kind == fw::RuleDelta::Kind::NOOP);
}

TEST_CASE("training loop: cadence, logging, restarts and determinism") {
    auto build_env = [](const std::vector<FlowRecord>& flows) {
        static auto det = flat_detector();
        return Environment(small_cfg(), &det, traffic::FeaturePipeline(unit_normalizer()),
                           std::make_unique<VectorSource>(flows));
    };
    std::vector<FlowRecord> flows;
    for (int i = 0; i < 200; ++i)
        flows.push_back(flow(0.1 + 0.5 * i, i % 2 ? kHostB : kHostC, Label::BENIGN));

    agent::AgentConfig ac;
    ac.batch_size = 4;
    ac.target_update_every = 5;
    ac.epsilon_decay_steps = 8;
    ac.hidden_sizes = {8};
    ac.seed = 3;

    auto run_once = [&](std::vector<FlowRecord> fl, long steps) {
        Environment env = build_env(fl);
        agent::DqnAgent ag(ac, env.state_dim(), env.action_count());
        RunSettings rs;
        rs.total_steps = steps;
        rs.eval_every = 4;
        rs.eval_hook = [](long step, agent::DqnAgent&) {
            return TrainingLog::Snapshot{step, 0.25, 0.125};
        };
        return run_training(env, ag, rs);
    };

    const TrainingLog log = run_once(flows, 12);
    REQUIRE(log.rows.size() == 12);
    CHECK(log.sync_steps == std::vector<long>{5, 10});
    CHECK(log.episodes == 1);
    CHECK(log.preamble_flows == 3);
    REQUIRE(log.snapshots.size() == 3);
    CHECK(log.snapshots[0].step == 4);
    CHECK(log.snapshots[2].step == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(log.rows[i].step == i + 1);
        CHECK(log.rows[i].epsilon == epsilon_at(i, ac));
        const bool loss_ready = i >= 3; // batch of 4 fills on the fourth step
        CHECK(log.rows[i].loss.has_value() == loss_ready);
    }

    // Same seeds, same traffic: identical logs apart from wall-clock latency.
    const TrainingLog again = run_once(flows, 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(log.rows[i].reward == again.rows[i].reward);
        CHECK(log.rows[i].loss == again.rows[i].loss);
        CHECK(log.rows[i].tp == again.rows[i].tp);
        CHECK(log.rows[i].fn == again.rows[i].fn);
        CHECK(log.rows[i].rule_count == again.rows[i].rule_count);
    }

    // A short source forces mid-run episode restarts.
    std::vector<FlowRecord> brief(flows.begin(), flows.begin() + 12);
    const TrainingLog multi = run_once(brief, 15);
    CHECK(multi.rows.size() == 15);
    CHECK(multi.episodes > 1);
    CHECK(multi.preamble_flows == 3 * multi.episodes);

    Environment env = build_env(flows);
    agent::DqnAgent ag(ac, env.state_dim(), env.action_count());
    RunSettings bad;
    bad.total_steps = 0;
    CHECK_THROWS_AS(run_training(env, ag, bad), UsageError);
    agent::DqnAgent skew(ac, env.state_dim() + 1, env.action_count());
    RunSettings one;
    one.total_steps = 1;
    CHECK_THROWS_AS(run_training(env, skew, one), ShapeError);
}

TEST_CASE("training log serialization") {
    TrainingLog log;
    TrainingLog::Row r1;
    r1.step = 1;
    r1.epsilon = 1.0;
    r1.reward = -0.99;
    r1.tp = 1;
    r1.fp = 1;
    r1.tn = 1;
    r1.fn = 0;
    r1.rule_count = 1;
    r1.redundant = false;
    r1.latency_ns = 120;
    TrainingLog::Row r2;
    r2.step = 2;
    r2.epsilon = 0.5;
    r2.reward = 2.01;
    r2.loss = 0.125;
    r2.tp = 2;
    r2.rule_count = 2;
    r2.redundant = true;
    r2.latency_ns = 95;
    log.rows = {r1, r2};
    CHECK(training_log_csv(log) ==
          "step,epsilon,reward,loss,tp,fp,tn,fn,rule_count,redundant,latency_ns\n"
          "1,1,-0.99,,1,1,1,0,1,0,120\n"
          "2,0.5,2.01,0.125,2,0,0,0,2,1,95\n");
}
