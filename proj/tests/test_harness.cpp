// Config parsing, metrics, and the experiment driver glue.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "adfrl/config.hpp"
#include "adfrl/errors.hpp"
#include "adfrl/experiment.hpp"
#include "adfrl/metrics.hpp"
#include "adfrl/rng.hpp"

using namespace adfrl;
using namespace adfrl::harness;
namespace fs = std::filesystem;

namespace {

// Asserts that fn throws E and the message mentions `needle`.
template <typename E, typename Fn>
void check_throws_with(Fn&& fn, const std::string& needle) {
    try {
        fn();
        FAIL_CHECK("expected exception mentioning '" << needle << "', none thrown");
    } catch (const E& e) {
        const std::string what = e.what();
        CHECK_MESSAGE(what.find(needle) != std::string::npos,
                      "message '" << what << "' does not mention '" << needle << "'");
    }
}

fs::path temp_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("adfrl_harness_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

env::TrainingLog::Row row(long step, double reward, long tp, long fp, long tn, long fn,
                          bool mutated, bool redundant, std::uint64_t latency) {
    env::TrainingLog::Row r;
    r.step = step;
    r.reward = reward;
    r.tp = tp;
    r.fp = fp;
    r.tn = tn;
    r.fn = fn;
    r.mutated = mutated;
    r.redundant = redundant;
    r.latency_ns = latency;
    return r;
}

// Mirrors the rank-based AUC with an O(pos*neg) pair count.
double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (int l : labels) neg += (l == 0);
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

traffic::TrafficWindow zero_window(std::size_t index, std::size_t len, int dim) {
    traffic::TrafficWindow w;
    w.window_index = index;
    w.features.assign(len, traffic::FeatureVector{std::vector<double>(dim, 0.0),
                                                  traffic::Label::BENIGN});
    return w;
}

// Zero weights leave every gate at its fixed point, so omega is exactly 0.5.
detector::DetectorModel flat_detector(int input_dim) {
    detector::DetectorHyper h;
    h.input_dim = input_dim;
    h.hidden = 2;
    h.kernel = 2;
    h.channels = 2;
    return detector::DetectorModel(h);
}

traffic::FlowRecord flow_from(const char* src, bool malicious) {
    traffic::FlowRecord r;
    r.src_addr = traffic::parse_ipv4(src);
    r.dst_addr = traffic::parse_ipv4("10.9.9.9");
    r.src_port = 40000;
    r.dst_port = 443;
    r.bytes = 100;
    r.packets = 2;
    r.label = malicious ? traffic::Label::MALICIOUS : traffic::Label::BENIGN;
    return r;
}

// Small synthetic run that trains in well under a second.
Config tiny_config() {
    return parse_config_text(
        "experiment.seed = 5\n"
        "experiment.total_steps = 40\n"
        "experiment.eval_every = 20\n"
        "experiment.eval_steps = 6\n"
        "traffic.calibration_flows = 240\n"
        "traffic.flows_per_sec = 40\n"
        "traffic.malicious_fraction = 0.45\n"
        "traffic.attack_start = 0\n"
        "traffic.attackers = 203.0.113.9,203.0.113.10\n"
        "detector.hidden = 6\n"
        "detector.channels = 4\n"
        "detector.epochs = 2\n"
        "agent.batch = 8\n"
        "agent.replay_capacity = 512\n"
        "agent.hidden = 8\n"
        "agent.epsilon_decay_steps = 30\n"
        "agent.target_sync = 16\n");
}

} // namespace

// ------------------------------------------------------------------- config

TEST_CASE("empty config text yields the reference hyperparameters") {
    const Config c = parse_config_text("");

    CHECK(c.name == "run");
    CHECK(c.seed == 1);
    CHECK(c.total_steps == 5000);
    CHECK(c.eval_every == 0);
    CHECK(c.eval_steps == 200);

    CHECK(c.traffic_source == "synthetic");
    CHECK(c.csv_path.empty());
    CHECK(c.calibration_flows == 3000);
    CHECK(c.synthetic.flows_per_sec == 6.0);
    CHECK(c.synthetic.benign_host_count == 20);
    CHECK(c.synthetic.malicious_fraction == 0.2);
    CHECK(c.feature_horizon_sec == 5.0);
    CHECK_FALSE(c.feature_passthrough);

    CHECK(c.detector.input_dim == 16);
    CHECK(c.detector.hidden == 16);
    CHECK(c.detector.kernel == 3);
    CHECK(c.detector.channels == 8);
    CHECK(c.detector.learning_rate == 0.001);
    CHECK(c.detector.epochs == 5);
    CHECK(c.detector.batch_size == 32);
    CHECK(c.detector.val_fraction == 0.2);
    CHECK_FALSE(c.detector.majority_label);
    CHECK(c.detector.optimizer == nn::OptimKind::ADAM);
    CHECK(c.detector_stride == 2);

    CHECK(c.environment.interval_sec == 1.0);
    CHECK(c.environment.window_len == 8);
    CHECK(c.environment.anomaly_threshold == 0.7);
    CHECK(c.environment.rule_cap == 64);
    CHECK(c.environment.history_horizon == 50);
    CHECK(c.environment.weights.w_tp == 2.0);
    CHECK(c.environment.weights.w_fp == 3.0);
    CHECK(c.environment.weights.w_fn == 2.0);
    CHECK(c.environment.weights.w_tn == 0.01);
    CHECK(c.environment.weights.p_infeasible == 1.0);
    CHECK(c.environment.weights.p_redundant == 1.0);
    CHECK(c.environment.weights.shaping == 0.5);
    CHECK(c.environment.reward_lo == -10.0);
    CHECK(c.environment.reward_hi == 10.0);

    CHECK(c.agent.gamma == 0.99);
    CHECK(c.agent.eta == 0.001);
    CHECK(c.agent.batch_size == 64);
    CHECK(c.agent.target_update_every == 2000);
    CHECK(c.agent.epsilon_start == 1.0);
    CHECK(c.agent.epsilon_end == 0.05);
    CHECK(c.agent.epsilon_decay_steps == 10000);
    CHECK(c.agent.replay_capacity == 50000);
    CHECK(c.agent.priority_exponent == 0.6);
    CHECK(c.agent.beta_start == 0.4);
    CHECK(c.agent.beta_end == 1.0);
    CHECK(c.agent.hidden_sizes == std::vector<int>{64, 64});
    CHECK(c.agent.optimizer == nn::OptimKind::ADAM);
    CHECK(c.agent.reward_lo == -10.0);
    CHECK(c.agent.reward_hi == 10.0);
}

TEST_CASE("keys route to their fields; comments and blanks are skipped") {
    const Config c = parse_config_text(
        "# experiment block\n"
        "experiment.name = pilot\n"
        "experiment.seed = 99\n"
        "\n"
        "   experiment.total_steps   =   123  \n"
        "traffic.attackers = 203.0.113.5, 203.0.113.6\n"
        "traffic.attackers_phase2 = 198.51.100.1\n"
        "traffic.phase2_start = 77.5\n"
        "traffic.benign_hosts = 9\n"
        "csv.benign_literals = ok,normal , clean\n"
        "csv.passthrough = entropy,variance\n"
        "features.passthrough = true\n"
        "detector.optimizer = sgd\n"
        "detector.majority_label = 1\n"
        "detector.kernel = 2\n"
        "env.window_len = 4\n"
        "env.threshold = 0.55\n"
        "traffic.calibration_flows = 64\n"
        "reward.lo = -4.5\n"
        "reward.hi = 4.5\n"
        "agent.hidden = 32, 16,8\n"
        "agent.optimizer = sgd\n"
        "agent.alpha = 0\n");

    CHECK(c.name == "pilot");
    CHECK(c.seed == 99);
    CHECK(c.total_steps == 123);
    CHECK(c.synthetic.attacker_addrs ==
          std::vector<std::uint32_t>{traffic::parse_ipv4("203.0.113.5"),
                                     traffic::parse_ipv4("203.0.113.6")});
    CHECK(c.synthetic.attacker_addrs_phase2 ==
          std::vector<std::uint32_t>{traffic::parse_ipv4("198.51.100.1")});
    CHECK(c.synthetic.phase2_start == 77.5);
    CHECK(c.synthetic.benign_host_count == 9);
    CHECK(c.schema.benign_literals == std::vector<std::string>{"ok", "normal", "clean"});
    CHECK(c.schema.passthrough == std::vector<std::string>{"entropy", "variance"});
    CHECK(c.feature_passthrough);
    CHECK(c.detector.optimizer == nn::OptimKind::SGD);
    CHECK(c.detector.majority_label);
    CHECK(c.environment.window_len == 4);
    CHECK(c.environment.anomaly_threshold == 0.55);
    CHECK(c.agent.hidden_sizes == std::vector<int>{32, 16, 8});
    CHECK(c.agent.optimizer == nn::OptimKind::SGD);
    CHECK(c.agent.priority_exponent == 0.0);

    // reward bounds land in both consumers
    CHECK(c.environment.reward_lo == -4.5);
    CHECK(c.environment.reward_hi == 4.5);
    CHECK(c.agent.reward_lo == -4.5);
    CHECK(c.agent.reward_hi == 4.5);
}

TEST_CASE("unknown keys and malformed values name the offender") {
    Config c;
    check_throws_with<ConfigError>(
        [&] { apply_key(c, "experiment.frobnicate", "1"); },
        "unknown config key 'experiment.frobnicate'");
    check_throws_with<ConfigError>(
        [&] { apply_key(c, "experiment.total_steps", "soon"); }, "experiment.total_steps");
    check_throws_with<ConfigError>([&] { apply_key(c, "agent.gamma", "fast"); },
                                   "as a number");
    check_throws_with<ConfigError>([&] { apply_key(c, "features.passthrough", "yes"); },
                                   "a boolean");
    check_throws_with<ConfigError>([&] { apply_key(c, "agent.optimizer", "rmsprop"); },
                                   "sgd/adam");
    check_throws_with<ConfigError>([&] { apply_key(c, "traffic.attackers", "1.2.3"); },
                                   "an IPv4 address");
    check_throws_with<ConfigError>([&] { apply_key(c, "experiment.seed", "-3"); },
                                   "an unsigned integer");
    check_throws_with<ConfigError>([&] { apply_key(c, "agent.replay_capacity", "0"); },
                                   "must be >= 1");
    // a parse failure leaves nothing half-applied that validate would miss
    c.validate();
}

TEST_CASE("malformed lines report their line number") {
    check_throws_with<ConfigError>(
        [] { parse_config_text("experiment.name = x\n\njust words\n"); }, "config line 3");
    check_throws_with<ConfigError>([] { parse_config_text("a.b.c = 1\n"); },
                                   "unknown config key");
}

TEST_CASE("validate rejects out-of-range and inconsistent settings") {
    check_throws_with<ConfigError>([] { parse_config_text("experiment.total_steps = 0\n"); },
                                   "experiment.total_steps must be >= 1");
    check_throws_with<ConfigError>([] { parse_config_text("traffic.source = pcap\n"); },
                                   "'pcap'");
    check_throws_with<ConfigError>([] { parse_config_text("traffic.source = csv\n"); },
                                   "traffic.csv_path is required");
    check_throws_with<ConfigError>(
        [] { parse_config_text("traffic.calibration_flows = 4\n"); },
        "traffic.calibration_flows must be >= env.window_len (8)");
    check_throws_with<ConfigError>([] { parse_config_text("env.window_len = 2\n"); },
                                   "env.window_len must be >= detector.kernel (3)");
    check_throws_with<ConfigError>([] { parse_config_text("env.threshold = 1.5\n"); },
                                   "env.threshold must lie in [0,1]");
    check_throws_with<ConfigError>(
        [] { parse_config_text("reward.lo = 5\nreward.hi = -5\n"); },
        "reward.lo must be strictly below reward.hi");
    check_throws_with<ConfigError>([] { parse_config_text("detector.val_fraction = 1\n"); },
                                   "detector.val_fraction");

    // bounds drifting apart (possible only by direct mutation) is caught too
    Config c;
    c.agent.reward_lo = -3.0;
    check_throws_with<ConfigError>([&] { c.validate(); }, "out of sync");
}

TEST_CASE("dump_config round-trips") {
    const std::string text =
        "experiment.name = roundtrip\n"
        "experiment.seed = 31\n"
        "traffic.attackers = 203.0.113.7\n"
        "traffic.malicious_fraction = 0.35\n"
        "csv.passthrough = a,b\n"
        "detector.optimizer = sgd\n"
        "reward.lo = -6\n"
        "reward.hi = 6\n"
        "agent.hidden = 24,12\n";
    const Config a = parse_config_text(text);
    const std::string dump1 = dump_config(a);
    const Config b = parse_config_text(dump1);
    CHECK(dump_config(b) == dump1);
    CHECK(b.seed == 31);
    CHECK(b.synthetic.malicious_fraction == 0.35);
    CHECK(b.agent.hidden_sizes == std::vector<int>{24, 12});
    CHECK(b.agent.reward_lo == -6.0);

    // defaults round-trip as well
    const Config d;
    CHECK(dump_config(parse_config_text(dump_config(d))) == dump_config(d));
}

TEST_CASE("config files load from disk and missing paths raise IoError") {
    const fs::path dir = temp_dir("cfg");
    const fs::path p = dir / "run.conf";
    std::ofstream(p) << "experiment.name = fromdisk\nexperiment.seed = 8\n";
    const Config c = load_config_file(p.string());
    CHECK(c.name == "fromdisk");
    CHECK(c.seed == 8);
    CHECK_THROWS_AS(load_config_file((dir / "absent.conf").string()), IoError);
    fs::remove_all(dir);
}

// ------------------------------------------------------------------ metrics

TEST_CASE("rates follow the 0/0 -> 0 convention") {
    const EvalCounts zero;
    CHECK(accuracy(zero) == 0.0);
    CHECK(precision(zero) == 0.0);
    CHECK(recall(zero) == 0.0);
    CHECK(fpr(zero) == 0.0);
    CHECK(f1(zero) == 0.0);

    EvalCounts c;
    c.tp = 49;
    c.fp = 1;
    c.tn = 49;
    c.fn = 1;
    CHECK(accuracy(c) == doctest::Approx(0.98).epsilon(1e-12));
    CHECK(precision(c) == doctest::Approx(49.0 / 50.0).epsilon(1e-12));
    CHECK(recall(c) == doctest::Approx(49.0 / 50.0).epsilon(1e-12));
    CHECK(fpr(c) == doctest::Approx(1.0 / 50.0).epsilon(1e-12));
    CHECK(f1(c) == doctest::Approx(0.98).epsilon(1e-12));

    EvalCounts skew;
    skew.fp = 1;
    skew.tn = 90;
    CHECK(fpr(skew) == doctest::Approx(1.0 / 91.0).epsilon(1e-12));
    CHECK(recall(skew) == 0.0); // no positives at all

    EvalCounts misses;
    misses.fn = 5;
    CHECK(recall(misses) == 0.0);
    CHECK(f1(misses) == 0.0);
}

TEST_CASE("percentile is the nearest-rank order statistic") {
    CHECK(percentile({}, 0.5) == 0.0);
    CHECK(percentile({42.0}, 0.0) == 42.0);
    CHECK(percentile({42.0}, 1.0) == 42.0);

    std::vector<double> v{7, 2, 9, 4, 1, 8, 3, 10, 5, 6}; // unsorted 1..10
    CHECK(percentile(v, 0.5) == 5.0);   // ceil(5.0) -> 5th smallest
    CHECK(percentile(v, 0.25) == 3.0);  // ceil(2.5) -> 3rd
    CHECK(percentile(v, 0.95) == 10.0); // ceil(9.5) -> 10th
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 1.0) == 10.0);
    CHECK(percentile(v, -0.3) == 1.0); // q clamps into [0,1]
    CHECK(percentile(v, 1.7) == 10.0);
}

TEST_CASE("auc scores perfect, inverted, and tied rankings") {
    CHECK(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == doctest::Approx(0.0));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    // one tie straddling the classes counts half
    CHECK(auc({0.9, 0.5, 0.5, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.875));

    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), UsageError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), UsageError);
    CHECK_THROWS_AS(auc({0.1, 0.2, 0.3}, {1, 0}), UsageError);
}

TEST_CASE("auc agrees with a pairwise count on tie-heavy data") {
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < 300; ++i) {
            // coarse grid forces plenty of ties
            scores.push_back(static_cast<double>(rng.uniform_int(8)) / 7.0);
            labels.push_back(rng.uniform(0.0, 1.0) < 0.4 ? 1 : 0);
            has_pos |= labels.back() == 1;
            has_neg |= labels.back() == 0;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(auc(scores, labels) ==
              doctest::Approx(pair_count_auc(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("compute_metrics aggregates confusion counts, rewards, and latency") {
    env::TrainingLog log;
    log.rows.push_back(row(1, 2.01, 1, 0, 1, 0, true, false, 100));
    log.rows.push_back(row(2, -1.0, 0, 0, 0, 0, false, false, 999)); // quiet interval
    log.rows.push_back(row(3, -5.0, 0, 1, 0, 1, true, true, 300));
    log.rows.push_back(row(4, 0.99, 1, 0, 0, 0, false, false, 200));

    const MetricsSummary m = compute_metrics(log);
    CHECK(m.counts.tp == 2);
    CHECK(m.counts.fp == 1);
    CHECK(m.counts.tn == 1);
    CHECK(m.counts.fn == 1);
    CHECK(m.counts.total() == 5);
    CHECK(m.accuracy == doctest::Approx(0.6));
    CHECK(m.cumulative_reward == doctest::Approx(-3.0));
    CHECK(m.mean_reward == doctest::Approx(-0.75));
    // the zero-flow step contributes no latency sample
    CHECK(m.latency_mean_ns == doctest::Approx(200.0));
    CHECK(m.latency_median_ns == doctest::Approx(200.0));
    CHECK(m.latency_p95_ns == doctest::Approx(300.0));
    CHECK(m.rule_updates == 2);
    CHECK(m.redundant_updates == 1);
    CHECK(m.steps == 4);

    const std::string csv = metrics_csv(m);
    CHECK(csv.rfind("metric,value\n", 0) == 0);
    CHECK(csv.find("flows,5\n") != std::string::npos);
    CHECK(csv.find("tp,2\n") != std::string::npos);
    CHECK(csv.find("accuracy,0.6\n") != std::string::npos);
    CHECK(csv.find("cumulative_reward,-3\n") != std::string::npos);
    CHECK(csv.find("mean_reward,-0.75\n") != std::string::npos);
    CHECK(csv.find("latency_median_ns,200\n") != std::string::npos);
    CHECK(csv.find("rule_updates,2\n") != std::string::npos);
    CHECK(csv.find("redundant_updates,1\n") != std::string::npos);
    CHECK(csv.find("steps,4\n") != std::string::npos);
}

TEST_CASE("reward curve carries a trailing moving average") {
    env::TrainingLog log;
    for (long i = 1; i <= 4; ++i) log.rows.push_back(row(i, static_cast<double>(i), 0, 0, 0, 0, false, false, 0));

    CHECK(reward_curve_csv(log, 2) ==
          "step,reward,moving_avg\n"
          "1,1,1\n"
          "2,2,1.5\n"
          "3,3,2.5\n"
          "4,4,3.5\n");

    CHECK(trailing_mean_reward(log, 2) == doctest::Approx(3.5));
    CHECK(trailing_mean_reward(log, 100) == doctest::Approx(2.5));
    CHECK(leading_mean_reward(log, 2) == doctest::Approx(1.5));
    CHECK(leading_mean_reward(log, 100) == doctest::Approx(2.5));
    CHECK(trailing_mean_reward(env::TrainingLog{}, 10) == 0.0);
}

// --------------------------------------------------------------- experiment

TEST_CASE("static baseline denies every source seen in a flagged window") {
    const int dim = 16;
    const auto det = flat_detector(dim); // omega == 0.5 for every window

    const char* srcs[] = {"10.0.0.5",    "1.2.3.4", "10.0.0.5", "192.168.1.7",
                          "1.2.3.4",     "8.8.8.8", "8.8.8.8",  "10.0.0.1"};
    std::vector<traffic::FlowRecord> records;
    for (const char* s : srcs) records.push_back(flow_from(s, false));

    std::vector<traffic::TrafficWindow> windows;
    for (std::size_t i = 0; i < 3; ++i) windows.push_back(zero_window(i, 4, dim));

    SUBCASE("below-omega threshold flags everything") {
        fw::RuleSet rules = static_baseline_rules(windows, records, det, 0.4, 2);
        CHECK(rules.size() == 5);
        // one exact DENY per distinct source, in ascending address order
        CHECK(fw::serialize_ruleset(rules) ==
              "ruleset v1 default=ALLOW\n"
              "1 DENY 1.2.3.4 * * * *\n"
              "2 DENY 8.8.8.8 * * * *\n"
              "3 DENY 10.0.0.1 * * * *\n"
              "4 DENY 10.0.0.5 * * * *\n"
              "5 DENY 192.168.1.7 * * * *\n");
        CHECK(rules.evaluate(flow_from("8.8.8.8", false), 0).verdict == fw::Verdict::DENY);
        CHECK(rules.evaluate(flow_from("8.8.4.4", false), 0).verdict == fw::Verdict::ALLOW);
    }

    SUBCASE("threshold at omega keeps the set empty (strictly-above rule)") {
        CHECK(static_baseline_rules(windows, records, det, 0.5, 2).size() == 0);
    }

    SUBCASE("only members of flagged windows appear") {
        // window 1 alone covers records [2, 6)
        std::vector<traffic::TrafficWindow> one{zero_window(1, 4, dim)};
        fw::RuleSet rules = static_baseline_rules(one, records, det, 0.4, 2);
        CHECK(rules.size() == 4); // records 2..5: 10.0.0.5, 192.168.1.7, 1.2.3.4, 8.8.8.8
        CHECK(rules.evaluate(flow_from("192.168.1.7", false), 0).verdict ==
              fw::Verdict::DENY);
        CHECK(rules.evaluate(flow_from("10.0.0.1", false), 0).verdict ==
              fw::Verdict::ALLOW);
    }

    SUBCASE("guardrails") {
        CHECK_THROWS_AS(static_baseline_rules(windows, records, det, 0.4, 0), UsageError);
        std::vector<traffic::TrafficWindow> oob{zero_window(7, 4, dim)};
        CHECK_THROWS_AS(static_baseline_rules(oob, records, det, 0.4, 2), UsageError);
    }
}

TEST_CASE("replay_ruleset scores a flow list against fixed rules") {
    fw::RuleSet rules(fw::Verdict::ALLOW);
    fw::Rule r;
    r.id = 1;
    r.src_match = fw::AddrPred::exact(traffic::parse_ipv4("10.0.0.5"));
    r.verdict = fw::Verdict::DENY;
    rules.insert_rule(r, 0);

    const std::vector<traffic::FlowRecord> flows{
        flow_from("10.0.0.5", true),  // denied malicious -> tp
        flow_from("10.0.0.5", false), // denied benign    -> fp
        flow_from("10.0.0.6", true),  // allowed malicious-> fn
        flow_from("10.0.0.6", false), // allowed benign   -> tn
    };
    const EvalCounts c = replay_ruleset(rules, flows);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);

    const EvalCounts open = replay_ruleset(fw::RuleSet(fw::Verdict::ALLOW), flows);
    CHECK(open.tp == 0);
    CHECK(open.fn == 2);
    CHECK(open.tn == 2);
}

TEST_CASE("write_text_file round-trips and raises IoError on bad paths") {
    const fs::path dir = temp_dir("io");
    const fs::path p = dir / "note.txt";
    write_text_file(p.string(), "alpha\nbeta\n");
    std::ifstream in(p);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(content == "alpha\nbeta\n");
    CHECK_THROWS_AS(write_text_file((dir / "no_such" / "deep" / "x.txt").string(), "y"),
                    IoError);
    fs::remove_all(dir);
}

TEST_CASE("prepare_world calibrates, fits, and trains the detector") {
    const Config cfg = tiny_config();
    const PreparedWorld world = prepare_world(cfg);

    CHECK(world.calibration_records.size() == 240);
    // strided windows over the calibration slice
    CHECK(world.calibration_windows.size() == (240 - 8) / 2 + 1);
    for (const auto& w : world.calibration_windows) {
        REQUIRE(w.features.size() == 8);
        REQUIRE(w.features[0].values.size() == 16);
    }
    CHECK(world.replay_records.empty()); // synthetic source keeps no replay list

    // normalizer maps calibration features into the unit box
    for (const auto& w : world.calibration_windows)
        for (const auto& f : w.features)
            for (double v : f.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }

    CHECK(world.detector_report.epochs.size() == 2);
    CHECK(world.detector_auc >= 0.0);
    CHECK(world.detector_auc <= 1.0);

    // same config, same world
    const PreparedWorld again = prepare_world(cfg);
    CHECK(again.detector_auc == world.detector_auc);
    CHECK(again.calibration_records.size() == world.calibration_records.size());
}

TEST_CASE("run_experiment writes the full artifact set") {
    const Config cfg = tiny_config();
    const fs::path out = temp_dir("run");
    const ExperimentResult res = run_experiment(cfg, out.string());

    CHECK(res.log.rows.size() == 40);
    CHECK(res.train_metrics.steps == 40);
    CHECK(res.log.snapshots.size() == 2); // eval_every = 20 over 40 steps
    CHECK(res.final_eval.steps >= 1);
    CHECK(res.final_eval.steps <= 6);
    CHECK(res.detector_auc >= 0.0);
    CHECK(res.ruleset_text.rfind("ruleset v1 default=ALLOW", 0) == 0);

    const char* expected[] = {
        "config.txt",    "metrics.csv", "train_log.csv", "reward_curve.csv",
        "detector_report.csv", "eval.csv", "ruleset.txt", "summary.txt",
    };
    for (const char* name : expected) {
        const fs::path p = out / name;
        CHECK_MESSAGE(fs::exists(p), "missing artifact " << name);
        CHECK(fs::file_size(p) > 0);
    }
    CHECK(fs::exists(out / "checkpoints" / "agent.ckpt"));
    CHECK(fs::exists(out / "checkpoints" / "detector.ckpt"));
    CHECK(res.files.size() == 10);

    // config.txt holds the resolved configuration
    std::ifstream in(out / "config.txt");
    std::string stored((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
    CHECK(stored == dump_config(cfg));

    // ruleset.txt mirrors the in-memory final ruleset
    std::ifstream rin(out / "ruleset.txt");
    std::string rules((std::istreambuf_iterator<char>(rin)),
                      std::istreambuf_iterator<char>());
    CHECK(rules == res.ruleset_text);

    fs::remove_all(out);
}

TEST_CASE("compare_baseline judges both arms on the same flow slice") {
    Config cfg = tiny_config();
    cfg.eval_steps = 8;
    const fs::path out = temp_dir("cmp");
    const CompareResult res = compare_baseline(cfg, out.string());

    // the static arm replays exactly the flows the adaptive arm judged
    CHECK(res.adaptive.total() == res.baseline.total());
    CHECK(res.adaptive.total() > 0);
    CHECK(res.adaptive_fpr == doctest::Approx(fpr(res.adaptive)));
    CHECK(res.baseline_fpr == doctest::Approx(fpr(res.baseline)));
    CHECK(res.adaptive_recall == doctest::Approx(recall(res.adaptive)));
    CHECK(res.baseline_recall == doctest::Approx(recall(res.baseline)));

    const std::string csv = compare_csv(res);
    CHECK(csv.rfind("arm,tp,fp,tn,fn,recall,fpr,rules\n", 0) == 0);
    CHECK(csv.find("\nadaptive,") != std::string::npos);
    CHECK(csv.find("\nbaseline,") != std::string::npos);

    REQUIRE(res.files.size() == 1);
    CHECK(fs::exists(res.files[0]));
    std::ifstream in(res.files[0]);
    std::string stored((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
    CHECK(stored == csv);
    fs::remove_all(out);
}
