#ifndef ADFRL_ENV_HPP
#define ADFRL_ENV_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adfrl/agent.hpp"
#include "adfrl/detector.hpp"
#include "adfrl/firewall.hpp"
#include "adfrl/traffic.hpp"

namespace adfrl::env {

// Discrete action templates. Indices into the catalog are the agent's
// action space; every template decodes to a concrete RuleDelta against the
// current context, or to NOOP with an infeasible flag when its target does
// not exist.
enum class ActionKind : std::uint8_t {
    NOOP,
    DENY_SRC,        // deny the source of the highest-omega flow in the window
    DENY_SRC_DPORT,  // deny that source + destination-port pair
    WIDEN_TOP,       // widen the most recent deny rule's source to a /24
    REMOVE_OLDEST,   // remove the oldest deny rule
    REMOVE_COLDEST,  // remove the least-recently-matched deny rule
    PROMOTE_HOT,     // move the most-frequently-matched rule to the front
};

using ActionCatalog = std::vector<ActionKind>;

ActionCatalog default_catalog();
const char* action_name(ActionKind kind);
std::optional<ActionKind> action_from_name(const std::string& name);
bool is_deny_action(ActionKind kind);

struct RewardWeights {
    double w_tp = 2.0;
    double w_fp = 3.0;
    double w_fn = 2.0;
    double w_tn = 0.01;
    double p_infeasible = 1.0;
    double p_redundant = 1.0;
    double shaping = 0.5;
};

struct EnvConfig {
    double interval_sec = 1.0; // simulated seconds per action
    int window_len = 8;        // W
    double anomaly_threshold = 0.7;
    RewardWeights weights;
    double reward_lo = -10.0;
    double reward_hi = 10.0;
    int rule_cap = 64;        // normalization constant for the state block
    int history_horizon = 50; // intervals kept for rolling summaries
    ActionCatalog catalog = default_catalog();
};

// r = w_tp*tp - w_fp*fp - w_fn*fn + w_tn*tn - p_inf*[infeasible]
//     - p_red*[redundant] + shaping*(omega_mean - 0.5)*(deny ? +1 : -1),
// clamped into [lo, hi].
double reward(long tp, long fp, long tn, long fn, bool infeasible, bool redundant,
              double omega_mean, bool deny_action, const RewardWeights& w, double lo, double hi);

// Rolling per-interval summaries backing the state's firewall block.
struct RollingStats {
    struct Interval {
        long flows = 0;
        long denied = 0;
        double omega = 0.5;
    };
    int horizon = 50;
    std::deque<Interval> intervals;

    void push(long flows, long denied, double omega);
    double deny_rate() const;
    // Label-free false-positive proxy: denials issued inside intervals the
    // detector scored at or below the threshold.
    double fp_estimate(double threshold) const;
    double flagged_fraction(double threshold) const;
    double mean_omega() const;
};

// Observation blocks; flatten() is what the agent consumes
// (length 2*D + 6).
struct EnvState {
    std::vector<double> window_aggregates; // per-dim means then maxima
    std::vector<double> omega_stats;       // current, rolling mean, flagged fraction
    std::vector<double> firewall_summary;  // rule count / cap, deny rate, fp estimate
    long step_index = 0;

    agent::State flatten() const;
};

EnvState build_state(const std::vector<nn::Vec>& window_features, double current_omega,
                     const RollingStats& rolling, const fw::RuleSet& ruleset,
                     const EnvConfig& cfg);

struct StepOutcome {
    double reward = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    fw::RuleDelta delta_applied;
    bool delta_was_redundant = false;
    bool decode_infeasible = false;
    std::uint64_t decision_latency_ns = 0; // mean per-flow evaluation time
};

// Everything decode_action may inspect: the flows of the current window with
// their per-flow anomaly scores, plus the live rule set.
struct DecodeContext {
    std::vector<traffic::FlowRecord> window_flows;
    std::vector<double> flow_omegas; // same length as window_flows
    const fw::RuleSet* ruleset = nullptr;
    int next_rule_id = 1;
    long step = 0;
};

struct DecodeResult {
    fw::RuleDelta delta;
    bool infeasible = false;
    bool deny_action = false;
};

DecodeResult decode_action(ActionKind kind, const DecodeContext& ctx);

// Resettable flow stream; episodes are indexed so that a fresh pass over
// the traffic is reproducible.
class FlowSource {
public:
    virtual ~FlowSource() = default;
    virtual std::optional<traffic::FlowRecord> next() = 0;
    virtual void reset(std::uint64_t episode) = 0;
};

class SyntheticSource final : public FlowSource {
public:
    SyntheticSource(traffic::SyntheticConfig config, std::uint64_t base_seed);
    std::optional<traffic::FlowRecord> next() override;
    void reset(std::uint64_t episode) override;

private:
    traffic::SyntheticConfig cfg_;
    std::uint64_t base_seed_;
    std::optional<traffic::SyntheticTraffic> gen_;
};

// Replays a fixed record vector; reset rewinds regardless of episode.
class VectorSource final : public FlowSource {
public:
    explicit VectorSource(std::vector<traffic::FlowRecord> records);
    std::optional<traffic::FlowRecord> next() override;
    void reset(std::uint64_t episode) override;

private:
    std::vector<traffic::FlowRecord> records_;
    std::size_t pos_ = 0;
};

// The simulated firewall environment: detector scores drive the state, the
// chosen action mutates the rule set, and arriving flows in the next
// simulated interval are judged against ground truth for the reward.
class Environment {
public:
    Environment(EnvConfig cfg, const detector::DetectorModel* det,
                traffic::FeaturePipeline pipeline, std::unique_ptr<FlowSource> source);

    // Starts an episode with an empty rule set and primes the first window.
    // Throws UsageError if the source cannot fill one window.
    EnvState reset(std::uint64_t episode = 0);

    struct StepResult {
        EnvState state;
        StepOutcome outcome;
        bool episode_end = false;
    };
    StepResult step(int action_index);

    const fw::RuleSet& ruleset() const { return rules_; }
    const EnvConfig& config() const { return cfg_; }
    int state_dim() const;
    int action_count() const { return static_cast<int>(cfg_.catalog.size()); }
    long flows_processed() const { return flows_processed_; }
    long preamble_flows() const { return preamble_flows_; }

private:
    struct WindowEntry {
        traffic::FeatureVector fv;
        traffic::FlowRecord rec;
        double flow_omega = 0.5;
    };

    double score_window() const;
    double window_flow_omega_mean() const;
    double per_flow_omega(const traffic::FeatureVector& fv) const;
    EnvState observe() const;
    void ingest(const traffic::FlowRecord& rec);

    EnvConfig cfg_;
    const detector::DetectorModel* detector_;
    traffic::FeaturePipeline pipeline_;
    std::unique_ptr<FlowSource> source_;

    fw::RuleSet rules_;
    std::deque<WindowEntry> window_;
    RollingStats rolling_;
    double current_omega_ = 0.5;
    double interval_end_ = 0.0;
    long step_index_ = 0;
    int next_rule_id_ = 1;
    long flows_processed_ = 0;
    long preamble_flows_ = 0;
    std::optional<traffic::FlowRecord> pending_;
};

// ---------------------------------------------------------------- training

struct TrainingLog {
    struct Row {
        long step = 0;
        double epsilon = 0.0;
        double reward = 0.0;
        std::optional<double> loss; // empty until the replay buffer is ready
        long tp = 0, fp = 0, tn = 0, fn = 0;
        int rule_count = 0;
        bool redundant = false;
        std::uint64_t latency_ns = 0;
        bool mutated = false; // applied delta was not a NOOP (not serialized)
    };
    struct Snapshot {
        long step = 0;
        double block_rate = 0.0;
        double fpr = 0.0;
    };

    std::vector<Row> rows;
    std::vector<long> sync_steps;
    std::vector<Snapshot> snapshots;
    long preamble_flows = 0;
    long episodes = 1;
};

std::string training_log_csv(const TrainingLog& log);

struct RunSettings {
    long total_steps = 5000;
    long eval_every = 0; // 0 disables periodic snapshots
    std::function<TrainingLog::Snapshot(long step, agent::DqnAgent& agent)> eval_hook;
};

// The closed loop: observe, select epsilon-greedily, apply the decoded rule
// delta, collect the shaped reward, store the transition, learn from a
// prioritized sample once the buffer is ready, and sync the target network
// on its fixed cadence. Fully deterministic for fixed seeds.
TrainingLog run_training(Environment& env, agent::DqnAgent& agent, const RunSettings& run);

} // namespace adfrl::env

#endif
