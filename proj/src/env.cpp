#include "adfrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "adfrl/errors.hpp"

namespace adfrl::env {

ActionCatalog default_catalog() {
    return {ActionKind::NOOP,          ActionKind::DENY_SRC,      ActionKind::DENY_SRC_DPORT,
            ActionKind::WIDEN_TOP,     ActionKind::REMOVE_OLDEST, ActionKind::REMOVE_COLDEST,
            ActionKind::PROMOTE_HOT};
}

const char* action_name(ActionKind kind) {
    switch (kind) {
    case ActionKind::NOOP: return "NOOP";
    case ActionKind::DENY_SRC: return "DENY_SRC";
    case ActionKind::DENY_SRC_DPORT: return "DENY_SRC_DPORT";
    case ActionKind::WIDEN_TOP: return "WIDEN_TOP";
    case ActionKind::REMOVE_OLDEST: return "REMOVE_OLDEST";
    case ActionKind::REMOVE_COLDEST: return "REMOVE_COLDEST";
    case ActionKind::PROMOTE_HOT: return "PROMOTE_HOT";
    }
    return "?";
}

std::optional<ActionKind> action_from_name(const std::string& name) {
    for (ActionKind k : default_catalog())
        if (name == action_name(k)) return k;
    return std::nullopt;
}

bool is_deny_action(ActionKind kind) {
    return kind == ActionKind::DENY_SRC || kind == ActionKind::DENY_SRC_DPORT ||
           kind == ActionKind::WIDEN_TOP;
}

double reward(long tp, long fp, long tn, long fn, bool infeasible, bool redundant,
              double omega_mean, bool deny_action, const RewardWeights& w, double lo, double hi) {
    double r = w.w_tp * static_cast<double>(tp) - w.w_fp * static_cast<double>(fp) -
               w.w_fn * static_cast<double>(fn) + w.w_tn * static_cast<double>(tn);
    if (infeasible) r -= w.p_infeasible;
    if (redundant) r -= w.p_redundant;
    r += w.shaping * (omega_mean - 0.5) * (deny_action ? 1.0 : -1.0);
    return std::clamp(r, lo, hi);
}

// ---------------------------------------------------------------- rolling

void RollingStats::push(long flows, long denied, double omega) {
    intervals.push_back({flows, denied, omega});
    while (static_cast<int>(intervals.size()) > horizon) intervals.pop_front();
}

double RollingStats::deny_rate() const {
    long flows = 0, denied = 0;
    for (const auto& iv : intervals) {
        flows += iv.flows;
        denied += iv.denied;
    }
    return flows > 0 ? static_cast<double>(denied) / static_cast<double>(flows) : 0.0;
}

double RollingStats::fp_estimate(double threshold) const {
    long denied = 0, quiet_denied = 0;
    for (const auto& iv : intervals) {
        denied += iv.denied;
        if (iv.omega <= threshold) quiet_denied += iv.denied;
    }
    return denied > 0 ? static_cast<double>(quiet_denied) / static_cast<double>(denied) : 0.0;
}

double RollingStats::flagged_fraction(double threshold) const {
    if (intervals.empty()) return 0.0;
    long flagged = 0;
    for (const auto& iv : intervals)
        if (iv.omega > threshold) ++flagged;
    return static_cast<double>(flagged) / static_cast<double>(intervals.size());
}

double RollingStats::mean_omega() const {
    if (intervals.empty()) return 0.5;
    double sum = 0.0;
    for (const auto& iv : intervals) sum += iv.omega;
    return sum / static_cast<double>(intervals.size());
}

// ---------------------------------------------------------------- state

agent::State EnvState::flatten() const {
    agent::State out;
    out.reserve(window_aggregates.size() + omega_stats.size() + firewall_summary.size());
    out.insert(out.end(), window_aggregates.begin(), window_aggregates.end());
    out.insert(out.end(), omega_stats.begin(), omega_stats.end());
    out.insert(out.end(), firewall_summary.begin(), firewall_summary.end());
    return out;
}

EnvState build_state(const std::vector<nn::Vec>& window_features, double current_omega,
                     const RollingStats& rolling, const fw::RuleSet& ruleset,
                     const EnvConfig& cfg) {
    if (window_features.empty()) throw UsageError("build_state: empty window");
    const std::size_t d = window_features.front().size();
    for (const auto& row : window_features)
        if (row.size() != d) throw ShapeError("build_state: ragged window rows");

    EnvState st;
    st.window_aggregates.assign(2 * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0, mx = window_features[0][j];
        for (const auto& row : window_features) {
            sum += row[j];
            mx = std::max(mx, row[j]);
        }
        st.window_aggregates[j] = sum / static_cast<double>(window_features.size());
        st.window_aggregates[d + j] = mx;
    }
    st.omega_stats = {current_omega, rolling.mean_omega(),
                      rolling.flagged_fraction(cfg.anomaly_threshold)};
    double fill = cfg.rule_cap > 0
                      ? static_cast<double>(ruleset.size()) / static_cast<double>(cfg.rule_cap)
                      : 0.0;
    st.firewall_summary = {std::min(1.0, fill), rolling.deny_rate(),
                           rolling.fp_estimate(cfg.anomaly_threshold)};
    return st;
}

// ---------------------------------------------------------------- decoding

namespace {

// Index of the window flow with the highest anomaly score (first on ties).
std::size_t hottest_flow(const DecodeContext& ctx) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ctx.flow_omegas.size(); ++i)
        if (ctx.flow_omegas[i] > ctx.flow_omegas[best]) best = i;
    return best;
}

// Most recently created deny rule; ties break to the higher id.
const fw::Rule* newest_deny(const fw::RuleSet& rs) {
    const fw::Rule* best = nullptr;
    for (const auto& r : rs.rules()) {
        if (r.verdict != fw::Verdict::DENY) continue;
        if (!best || r.created_step > best->created_step ||
            (r.created_step == best->created_step && r.id > best->id))
            best = &r;
    }
    return best;
}

const fw::Rule* oldest_deny(const fw::RuleSet& rs) {
    const fw::Rule* best = nullptr;
    for (const auto& r : rs.rules()) {
        if (r.verdict != fw::Verdict::DENY) continue;
        if (!best || r.created_step < best->created_step ||
            (r.created_step == best->created_step && r.id < best->id))
            best = &r;
    }
    return best;
}

// Least recently matched deny rule; never-matched rules rank coldest,
// among those the oldest wins.
const fw::Rule* coldest_deny(const fw::RuleSet& rs) {
    const fw::Rule* best = nullptr;
    auto colder = [](const fw::Rule& a, const fw::Rule& b) {
        if (!a.last_match_step && b.last_match_step) return true;
        if (a.last_match_step && !b.last_match_step) return false;
        if (!a.last_match_step && !b.last_match_step) return a.created_step < b.created_step;
        return *a.last_match_step < *b.last_match_step;
    };
    for (const auto& r : rs.rules()) {
        if (r.verdict != fw::Verdict::DENY) continue;
        if (!best || colder(r, *best)) best = &r;
    }
    return best;
}

// Most frequently matched rule of any verdict; ties keep list order.
const fw::Rule* hottest_rule(const fw::RuleSet& rs) {
    const fw::Rule* best = nullptr;
    for (const auto& r : rs.rules()) {
        if (r.match_count == 0) continue;
        if (!best || r.match_count > best->match_count) best = &r;
    }
    return best;
}

DecodeResult infeasible_result(bool deny) {
    DecodeResult res;
    res.delta = fw::RuleDelta::noop();
    res.infeasible = true;
    res.deny_action = deny;
    return res;
}

} // namespace

DecodeResult decode_action(ActionKind kind, const DecodeContext& ctx) {
    if (!ctx.ruleset) throw UsageError("decode_action: null ruleset in context");
    if (ctx.window_flows.size() != ctx.flow_omegas.size())
        throw UsageError("decode_action: window flows and omegas disagree");
    const fw::RuleSet& rs = *ctx.ruleset;
    const bool deny = is_deny_action(kind);

    switch (kind) {
    case ActionKind::NOOP:
        return {fw::RuleDelta::noop(), false, false};

    case ActionKind::DENY_SRC:
    case ActionKind::DENY_SRC_DPORT: {
        if (ctx.window_flows.empty()) return infeasible_result(deny);
        const traffic::FlowRecord& rec = ctx.window_flows[hottest_flow(ctx)];
        fw::Rule r;
        r.id = ctx.next_rule_id;
        r.src_match = fw::AddrPred::exact(rec.src_addr);
        if (kind == ActionKind::DENY_SRC_DPORT)
            r.dst_port_match = fw::PortPred::single(rec.dst_port);
        r.verdict = fw::Verdict::DENY;
        r.created_step = ctx.step;
        return {fw::RuleDelta::insert(r, 0), false, deny};
    }

    case ActionKind::WIDEN_TOP: {
        const fw::Rule* target = newest_deny(rs);
        // Only an exact source can widen to /24; broader rules stay put.
        if (!target || target->src_match.kind != fw::AddrPred::Kind::EXACT)
            return infeasible_result(deny);
        fw::Rule repl = *target;
        repl.src_match = fw::AddrPred::prefix(target->src_match.addr & 0xFFFFFF00u, 24);
        return {fw::RuleDelta::update(target->id, repl), false, deny};
    }

    case ActionKind::REMOVE_OLDEST: {
        const fw::Rule* target = oldest_deny(rs);
        if (!target) return infeasible_result(deny);
        return {fw::RuleDelta::remove(target->id), false, deny};
    }

    case ActionKind::REMOVE_COLDEST: {
        const fw::Rule* target = coldest_deny(rs);
        if (!target) return infeasible_result(deny);
        return {fw::RuleDelta::remove(target->id), false, deny};
    }

    case ActionKind::PROMOTE_HOT: {
        const fw::Rule* target = hottest_rule(rs);
        if (!target) return infeasible_result(deny);
        return {fw::RuleDelta::reorder(target->id, 0), false, deny};
    }
    }
    throw UsageError("decode_action: unknown action kind");
}

// ---------------------------------------------------------------- sources

SyntheticSource::SyntheticSource(traffic::SyntheticConfig config, std::uint64_t base_seed)
    : cfg_(std::move(config)), base_seed_(base_seed) {
    cfg_.validate();
}

std::optional<traffic::FlowRecord> SyntheticSource::next() {
    if (!gen_) gen_.emplace(cfg_, base_seed_);
    return gen_->next(); // unbounded
}

void SyntheticSource::reset(std::uint64_t episode) {
    gen_.emplace(cfg_, derive_seed(base_seed_, episode));
}

VectorSource::VectorSource(std::vector<traffic::FlowRecord> records)
    : records_(std::move(records)) {}

std::optional<traffic::FlowRecord> VectorSource::next() {
    if (pos_ >= records_.size()) return std::nullopt;
    return records_[pos_++];
}

void VectorSource::reset(std::uint64_t) { pos_ = 0; }

// ---------------------------------------------------------------- env

Environment::Environment(EnvConfig cfg, const detector::DetectorModel* det,
                         traffic::FeaturePipeline pipeline, std::unique_ptr<FlowSource> source)
    : cfg_(std::move(cfg)), detector_(det), pipeline_(std::move(pipeline)),
      source_(std::move(source)) {
    if (!detector_) throw UsageError("Environment: detector must not be null");
    if (!source_) throw UsageError("Environment: flow source must not be null");
    if (cfg_.window_len < 1) throw ConfigError("window_len must be >= 1");
    if (cfg_.interval_sec <= 0.0) throw ConfigError("interval_sec must be positive");
    if (cfg_.catalog.empty()) throw ConfigError("action catalog must not be empty");
    if (detector_->hyper().input_dim != pipeline_.dim())
        throw ShapeError("detector input dim does not match feature pipeline");
    rolling_.horizon = cfg_.history_horizon;
}

int Environment::state_dim() const { return 2 * pipeline_.dim() + 6; }

double Environment::per_flow_omega(const traffic::FeatureVector& fv) const {
    // Score the flow in isolation by repeating it across a full window.
    std::vector<nn::Vec> values(static_cast<std::size_t>(cfg_.window_len), fv.values);
    return detector_->score_values(values);
}

double Environment::score_window() const {
    if (window_.empty()) return 0.5;
    std::vector<nn::Vec> values;
    values.reserve(window_.size());
    for (const auto& e : window_) values.push_back(e.fv.values);
    return detector_->score_values(values);
}

double Environment::window_flow_omega_mean() const {
    if (window_.empty()) return 0.5;
    double sum = 0.0;
    for (const auto& e : window_) sum += e.flow_omega;
    return sum / static_cast<double>(window_.size());
}

void Environment::ingest(const traffic::FlowRecord& rec) {
    WindowEntry e;
    e.fv = pipeline_.extract(rec);
    e.flow_omega = per_flow_omega(e.fv);
    e.rec = rec;
    window_.push_back(std::move(e));
    while (static_cast<int>(window_.size()) > cfg_.window_len) window_.pop_front();
}

EnvState Environment::observe() const {
    std::vector<nn::Vec> values;
    values.reserve(window_.size());
    for (const auto& e : window_) values.push_back(e.fv.values);
    EnvState st = build_state(values, current_omega_, rolling_, rules_, cfg_);
    st.step_index = step_index_;
    return st;
}

EnvState Environment::reset(std::uint64_t episode) {
    rules_ = fw::RuleSet(fw::Verdict::ALLOW);
    next_rule_id_ = 1;
    window_.clear();
    rolling_ = RollingStats{};
    rolling_.horizon = cfg_.history_horizon;
    step_index_ = 0;
    pending_.reset();
    pipeline_.reset_history();
    source_->reset(episode);

    // Prime one full window; these flows are observed, not judged.
    for (int i = 0; i < cfg_.window_len; ++i) {
        std::optional<traffic::FlowRecord> rec = source_->next();
        if (!rec) throw UsageError("flow source exhausted while priming the first window");
        ingest(*rec);
        ++preamble_flows_;
    }
    current_omega_ = score_window();
    interval_end_ = window_.back().rec.timestamp + cfg_.interval_sec;
    return observe();
}

namespace {

bool delta_introduced_redundancy(const fw::RuleSet& next, const fw::RuleDelta& delta) {
    int touched = -1;
    switch (delta.kind) {
    case fw::RuleDelta::Kind::INSERT: touched = delta.rule->id; break;
    case fw::RuleDelta::Kind::UPDATE:
    case fw::RuleDelta::Kind::REORDER: touched = delta.target_id; break;
    default: return false; // REMOVE / NOOP cannot introduce redundancy
    }
    for (const auto& f : fw::redundancy_scan(next))
        if (f.rule_id == touched || f.earlier_rule_id == touched) return true;
    return false;
}

} // namespace

Environment::StepResult Environment::step(int action_index) {
    if (window_.empty()) throw StateError("Environment::step before reset");
    if (action_index < 0 || action_index >= action_count())
        throw UsageError("action index out of range");
    const ActionKind kind = cfg_.catalog[static_cast<std::size_t>(action_index)];
    const double omega_seen = current_omega_; // score of the state acted upon

    DecodeContext ctx;
    ctx.window_flows.reserve(window_.size());
    ctx.flow_omegas.reserve(window_.size());
    for (const auto& e : window_) {
        ctx.window_flows.push_back(e.rec);
        ctx.flow_omegas.push_back(e.flow_omega);
    }
    ctx.ruleset = &rules_;
    ctx.next_rule_id = next_rule_id_;
    ctx.step = step_index_;

    DecodeResult dec = decode_action(kind, ctx);
    bool redundant = false;
    if (!dec.infeasible && dec.delta.kind != fw::RuleDelta::Kind::NOOP) {
        fw::RuleSet next = fw::apply_delta(rules_, dec.delta);
        redundant = delta_introduced_redundancy(next, dec.delta);
        rules_ = std::move(next);
        if (dec.delta.kind == fw::RuleDelta::Kind::INSERT)
            next_rule_id_ = std::max(next_rule_id_, dec.delta.rule->id + 1);
    }

    // Judge every flow arriving before the interval boundary.
    long tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t lat_sum = 0;
    long lat_count = 0;
    bool exhausted = false;
    while (true) {
        std::optional<traffic::FlowRecord> rec;
        if (pending_) {
            rec = std::move(pending_);
            pending_.reset();
        } else {
            rec = source_->next();
        }
        if (!rec) {
            exhausted = true;
            break;
        }
        if (rec->timestamp >= interval_end_) {
            pending_ = std::move(rec);
            break;
        }
        fw::TimedMatchResult timed = rules_.timed_evaluate(*rec, step_index_);
        lat_sum += timed.elapsed_ns;
        ++lat_count;
        const bool denied = timed.result.verdict == fw::Verdict::DENY;
        const bool malicious = rec->label == traffic::Label::MALICIOUS;
        if (denied && malicious) ++tp;
        else if (denied && !malicious) ++fp;
        else if (!denied && malicious) ++fn;
        else ++tn;
        ++flows_processed_;
        ingest(*rec);
    }

    current_omega_ = score_window();
    rolling_.push(tp + fp + tn + fn, tp + fp, current_omega_);
    interval_end_ += cfg_.interval_sec;
    ++step_index_;

    StepResult out;
    out.outcome.reward = reward(tp, fp, tn, fn, dec.infeasible, redundant, omega_seen,
                                dec.deny_action, cfg_.weights, cfg_.reward_lo, cfg_.reward_hi);
    out.outcome.tp = tp;
    out.outcome.fp = fp;
    out.outcome.tn = tn;
    out.outcome.fn = fn;
    out.outcome.delta_applied = dec.delta;
    out.outcome.delta_was_redundant = redundant;
    out.outcome.decode_infeasible = dec.infeasible;
    out.outcome.decision_latency_ns =
        lat_count > 0 ? lat_sum / static_cast<std::uint64_t>(lat_count) : 0;
    out.state = observe();
    out.episode_end = exhausted;
    return out;
}

// ---------------------------------------------------------------- training

std::string training_log_csv(const TrainingLog& log) {
    std::string out = "step,epsilon,reward,loss,tp,fp,tn,fn,rule_count,redundant,latency_ns\n";
    char buf[256];
    for (const auto& r : log.rows) {
        char loss[40] = "";
        if (r.loss) std::snprintf(loss, sizeof(loss), "%.9g", *r.loss);
        std::snprintf(buf, sizeof(buf), "%ld,%.6g,%.9g,%s,%ld,%ld,%ld,%ld,%d,%d,%llu\n", r.step,
                      r.epsilon, r.reward, loss, r.tp, r.fp, r.tn, r.fn, r.rule_count,
                      r.redundant ? 1 : 0, static_cast<unsigned long long>(r.latency_ns));
        out += buf;
    }
    return out;
}

TrainingLog run_training(Environment& env, agent::DqnAgent& agent, const RunSettings& run) {
    if (run.total_steps <= 0) throw UsageError("run_training: total_steps must be positive");
    if (env.state_dim() != agent.net().state_dim())
        throw ShapeError("environment state dim does not match agent network");
    if (env.action_count() != agent.net().action_count())
        throw ShapeError("environment action count does not match agent network");

    TrainingLog log;
    const agent::AgentConfig& ac = agent.config();
    std::uint64_t episode = 0;
    agent::State state = env.reset(episode).flatten();

    for (long step = 0; step < run.total_steps; ++step) {
        const long denom = std::max<long>(1, run.total_steps - 1);
        agent.set_beta(ac.beta_start + (ac.beta_end - ac.beta_start) *
                                           std::min(1.0, static_cast<double>(step) /
                                                             static_cast<double>(denom)));

        agent::ActionChoice choice = agent.act(state, step);
        Environment::StepResult sr = env.step(choice.action);
        agent::State next = sr.state.flatten();
        agent.observe(state, choice.action, sr.outcome.reward, next);
        std::optional<double> loss = agent.learn();

        const long global = step + 1;
        if (global % ac.target_update_every == 0) {
            agent.sync_target();
            log.sync_steps.push_back(global);
        }

        TrainingLog::Row row;
        row.step = global;
        row.epsilon = choice.epsilon;
        row.reward = sr.outcome.reward;
        row.loss = loss;
        row.tp = sr.outcome.tp;
        row.fp = sr.outcome.fp;
        row.tn = sr.outcome.tn;
        row.fn = sr.outcome.fn;
        row.rule_count = static_cast<int>(env.ruleset().size());
        row.redundant = sr.outcome.delta_was_redundant;
        row.latency_ns = sr.outcome.decision_latency_ns;
        row.mutated = sr.outcome.delta_applied.kind != fw::RuleDelta::Kind::NOOP;
        log.rows.push_back(row);

        if (run.eval_every > 0 && run.eval_hook && global % run.eval_every == 0)
            log.snapshots.push_back(run.eval_hook(global, agent));

        if (sr.episode_end) {
            ++episode;
            state = env.reset(episode).flatten();
        } else {
            state = std::move(next);
        }
    }
    log.preamble_flows = env.preamble_flows();
    log.episodes = static_cast<long>(episode) + 1;
    return log;
}

} // namespace adfrl::env
