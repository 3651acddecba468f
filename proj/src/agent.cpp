#include "adfrl/agent.hpp"

#include <algorithm>
#include <cmath>

#include "adfrl/errors.hpp"

namespace adfrl::agent {

void AgentConfig::validate() const {
    if (gamma <= 0.0 || gamma >= 1.0)
        throw ConfigError("agent: gamma must lie in (0,1), got " + std::to_string(gamma));
    if (eta <= 0.0) throw ConfigError("agent: eta must be positive");
    if (batch_size < 1) throw ConfigError("agent: batch_size must be >= 1");
    if (target_update_every < 1) throw ConfigError("agent: target_update_every must be >= 1");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
        throw ConfigError("agent: epsilon bounds must lie in [0,1]");
    if (epsilon_end > epsilon_start)
        throw ConfigError("agent: epsilon_end must not exceed epsilon_start");
    if (epsilon_decay_steps < 1) throw ConfigError("agent: epsilon_decay_steps must be >= 1");
    if (replay_capacity < 1) throw ConfigError("agent: replay_capacity must be >= 1");
    if (priority_exponent < 0.0) throw ConfigError("agent: priority_exponent must be >= 0");
    if (beta_start < 0.0 || beta_start > 1.0 || beta_end < 0.0 || beta_end > 1.0)
        throw ConfigError("agent: beta exponents must lie in [0,1]");
    if (reward_lo > reward_hi) throw ConfigError("agent: reward bounds inverted");
}

double epsilon_at(long step, const AgentConfig& config) {
    if (step >= config.epsilon_decay_steps) return config.epsilon_end;
    const double frac = static_cast<double>(step) / static_cast<double>(config.epsilon_decay_steps);
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

// ---------------------------------------------------------------- QNetwork

QNetwork::QNetwork(int state_dim, int action_count, const std::vector<int>& hidden,
                   std::uint64_t seed, bool bias)
    : online_(state_dim, hidden, action_count, "q.online", bias),
      target_(state_dim, hidden, action_count, "q.target", bias) {
    Rng rng(seed);
    online_.init_uniform(rng);
    sync_target();
}

nn::Vec QNetwork::q_values(const State& state, WhichNet which) const {
    return which == WhichNet::ONLINE ? online_.forward(state) : target_.forward(state);
}

void QNetwork::sync_target() {
    auto src = online_.params();
    auto dst = target_.params();
    for (std::size_t i = 0; i < src.size(); ++i)
        std::copy(src[i].value.begin(), src[i].value.end(), dst[i].value.begin());
}

nn::Vec q_values(const QNetwork& net, const State& state, WhichNet which) {
    return net.q_values(state, which);
}

void sync_target(QNetwork& net) { net.sync_target(); }

int greedy_action(const QNetwork& net, const State& state) {
    const nn::Vec q = net.q_values(state, WhichNet::ONLINE);
    int best = 0;
    for (std::size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = static_cast<int>(i);
    return best;
}

ActionChoice select_action(const QNetwork& net, const State& state, long step,
                           const AgentConfig& config, Rng& rng) {
    ActionChoice choice;
    choice.epsilon = epsilon_at(step, config);
    if (rng.uniform01() < choice.epsilon) {
        choice.action = static_cast<int>(rng.uniform_int(net.action_count()));
        choice.explored = true;
    } else {
        choice.action = greedy_action(net, state);
    }
    return choice;
}

// ---------------------------------------------------------------- replay

ReplayMemory::ReplayMemory(std::size_t capacity, double priority_exponent, double beta)
    : capacity_(capacity), alpha_(priority_exponent), beta_(beta) {
    if (capacity_ < 1) throw ConfigError("agent: replay capacity must be >= 1");
    entries_.reserve(capacity_);
}

void ReplayMemory::push(Transition t) {
    if (t.priority <= 0.0) throw UsageError("agent: transition priority must be positive");
    if (entries_.size() < capacity_) {
        entries_.push_back(std::move(t));
    } else {
        entries_[write_pos_] = std::move(t); // overwrite oldest slot
    }
    write_pos_ = (write_pos_ + 1) % capacity_;
    ++total_pushed_;
}

double ReplayMemory::max_priority() const {
    double m = 0.0;
    for (const Transition& t : entries_) m = std::max(m, t.priority);
    return m;
}

void ReplayMemory::set_beta(double beta) {
    if (beta < 0.0 || beta > 1.0) throw ConfigError("agent: beta must lie in [0,1]");
    beta_ = beta;
}

std::optional<ReplayMemory::Sample> ReplayMemory::sample(std::size_t k, Rng& rng) const {
    if (entries_.size() < k || k == 0) return std::nullopt;

    const std::size_t n = entries_.size();
    std::vector<double> cumulative(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::pow(entries_[i].priority, alpha_);
        cumulative[i] = total;
    }

    Sample sample;
    sample.batch.reserve(k);
    sample.indices.reserve(k);
    sample.weights.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double u = rng.uniform01() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
        if (idx >= n) idx = n - 1;
        sample.indices.push_back(idx);
        sample.batch.push_back(entries_[idx]);
        const double p = std::pow(entries_[idx].priority, alpha_) / total;
        sample.weights.push_back(std::pow(static_cast<double>(n) * p, -beta_));
    }
    const double wmax = *std::max_element(sample.weights.begin(), sample.weights.end());
    for (double& w : sample.weights) w /= wmax;
    return sample;
}

void ReplayMemory::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> priorities) {
    if (indices.size() != priorities.size())
        throw UsageError("agent: priority update size mismatch");
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (priorities[j] <= 0.0) throw UsageError("agent: priorities must stay positive");
        entries_[indices[j]].priority = priorities[j];
    }
}

// ---------------------------------------------------------------- TD update

TdResult td_update(QNetwork& net, std::span<const Transition> batch,
                   std::span<const double> is_weights, const AgentConfig& config,
                   nn::Optimizer& optimizer) {
    if (batch.empty()) throw UsageError("agent: td_update on an empty batch");
    if (is_weights.size() != batch.size())
        throw UsageError("agent: td_update weight count mismatch");

    auto params = net.online_params();
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    TdResult result;
    result.td_errors.reserve(batch.size());
    result.new_priorities.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& tr = batch[i];
        nn::Mlp::Cache cache;
        const nn::Vec q = net.online().forward(tr.state, &cache);
        if (tr.action < 0 || tr.action >= static_cast<int>(q.size()))
            throw UsageError("agent: transition action out of range");

        const nn::Vec q_next = net.q_values(tr.next_state, WhichNet::TARGET);
        const double max_next = *std::max_element(q_next.begin(), q_next.end());
        const double target = tr.reward + config.gamma * max_next;
        const double td = target - q[tr.action];

        result.td_errors.push_back(td);
        result.new_priorities.push_back(std::fabs(td) + kPriorityFloor);
        result.loss += 0.5 * is_weights[i] * td * td * inv_b;

        // dL/dq[a] = -w * td / B, other outputs receive no gradient.
        nn::Vec grad(q.size(), 0.0);
        grad[tr.action] = -is_weights[i] * td * inv_b;
        net.online().backward(grad, cache);
    }
    optimizer.step(params);
    nn::zero_grads(params);
    return result;
}

// ---------------------------------------------------------------- DqnAgent

DqnAgent::DqnAgent(AgentConfig config, int state_dim, int action_count)
    : cfg_(std::move(config)),
      net_(state_dim, action_count, cfg_.hidden_sizes, derive_seed(cfg_.seed, 0)),
      memory_(cfg_.replay_capacity, cfg_.priority_exponent, cfg_.beta_start),
      rng_(derive_seed(cfg_.seed, 1)),
      optimizer_(nn::make_optimizer(cfg_.optimizer, cfg_.eta)) {
    cfg_.validate();
}

ActionChoice DqnAgent::act(const State& state, long step) {
    return select_action(net_, state, step, cfg_, rng_);
}

void DqnAgent::observe(State s, int action, double reward, State next) {
    Transition t;
    t.state = std::move(s);
    t.action = action;
    t.reward = std::clamp(reward, cfg_.reward_lo, cfg_.reward_hi);
    t.next_state = std::move(next);
    // New transitions get the largest priority seen so far, so every
    // experience is replayed at least with top probability once.
    t.priority = max_seen_priority_;
    memory_.push(std::move(t));
}

std::optional<double> DqnAgent::learn() {
    auto sample = memory_.sample(static_cast<std::size_t>(cfg_.batch_size), rng_);
    if (!sample) return std::nullopt;
    const TdResult res = td_update(net_, sample->batch, sample->weights, cfg_, *optimizer_);
    memory_.update_priorities(sample->indices, res.new_priorities);
    for (double p : res.new_priorities) max_seen_priority_ = std::max(max_seen_priority_, p);
    return res.loss;
}

void DqnAgent::sync_target() { net_.sync_target(); }

void DqnAgent::save(const std::string& path, long step) const {
    auto& self = const_cast<DqnAgent&>(*this);
    std::map<std::string, std::string> meta;
    meta["kind"] = "agent";
    meta["step"] = std::to_string(step);
    meta["state_dim"] = std::to_string(net_.state_dim());
    meta["action_count"] = std::to_string(net_.action_count());
    meta["gamma"] = std::to_string(cfg_.gamma);
    meta["eta"] = std::to_string(cfg_.eta);
    meta["epsilon"] = std::to_string(epsilon_at(step, cfg_));
    auto online = self.net_.online_params();
    auto target = self.net_.target_params();
    std::vector<nn::ParamRef> all;
    all.insert(all.end(), online.begin(), online.end());
    all.insert(all.end(), target.begin(), target.end());
    nn::save_params(path, all, meta);
}

long DqnAgent::load(const std::string& path) {
    auto online = net_.online_params();
    auto target = net_.target_params();
    std::vector<nn::ParamRef> all;
    all.insert(all.end(), online.begin(), online.end());
    all.insert(all.end(), target.begin(), target.end());
    const auto meta = nn::load_params(path, all);
    const auto it = meta.find("step");
    return it == meta.end() ? 0 : std::stol(it->second);
}

} // namespace adfrl::agent
