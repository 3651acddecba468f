#ifndef ADFRL_AGENT_HPP
#define ADFRL_AGENT_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adfrl/nn/checkpoint.hpp"
#include "adfrl/nn/layers.hpp"
#include "adfrl/rng.hpp"

namespace adfrl::agent {

using State = std::vector<double>; // length S, finite entries

struct Transition {
    State state;
    int action = 0;
    double reward = 0.0; // clamped into the configured bounds before storage
    State next_state;
    double priority = 1.0; // strictly positive
};

struct AgentConfig {
    double gamma = 0.99;
    double eta = 0.001;
    int batch_size = 64;
    long target_update_every = 2000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    long epsilon_decay_steps = 10000;
    std::size_t replay_capacity = 50000;
    double priority_exponent = 0.6; // alpha_p
    double beta_start = 0.4;        // importance-weight exponent annealing
    double beta_end = 1.0;
    double reward_lo = -10.0;
    double reward_hi = 10.0;
    std::vector<int> hidden_sizes{64, 64};
    nn::OptimKind optimizer = nn::OptimKind::ADAM;
    std::uint64_t seed = 1;

    void validate() const; // throws ConfigError
};

// Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps,
// constant afterwards.
double epsilon_at(long step, const AgentConfig& config);

enum class WhichNet : std::uint8_t { ONLINE, TARGET };

// Online MLP plus a periodically synced frozen copy. Disabling bias gives the
// pure linear map used by the tabular-equivalence checks.
class QNetwork {
public:
    QNetwork(int state_dim, int action_count, const std::vector<int>& hidden,
             std::uint64_t seed, bool bias = true);

    nn::Vec q_values(const State& state, WhichNet which) const;
    void sync_target(); // theta_minus <- theta, bitwise

    int state_dim() const { return online_.input_dim(); }
    int action_count() const { return online_.output_dim(); }

    nn::Mlp& online() { return online_; }
    const nn::Mlp& online() const { return online_; }
    const nn::Mlp& target() const { return target_; }
    std::vector<nn::ParamRef> online_params() { return online_.params(); }
    std::vector<nn::ParamRef> target_params() { return target_.params(); }

private:
    nn::Mlp online_;
    nn::Mlp target_;
};

nn::Vec q_values(const QNetwork& net, const State& state, WhichNet which);
void sync_target(QNetwork& net);

struct ActionChoice {
    int action = 0;
    double epsilon = 0.0;
    bool explored = false;
};

// epsilon-greedy over the online network; argmax ties break to the lowest
// index.
ActionChoice select_action(const QNetwork& net, const State& state, long step,
                           const AgentConfig& config, Rng& rng);

int greedy_action(const QNetwork& net, const State& state);

// Ring buffer with proportional prioritization: P(i) = p_i^alpha / sum.
class ReplayMemory {
public:
    ReplayMemory(std::size_t capacity, double priority_exponent, double beta);

    void push(Transition t); // evicts the oldest entry when full
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t total_pushed() const { return total_pushed_; }
    double max_priority() const;

    void set_beta(double beta);
    double beta() const { return beta_; }
    double priority_exponent() const { return alpha_; }

    struct Sample {
        std::vector<Transition> batch;
        std::vector<std::size_t> indices; // slots, valid until the next push
        std::vector<double> weights;      // importance weights, max-normalized
    };

    // nullopt while fewer than k entries are stored (caller skips the update).
    std::optional<Sample> sample(std::size_t k, Rng& rng) const;
    void update_priorities(std::span<const std::size_t> indices,
                           std::span<const double> priorities);

    const Transition& at(std::size_t slot) const { return entries_[slot]; }

private:
    std::size_t capacity_;
    double alpha_;
    double beta_;
    std::vector<Transition> entries_;
    std::size_t write_pos_ = 0;
    std::uint64_t total_pushed_ = 0;
};

struct TdResult {
    double loss = 0.0;
    std::vector<double> td_errors;
    std::vector<double> new_priorities; // |td| + priority floor
};

inline constexpr double kPriorityFloor = 1e-3;

// One gradient step on the online network against targets
// y = r + gamma * max_a' Q_target(s', a'). Loss is the importance-weighted
// mean of 1/2 * td^2, so with plain SGD, batch size 1 and a bias-free linear
// network over one-hot states the update reduces exactly to the scalar rule
// Q <- (1 - eta) Q + eta (r + gamma max Q'). The target network is untouched.
TdResult td_update(QNetwork& net, std::span<const Transition> batch,
                   std::span<const double> is_weights, const AgentConfig& config,
                   nn::Optimizer& optimizer);

// Bundles network, replay, exploration and optimizer state behind the
// step-level API the training loop uses.
class DqnAgent {
public:
    DqnAgent(AgentConfig config, int state_dim, int action_count);

    ActionChoice act(const State& state, long step);
    int greedy(const State& state) const { return greedy_action(net_, state); }

    void observe(State s, int action, double reward, State next);
    std::optional<double> learn(); // one sampled update; nullopt while not ready
    void sync_target();

    void set_beta(double beta) { memory_.set_beta(beta); }
    const AgentConfig& config() const { return cfg_; }
    const QNetwork& net() const { return net_; }
    QNetwork& net() { return net_; }
    const ReplayMemory& memory() const { return memory_; }

    void save(const std::string& path, long step) const;
    // Loads parameters into this agent; shapes must match. Returns the
    // stored step count.
    long load(const std::string& path);

private:
    AgentConfig cfg_;
    QNetwork net_;
    ReplayMemory memory_;
    Rng rng_;
    std::unique_ptr<nn::Optimizer> optimizer_;
    double max_seen_priority_ = 1.0;
};

} // namespace adfrl::agent

#endif
