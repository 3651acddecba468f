#include "adfrl/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adfrl/errors.hpp"

namespace adfrl::harness {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

long to_long(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long out = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "an integer");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    if (v.find('-') != std::string::npos) bad_value(key, v, "an unsigned integer");
    char* end = nullptr;
    unsigned long long out = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "an unsigned integer");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "a number");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "a boolean (true/false)");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::uint32_t> to_addr_list(const std::string& key, const std::string& v) {
    std::vector<std::uint32_t> out;
    for (const std::string& item : split_list(v)) {
        try {
            out.push_back(traffic::parse_ipv4(item));
        } catch (const ConfigError&) {
            bad_value(key, item, "an IPv4 address");
        }
    }
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const std::string& item : split_list(v))
        out.push_back(static_cast<int>(to_long(key, item)));
    return out;
}

nn::OptimKind to_optim(const std::string& key, const std::string& v) {
    if (v == "sgd") return nn::OptimKind::SGD;
    if (v == "adam") return nn::OptimKind::ADAM;
    bad_value(key, v, "an optimizer (sgd/adam)");
}

const char* optim_name(nn::OptimKind kind) {
    return kind == nn::OptimKind::SGD ? "sgd" : "adam";
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

std::string join_addrs(const std::vector<std::uint32_t>& addrs) {
    std::vector<std::string> items;
    items.reserve(addrs.size());
    for (std::uint32_t a : addrs) items.push_back(traffic::format_ipv4(a));
    return join(items);
}

std::string join_ints(const std::vector<int>& xs) {
    std::vector<std::string> items;
    items.reserve(xs.size());
    for (int x : xs) items.push_back(std::to_string(x));
    return join(items);
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

} // namespace

void apply_key(Config& c, const std::string& key, const std::string& value) {
    // experiment.*
    if (key == "experiment.name") c.name = value;
    else if (key == "experiment.seed") c.seed = to_u64(key, value);
    else if (key == "experiment.total_steps") c.total_steps = to_long(key, value);
    else if (key == "experiment.eval_every") c.eval_every = to_long(key, value);
    else if (key == "experiment.eval_steps") c.eval_steps = to_long(key, value);
    // traffic.*
    else if (key == "traffic.source") c.traffic_source = value;
    else if (key == "traffic.csv_path") c.csv_path = value;
    else if (key == "traffic.calibration_flows") c.calibration_flows = to_long(key, value);
    else if (key == "traffic.flows_per_sec") c.synthetic.flows_per_sec = to_double(key, value);
    else if (key == "traffic.benign_hosts")
        c.synthetic.benign_host_count = static_cast<int>(to_long(key, value));
    else if (key == "traffic.malicious_fraction")
        c.synthetic.malicious_fraction = to_double(key, value);
    else if (key == "traffic.attack_start") c.synthetic.attack_start = to_double(key, value);
    else if (key == "traffic.attack_stop") c.synthetic.attack_stop = to_double(key, value);
    else if (key == "traffic.attackers") c.synthetic.attacker_addrs = to_addr_list(key, value);
    else if (key == "traffic.attackers_phase2")
        c.synthetic.attacker_addrs_phase2 = to_addr_list(key, value);
    else if (key == "traffic.phase2_start") c.synthetic.phase2_start = to_double(key, value);
    // csv.* column schema
    else if (key == "csv.timestamp") c.schema.timestamp = value;
    else if (key == "csv.src_addr") c.schema.src_addr = value;
    else if (key == "csv.dst_addr") c.schema.dst_addr = value;
    else if (key == "csv.src_port") c.schema.src_port = value;
    else if (key == "csv.dst_port") c.schema.dst_port = value;
    else if (key == "csv.protocol") c.schema.protocol = value;
    else if (key == "csv.bytes") c.schema.bytes = value;
    else if (key == "csv.packets") c.schema.packets = value;
    else if (key == "csv.duration") c.schema.duration = value;
    else if (key == "csv.label") c.schema.label = value;
    else if (key == "csv.benign_literals") c.schema.benign_literals = split_list(value);
    else if (key == "csv.passthrough") c.schema.passthrough = split_list(value);
    // features.*
    else if (key == "features.horizon_sec") c.feature_horizon_sec = to_double(key, value);
    else if (key == "features.passthrough") c.feature_passthrough = to_bool(key, value);
    // detector.*
    else if (key == "detector.hidden") c.detector.hidden = static_cast<int>(to_long(key, value));
    else if (key == "detector.kernel") c.detector.kernel = static_cast<int>(to_long(key, value));
    else if (key == "detector.channels")
        c.detector.channels = static_cast<int>(to_long(key, value));
    else if (key == "detector.lr") c.detector.learning_rate = to_double(key, value);
    else if (key == "detector.epochs") c.detector.epochs = static_cast<int>(to_long(key, value));
    else if (key == "detector.batch")
        c.detector.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "detector.val_fraction") c.detector.val_fraction = to_double(key, value);
    else if (key == "detector.majority_label") c.detector.majority_label = to_bool(key, value);
    else if (key == "detector.optimizer") c.detector.optimizer = to_optim(key, value);
    else if (key == "detector.stride") c.detector_stride = static_cast<int>(to_long(key, value));
    // env.*
    else if (key == "env.interval_sec") c.environment.interval_sec = to_double(key, value);
    else if (key == "env.window_len") c.environment.window_len = static_cast<int>(to_long(key, value));
    else if (key == "env.threshold") c.environment.anomaly_threshold = to_double(key, value);
    else if (key == "env.rule_cap") c.environment.rule_cap = static_cast<int>(to_long(key, value));
    else if (key == "env.history_horizon")
        c.environment.history_horizon = static_cast<int>(to_long(key, value));
    // reward.*
    else if (key == "reward.w_tp") c.environment.weights.w_tp = to_double(key, value);
    else if (key == "reward.w_fp") c.environment.weights.w_fp = to_double(key, value);
    else if (key == "reward.w_fn") c.environment.weights.w_fn = to_double(key, value);
    else if (key == "reward.w_tn") c.environment.weights.w_tn = to_double(key, value);
    else if (key == "reward.p_infeasible")
        c.environment.weights.p_infeasible = to_double(key, value);
    else if (key == "reward.p_redundant")
        c.environment.weights.p_redundant = to_double(key, value);
    else if (key == "reward.shaping") c.environment.weights.shaping = to_double(key, value);
    else if (key == "reward.lo") {
        c.environment.reward_lo = to_double(key, value);
        c.agent.reward_lo = c.environment.reward_lo;
    } else if (key == "reward.hi") {
        c.environment.reward_hi = to_double(key, value);
        c.agent.reward_hi = c.environment.reward_hi;
    }
    // agent.*
    else if (key == "agent.gamma") c.agent.gamma = to_double(key, value);
    else if (key == "agent.eta") c.agent.eta = to_double(key, value);
    else if (key == "agent.batch") c.agent.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "agent.target_sync") c.agent.target_update_every = to_long(key, value);
    else if (key == "agent.epsilon_start") c.agent.epsilon_start = to_double(key, value);
    else if (key == "agent.epsilon_end") c.agent.epsilon_end = to_double(key, value);
    else if (key == "agent.epsilon_decay_steps")
        c.agent.epsilon_decay_steps = to_long(key, value);
    else if (key == "agent.replay_capacity") {
        long cap = to_long(key, value);
        if (cap < 1) throw ConfigError("config key 'agent.replay_capacity': must be >= 1");
        c.agent.replay_capacity = static_cast<std::size_t>(cap);
    } else if (key == "agent.alpha") c.agent.priority_exponent = to_double(key, value);
    else if (key == "agent.beta_start") c.agent.beta_start = to_double(key, value);
    else if (key == "agent.beta_end") c.agent.beta_end = to_double(key, value);
    else if (key == "agent.hidden") c.agent.hidden_sizes = to_int_list(key, value);
    else if (key == "agent.optimizer") c.agent.optimizer = to_optim(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void Config::validate() const {
    check(total_steps >= 1, "experiment.total_steps must be >= 1, got " +
                                std::to_string(total_steps));
    check(eval_every >= 0, "experiment.eval_every must be >= 0");
    check(eval_steps >= 1, "experiment.eval_steps must be >= 1");
    check(traffic_source == "synthetic" || traffic_source == "csv",
          "traffic.source must be 'synthetic' or 'csv', got '" + traffic_source + "'");
    if (traffic_source == "csv")
        check(!csv_path.empty(), "traffic.csv_path is required when traffic.source=csv");
    check(calibration_flows >= environment.window_len,
          "traffic.calibration_flows must be >= env.window_len (" +
              std::to_string(environment.window_len) + ")");
    synthetic.validate();
    check(feature_horizon_sec > 0.0, "features.horizon_sec must be positive");

    check(detector.hidden >= 1, "detector.hidden must be >= 1");
    check(detector.kernel >= 1, "detector.kernel must be >= 1");
    check(detector.channels >= 1, "detector.channels must be >= 1");
    check(detector.learning_rate > 0.0, "detector.lr must be positive");
    check(detector.epochs >= 0, "detector.epochs must be >= 0");
    check(detector.batch_size >= 1, "detector.batch must be >= 1");
    check(detector.val_fraction >= 0.0 && detector.val_fraction < 1.0,
          "detector.val_fraction must lie in [0,1)");
    check(detector_stride >= 1, "detector.stride must be >= 1");

    check(environment.interval_sec > 0.0, "env.interval_sec must be positive");
    check(environment.window_len >= 1, "env.window_len must be >= 1");
    check(environment.window_len >= detector.kernel,
          "env.window_len must be >= detector.kernel (" + std::to_string(detector.kernel) + ")");
    check(environment.anomaly_threshold >= 0.0 && environment.anomaly_threshold <= 1.0,
          "env.threshold must lie in [0,1]");
    check(environment.rule_cap >= 1, "env.rule_cap must be >= 1");
    check(environment.history_horizon >= 1, "env.history_horizon must be >= 1");
    check(environment.reward_lo < environment.reward_hi,
          "reward.lo must be strictly below reward.hi");

    agent.validate();
    check(agent.reward_lo == environment.reward_lo && agent.reward_hi == environment.reward_hi,
          "reward bounds out of sync between env and agent");
}

Config parse_config_text(const std::string& text) {
    Config c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        apply_key(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    c.validate();
    return c;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string dump_config(const Config& c) {
    std::string out;
    auto kv = [&out](const std::string& key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    };
    kv("experiment.name", c.name);
    kv("experiment.seed", std::to_string(c.seed));
    kv("experiment.total_steps", std::to_string(c.total_steps));
    kv("experiment.eval_every", std::to_string(c.eval_every));
    kv("experiment.eval_steps", std::to_string(c.eval_steps));
    kv("traffic.source", c.traffic_source);
    if (!c.csv_path.empty()) kv("traffic.csv_path", c.csv_path);
    kv("traffic.calibration_flows", std::to_string(c.calibration_flows));
    kv("traffic.flows_per_sec", fmt(c.synthetic.flows_per_sec));
    kv("traffic.benign_hosts", std::to_string(c.synthetic.benign_host_count));
    kv("traffic.malicious_fraction", fmt(c.synthetic.malicious_fraction));
    kv("traffic.attack_start", fmt(c.synthetic.attack_start));
    kv("traffic.attack_stop", fmt(c.synthetic.attack_stop));
    if (!c.synthetic.attacker_addrs.empty())
        kv("traffic.attackers", join_addrs(c.synthetic.attacker_addrs));
    if (!c.synthetic.attacker_addrs_phase2.empty())
        kv("traffic.attackers_phase2", join_addrs(c.synthetic.attacker_addrs_phase2));
    kv("traffic.phase2_start", fmt(c.synthetic.phase2_start));
    kv("csv.timestamp", c.schema.timestamp);
    kv("csv.src_addr", c.schema.src_addr);
    kv("csv.dst_addr", c.schema.dst_addr);
    kv("csv.src_port", c.schema.src_port);
    kv("csv.dst_port", c.schema.dst_port);
    kv("csv.protocol", c.schema.protocol);
    kv("csv.bytes", c.schema.bytes);
    kv("csv.packets", c.schema.packets);
    kv("csv.duration", c.schema.duration);
    kv("csv.label", c.schema.label);
    kv("csv.benign_literals", join(c.schema.benign_literals));
    if (!c.schema.passthrough.empty()) kv("csv.passthrough", join(c.schema.passthrough));
    kv("features.horizon_sec", fmt(c.feature_horizon_sec));
    kv("features.passthrough", c.feature_passthrough ? "true" : "false");
    kv("detector.hidden", std::to_string(c.detector.hidden));
    kv("detector.kernel", std::to_string(c.detector.kernel));
    kv("detector.channels", std::to_string(c.detector.channels));
    kv("detector.lr", fmt(c.detector.learning_rate));
    kv("detector.epochs", std::to_string(c.detector.epochs));
    kv("detector.batch", std::to_string(c.detector.batch_size));
    kv("detector.val_fraction", fmt(c.detector.val_fraction));
    kv("detector.majority_label", c.detector.majority_label ? "true" : "false");
    kv("detector.optimizer", optim_name(c.detector.optimizer));
    kv("detector.stride", std::to_string(c.detector_stride));
    kv("env.interval_sec", fmt(c.environment.interval_sec));
    kv("env.window_len", std::to_string(c.environment.window_len));
    kv("env.threshold", fmt(c.environment.anomaly_threshold));
    kv("env.rule_cap", std::to_string(c.environment.rule_cap));
    kv("env.history_horizon", std::to_string(c.environment.history_horizon));
    kv("reward.w_tp", fmt(c.environment.weights.w_tp));
    kv("reward.w_fp", fmt(c.environment.weights.w_fp));
    kv("reward.w_fn", fmt(c.environment.weights.w_fn));
    kv("reward.w_tn", fmt(c.environment.weights.w_tn));
    kv("reward.p_infeasible", fmt(c.environment.weights.p_infeasible));
    kv("reward.p_redundant", fmt(c.environment.weights.p_redundant));
    kv("reward.shaping", fmt(c.environment.weights.shaping));
    kv("reward.lo", fmt(c.environment.reward_lo));
    kv("reward.hi", fmt(c.environment.reward_hi));
    kv("agent.gamma", fmt(c.agent.gamma));
    kv("agent.eta", fmt(c.agent.eta));
    kv("agent.batch", std::to_string(c.agent.batch_size));
    kv("agent.target_sync", std::to_string(c.agent.target_update_every));
    kv("agent.epsilon_start", fmt(c.agent.epsilon_start));
    kv("agent.epsilon_end", fmt(c.agent.epsilon_end));
    kv("agent.epsilon_decay_steps", std::to_string(c.agent.epsilon_decay_steps));
    kv("agent.replay_capacity", std::to_string(c.agent.replay_capacity));
    kv("agent.alpha", fmt(c.agent.priority_exponent));
    kv("agent.beta_start", fmt(c.agent.beta_start));
    kv("agent.beta_end", fmt(c.agent.beta_end));
    kv("agent.hidden", join_ints(c.agent.hidden_sizes));
    kv("agent.optimizer", optim_name(c.agent.optimizer));
    return out;
}

} // namespace adfrl::harness
