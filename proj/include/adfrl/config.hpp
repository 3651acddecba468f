#ifndef ADFRL_CONFIG_HPP
#define ADFRL_CONFIG_HPP

#include <cstdint>
#include <string>

#include "adfrl/agent.hpp"
#include "adfrl/detector.hpp"
#include "adfrl/env.hpp"
#include "adfrl/traffic.hpp"

namespace adfrl::harness {

// Everything an experiment needs, resolved from a flat key=value file.
// Defaults reproduce the reference hyperparameters; absent keys keep them.
struct Config {
    // experiment.*
    std::string name = "run";
    std::uint64_t seed = 1;
    long total_steps = 5000;
    long eval_every = 0;  // 0 disables periodic evaluation snapshots
    long eval_steps = 200;

    // traffic.*
    std::string traffic_source = "synthetic"; // "synthetic" | "csv"
    std::string csv_path;
    long calibration_flows = 3000;
    traffic::SyntheticConfig synthetic;
    traffic::CsvSchema schema; // csv.* keys
    double feature_horizon_sec = 5.0;
    bool feature_passthrough = false;

    // detector.*
    detector::DetectorHyper detector; // input_dim resolved against the pipeline
    int detector_stride = 2;          // window stride for detector training

    // env.* and reward.*
    env::EnvConfig environment;

    // agent.* (reward bounds mirrored from env during finalize)
    agent::AgentConfig agent;

    void validate() const; // throws ConfigError naming the offending key
};

// Parses `key = value` lines ('#' comments, blank lines ignored). Unknown
// keys and malformed values raise ConfigError naming the key. The returned
// config has been validated.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path); // IoError if unreadable

// Applies one key=value override on top of an existing config (used by the
// CLI); caller re-validates via Config::validate().
void apply_key(Config& config, const std::string& key, const std::string& value);

// Resolved configuration as parseable key=value text (round-trips).
std::string dump_config(const Config& config);

} // namespace adfrl::harness

#endif
