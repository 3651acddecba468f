#ifndef ADFRL_EXPERIMENT_HPP
#define ADFRL_EXPERIMENT_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adfrl/config.hpp"
#include "adfrl/metrics.hpp"

namespace adfrl::harness {

// Calibration output: fitted feature scaling, the trained detector, and the
// calibration windows kept around for baseline construction.
struct PreparedWorld {
    detector::DetectorModel detector;
    detector::TrainReport detector_report;
    double detector_auc = 0.0; // held-out windows when synthetic, else in-sample
    traffic::Normalizer normalizer;
    std::vector<traffic::FlowRecord> calibration_records;
    std::vector<traffic::TrafficWindow> calibration_windows;
    std::vector<traffic::FlowRecord> replay_records; // csv source: post-calibration rows
};

PreparedWorld prepare_world(const Config& cfg);

env::Environment make_environment(const Config& cfg, const PreparedWorld& world,
                                  std::unique_ptr<env::FlowSource> source);

struct EvalResult {
    EvalCounts counts;
    double block_rate = 0.0; // recall over malicious flows
    double fpr = 0.0;
    long steps = 0;
};

// Greedy-policy rollout on a fresh evaluation episode; the agent's rule set
// starts empty and adapts during the rollout, but no learning happens.
EvalResult evaluate_greedy(const Config& cfg, const PreparedWorld& world,
                           const agent::DqnAgent& agent, std::uint64_t episode);

struct ExperimentResult {
    env::TrainingLog log;
    MetricsSummary train_metrics;
    detector::TrainReport detector_report;
    double detector_auc = 0.0;
    EvalResult final_eval;
    std::string ruleset_text; // final training rule set
    std::vector<std::string> files; // written when out_dir is non-empty
};

// Full pipeline: calibrate + train detector, train the agent, evaluate the
// greedy policy, optionally write config/metrics/logs/checkpoints under
// out_dir.
ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir);

// Static-threshold baseline: one DENY rule per distinct source seen inside a
// calibration window the detector flagged. Fixed for the whole replay.
fw::RuleSet static_baseline_rules(const std::vector<traffic::TrafficWindow>& windows,
                                  const std::vector<traffic::FlowRecord>& records,
                                  const detector::DetectorModel& det, double threshold,
                                  int stride);

EvalCounts replay_ruleset(fw::RuleSet rules, std::span<const traffic::FlowRecord> flows);

struct CompareResult {
    EvalCounts adaptive;
    EvalCounts baseline;
    double adaptive_fpr = 0.0, baseline_fpr = 0.0;
    double adaptive_recall = 0.0, baseline_recall = 0.0;
    std::size_t baseline_rule_count = 0;
    std::vector<std::string> files;
};

// Trains the agent, then judges the identical evaluation flow sequence
// under (a) the adapting greedy policy and (b) the static baseline.
CompareResult compare_baseline(const Config& cfg, const std::string& out_dir);

std::string compare_csv(const CompareResult& r);

void write_text_file(const std::string& path, const std::string& content); // IoError

} // namespace adfrl::harness

#endif
