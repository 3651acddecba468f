#ifndef ADFRL_METRICS_HPP
#define ADFRL_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "adfrl/env.hpp"

namespace adfrl::harness {

struct EvalCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long total() const { return tp + fp + tn + fn; }
};

// All rates use the 0/0 -> 0 convention.
double accuracy(const EvalCounts& c);
double precision(const EvalCounts& c);
double recall(const EvalCounts& c);    // = block rate over malicious flows
double fpr(const EvalCounts& c);
double f1(const EvalCounts& c);

// Nearest-rank percentile of an unsorted sample; q in [0,1]. Returns 0 for
// an empty sample.
double percentile(std::vector<double> values, double q);

// Rank-based ROC AUC (ties share the mean rank). labels are 0/1; throws
// UsageError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsSummary {
    EvalCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fpr = 0.0;
    double f1 = 0.0;
    double cumulative_reward = 0.0;
    double mean_reward = 0.0;
    double latency_mean_ns = 0.0;
    double latency_median_ns = 0.0;
    double latency_p95_ns = 0.0;
    long rule_updates = 0;     // steps whose applied delta was not NOOP
    long redundant_updates = 0;
    long steps = 0;
};

// Aggregates a training log: flow-level confusion counts, reward totals,
// latency order statistics over steps that judged at least one flow.
MetricsSummary compute_metrics(const env::TrainingLog& log);

std::string metrics_csv(const MetricsSummary& m);

// step,reward,moving_avg rows; the moving average spans min(window, steps
// so far) trailing steps.
std::string reward_curve_csv(const env::TrainingLog& log, long window);

// Mean reward over the last `window` rows (all rows if fewer).
double trailing_mean_reward(const env::TrainingLog& log, long window);
// Mean reward over the first `window` rows.
double leading_mean_reward(const env::TrainingLog& log, long window);

} // namespace adfrl::harness

#endif
