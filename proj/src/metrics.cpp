#include "adfrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "adfrl/errors.hpp"

namespace adfrl::harness {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

} // namespace

double accuracy(const EvalCounts& c) {
    return ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
}

double precision(const EvalCounts& c) {
    return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
}

double recall(const EvalCounts& c) {
    return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
}

double fpr(const EvalCounts& c) {
    return ratio(static_cast<double>(c.fp), static_cast<double>(c.fp + c.tn));
}

double f1(const EvalCounts& c) {
    const double p = precision(c), r = recall(c);
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    q = std::clamp(q, 0.0, 1.0);
    // Nearest rank: smallest index i with (i+1)/N >= q.
    const double n = static_cast<double>(values.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * n));
    if (rank > 0) --rank;
    return values[std::min(rank, values.size() - 1)];
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw UsageError("auc: scores and labels differ in length");
    long pos = 0, neg = 0;
    for (int y : labels) (y != 0 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw UsageError("auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive ranks, with tied scores sharing their mean rank.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] != 0) pos_rank_sum += mean_rank;
        i = j;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

MetricsSummary compute_metrics(const env::TrainingLog& log) {
    MetricsSummary m;
    std::vector<double> latencies;
    double latency_sum = 0.0;
    for (const auto& r : log.rows) {
        m.counts.tp += r.tp;
        m.counts.fp += r.fp;
        m.counts.tn += r.tn;
        m.counts.fn += r.fn;
        m.cumulative_reward += r.reward;
        if (r.tp + r.fp + r.tn + r.fn > 0) {
            latencies.push_back(static_cast<double>(r.latency_ns));
            latency_sum += static_cast<double>(r.latency_ns);
        }
        if (r.mutated) ++m.rule_updates;
        if (r.redundant) ++m.redundant_updates;
    }
    m.steps = static_cast<long>(log.rows.size());
    m.accuracy = accuracy(m.counts);
    m.precision = precision(m.counts);
    m.recall = recall(m.counts);
    m.fpr = fpr(m.counts);
    m.f1 = f1(m.counts);
    m.mean_reward = m.steps > 0 ? m.cumulative_reward / static_cast<double>(m.steps) : 0.0;
    m.latency_mean_ns = latencies.empty()
                            ? 0.0
                            : latency_sum / static_cast<double>(latencies.size());
    m.latency_median_ns = percentile(latencies, 0.5);
    m.latency_p95_ns = percentile(latencies, 0.95);
    return m;
}

std::string metrics_csv(const MetricsSummary& m) {
    char buf[640];
    std::snprintf(buf, sizeof(buf),
                  "metric,value\n"
                  "flows,%ld\ntp,%ld\nfp,%ld\ntn,%ld\nfn,%ld\n"
                  "accuracy,%.9g\nprecision,%.9g\nrecall,%.9g\nfpr,%.9g\nf1,%.9g\n"
                  "cumulative_reward,%.9g\nmean_reward,%.9g\n"
                  "latency_mean_ns,%.9g\nlatency_median_ns,%.9g\nlatency_p95_ns,%.9g\n"
                  "rule_updates,%ld\nredundant_updates,%ld\nsteps,%ld\n",
                  m.counts.total(), m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn,
                  m.accuracy, m.precision, m.recall, m.fpr, m.f1, m.cumulative_reward,
                  m.mean_reward, m.latency_mean_ns, m.latency_median_ns, m.latency_p95_ns,
                  m.rule_updates, m.redundant_updates, m.steps);
    return buf;
}

std::string reward_curve_csv(const env::TrainingLog& log, long window) {
    std::string out = "step,reward,moving_avg\n";
    if (window < 1) window = 1;
    double running = 0.0;
    char buf[128];
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        running += log.rows[i].reward;
        if (i >= static_cast<std::size_t>(window))
            running -= log.rows[i - static_cast<std::size_t>(window)].reward;
        const double span = static_cast<double>(
            std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
        std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g\n", log.rows[i].step,
                      log.rows[i].reward, running / span);
        out += buf;
    }
    return out;
}

double trailing_mean_reward(const env::TrainingLog& log, long window) {
    if (log.rows.empty() || window < 1) return 0.0;
    const std::size_t n = log.rows.size();
    const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(window));
    double sum = 0.0;
    for (std::size_t i = n - k; i < n; ++i) sum += log.rows[i].reward;
    return sum / static_cast<double>(k);
}

double leading_mean_reward(const env::TrainingLog& log, long window) {
    if (log.rows.empty() || window < 1) return 0.0;
    const std::size_t k =
        std::min<std::size_t>(log.rows.size(), static_cast<std::size_t>(window));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += log.rows[i].reward;
    return sum / static_cast<double>(k);
}

} // namespace adfrl::harness
