#ifndef ADFRL_TRAFFIC_HPP
#define ADFRL_TRAFFIC_HPP

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adfrl/errors.hpp"
#include "adfrl/rng.hpp"

namespace adfrl::traffic {

enum class Protocol : std::uint8_t { TCP = 0, UDP = 1, ICMP = 2 };
enum class Label : std::uint8_t { BENIGN = 0, MALICIOUS = 1 };

// One observed network flow. Addresses are IPv4 in host byte order.
struct FlowRecord {
    double timestamp = 0.0; // seconds, non-decreasing within a stream
    std::uint32_t src_addr = 0;
    std::uint32_t dst_addr = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::TCP;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 1;
    double duration = 0.0;
    Label label = Label::BENIGN;
    std::string attack_kind;   // empty for benign flows
    std::vector<double> extra; // optional passthrough feature columns from CSV

    // packets >= 1, bytes/duration non-negative, ports 0 only for ICMP.
    bool valid() const;
};

std::uint32_t parse_ipv4(const std::string& text); // throws ConfigError on bad input
std::string format_ipv4(std::uint32_t addr);

// Fixed-length normalized feature vector; every value in [0, 1].
struct FeatureVector {
    std::vector<double> values;
    Label label = Label::BENIGN;
};

// W consecutive feature vectors fed to the detector.
struct TrafficWindow {
    std::vector<FeatureVector> features;
    std::size_t window_index = 0;

    bool any_malicious() const;
    bool majority_malicious() const;
};

// ---------------------------------------------------------------- CSV input

// Maps CSV column names onto FlowRecord fields. The header row is required;
// the label column is compared case-insensitively against benign_literals.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string src_addr = "src_addr";
    std::string dst_addr = "dst_addr";
    std::string src_port = "src_port";
    std::string dst_port = "dst_port";
    std::string protocol = "protocol";
    std::string bytes = "bytes";
    std::string packets = "packets";
    std::string duration = "duration";
    std::string label = "label";
    std::vector<std::string> benign_literals{"BENIGN", "normal"};
    // Numeric columns copied verbatim into FlowRecord::extra (at most 78).
    std::vector<std::string> passthrough;
};

// Streaming CSV reader. Rows that fail type or invariant checks are counted
// and skipped rather than aborting the stream.
class FlowCsvReader {
public:
    FlowCsvReader(const std::string& path, CsvSchema schema);
    ~FlowCsvReader();
    FlowCsvReader(FlowCsvReader&&) noexcept;
    FlowCsvReader& operator=(FlowCsvReader&&) noexcept;

    std::optional<FlowRecord> next();
    std::size_t skipped() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct CsvReadResult {
    std::vector<FlowRecord> records;
    std::size_t skipped = 0;
};

CsvReadResult read_flow_csv(const std::string& path, const CsvSchema& schema);

// ---------------------------------------------------------------- synthetic

// Two-phase synthetic traffic: benign hosts chat with a small server pool;
// designated attackers emit flood-style flows inside the attack window.
struct SyntheticConfig {
    double flows_per_sec = 6.0;
    int benign_host_count = 20;
    std::vector<std::uint32_t> attacker_addrs;
    double malicious_fraction = 0.2; // of flows inside the attack window
    double attack_start = 0.0;
    double attack_stop = 1e18;
    // When phase2_start is reached the active attacker set switches.
    std::vector<std::uint32_t> attacker_addrs_phase2;
    double phase2_start = 1e18;

    void validate() const; // throws ConfigError
};

class SyntheticTraffic {
public:
    SyntheticTraffic(SyntheticConfig config, std::uint64_t seed);
    FlowRecord next(); // unbounded stream, timestamps non-decreasing

private:
    SyntheticConfig cfg_;
    Rng rng_;
    double clock_ = 0.0;
};

std::vector<FlowRecord> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                                           std::size_t count);

// ---------------------------------------------------------------- features

// Engineered per-flow features: volume/timing statistics in log scale,
// protocol and destination-port-class one-hots, and short-horizon per-source
// rate statistics. Stateful because of the per-source history.
class FeatureExtractor {
public:
    static constexpr int kDim = 16;

    explicit FeatureExtractor(double horizon_sec = 5.0);

    std::vector<double> raw_features(const FlowRecord& record);
    void reset();

private:
    struct SrcEvent {
        double t;
        std::uint64_t bytes, packets;
        std::uint16_t dst_port;
    };
    double horizon_;
    std::unordered_map<std::uint32_t, std::deque<SrcEvent>> per_src_;
};

// Per-dimension min-max scaler fitted on a training prefix; out-of-range
// values are clipped into [0, 1].
class Normalizer {
public:
    void fit(std::span<const std::vector<double>> rows);
    bool fitted() const { return fitted_; }
    std::vector<double> apply(const std::vector<double>& raw) const; // throws StateError if unfitted
    int dim() const { return static_cast<int>(lo_.size()); }

    const std::vector<double>& minima() const { return lo_; }
    const std::vector<double>& maxima() const { return hi_; }
    void set_bounds(std::vector<double> lo, std::vector<double> hi);

private:
    std::vector<double> lo_, hi_;
    bool fitted_ = false;
};

// Raw extraction followed by normalization; label copied from the record.
// Uses FlowRecord::extra verbatim when the pipeline is built in passthrough
// mode, otherwise the engineered FeatureExtractor features.
class FeaturePipeline {
public:
    FeaturePipeline(Normalizer normalizer, double horizon_sec = 5.0, bool passthrough = false);

    FeatureVector extract(const FlowRecord& record);
    int dim() const { return normalizer_.dim(); }
    void reset_history() { extractor_.reset(); }
    const Normalizer& normalizer() const { return normalizer_; }

private:
    Normalizer normalizer_;
    FeatureExtractor extractor_;
    bool passthrough_;
};

FeatureVector extract_features(const FlowRecord& record, FeatureExtractor& extractor,
                               const Normalizer& normalizer);

// ---------------------------------------------------------------- windows

// Window k covers [k*stride, k*stride + w); incomplete tails are dropped.
std::vector<TrafficWindow> make_windows(std::span<const FeatureVector> stream, int w, int stride);

} // namespace adfrl::traffic

#endif
