#include "adfrl/traffic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace adfrl::traffic {

bool FlowRecord::valid() const {
    if (packets < 1) return false;
    if (duration < 0.0) return false;
    // Port 0 is only legal for ICMP flows.
    if (protocol != Protocol::ICMP && (src_port == 0 || dst_port == 0)) return false;
    return true;
}

std::uint32_t parse_ipv4(const std::string& text) {
    unsigned a, b, c, d;
    char tail;
    const int n = std::sscanf(text.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail);
    if (n == 4 && a < 256 && b < 256 && c < 256 && d < 256)
        return (a << 24) | (b << 16) | (c << 8) | d;
    // Plain integer addresses are accepted for dataset adapters.
    char* end = nullptr;
    const unsigned long v = std::strtoul(text.c_str(), &end, 10);
    if (end && *end == '\0' && !text.empty() && v <= 0xFFFFFFFFUL)
        return static_cast<std::uint32_t>(v);
    throw ConfigError("traffic: bad IPv4 address '" + text + "'");
}

std::string format_ipv4(std::uint32_t addr) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (addr >> 24) & 0xFF, (addr >> 16) & 0xFF,
                  (addr >> 8) & 0xFF, addr & 0xFF);
    return buf;
}

bool TrafficWindow::any_malicious() const {
    for (const FeatureVector& f : features)
        if (f.label == Label::MALICIOUS) return true;
    return false;
}

bool TrafficWindow::majority_malicious() const {
    std::size_t mal = 0;
    for (const FeatureVector& f : features)
        if (f.label == Label::MALICIOUS) ++mal;
    return 2 * mal > features.size();
}

// ---------------------------------------------------------------- CSV input

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (quoted) {
            if (ch == '"')
                quoted = false;
            else
                field.push_back(ch);
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    out.push_back(field);
    for (std::string& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0' && std::isfinite(out);
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    if (s.empty() || s[0] == '-') return false;
    char* end = nullptr;
    out = std::strtoull(s.c_str(), &end, 10);
    return end && *end == '\0';
}

bool parse_port(const std::string& s, std::uint16_t& out) {
    std::uint64_t v;
    if (!parse_u64(s, v) || v > 65535) return false;
    out = static_cast<std::uint16_t>(v);
    return true;
}

bool parse_protocol(const std::string& s, Protocol& out) {
    const std::string l = lower(s);
    if (l == "tcp" || l == "6") {
        out = Protocol::TCP;
    } else if (l == "udp" || l == "17") {
        out = Protocol::UDP;
    } else if (l == "icmp" || l == "1") {
        out = Protocol::ICMP;
    } else {
        return false;
    }
    return true;
}

} // namespace

struct FlowCsvReader::Impl {
    std::ifstream in;
    CsvSchema schema;
    std::size_t skipped = 0;
    double last_ts = -1e300;

    int col_timestamp = -1, col_src_addr = -1, col_dst_addr = -1;
    int col_src_port = -1, col_dst_port = -1, col_protocol = -1;
    int col_bytes = -1, col_packets = -1, col_duration = -1, col_label = -1;
    std::vector<int> col_passthrough;

    int require(const std::unordered_map<std::string, int>& cols, const std::string& name) {
        auto it = cols.find(name);
        if (it == cols.end())
            throw ConfigError("traffic: schema references absent CSV column '" + name + "'");
        return it->second;
    }

    Impl(const std::string& path, CsvSchema s) : in(path), schema(std::move(s)) {
        if (!in) throw IoError("traffic: cannot open CSV file: " + path);
        if (schema.passthrough.size() > 78)
            throw ConfigError("traffic: at most 78 passthrough columns are supported");
        std::string header;
        if (!std::getline(in, header))
            throw IoError("traffic: CSV file has no header row: " + path);
        std::unordered_map<std::string, int> cols;
        const auto names = split_csv_line(header);
        for (std::size_t i = 0; i < names.size(); ++i) cols[names[i]] = static_cast<int>(i);

        col_timestamp = require(cols, schema.timestamp);
        col_src_addr = require(cols, schema.src_addr);
        col_dst_addr = require(cols, schema.dst_addr);
        col_src_port = require(cols, schema.src_port);
        col_dst_port = require(cols, schema.dst_port);
        col_protocol = require(cols, schema.protocol);
        col_bytes = require(cols, schema.bytes);
        col_packets = require(cols, schema.packets);
        col_duration = require(cols, schema.duration);
        col_label = require(cols, schema.label);
        for (const std::string& name : schema.passthrough)
            col_passthrough.push_back(require(cols, name));
    }

    bool parse_row(const std::vector<std::string>& f, FlowRecord& rec) {
        const int width = static_cast<int>(f.size());
        auto field = [&](int idx) -> const std::string& {
            static const std::string empty;
            return (idx >= 0 && idx < width) ? f[idx] : empty;
        };
        std::uint64_t pkts;
        std::uint16_t sport, dport;
        if (!parse_double(field(col_timestamp), rec.timestamp)) return false;
        if (!parse_double(field(col_duration), rec.duration) || rec.duration < 0.0) return false;
        if (!parse_u64(field(col_bytes), rec.bytes)) return false;
        if (!parse_u64(field(col_packets), pkts) || pkts < 1) return false;
        if (!parse_port(field(col_src_port), sport)) return false;
        if (!parse_port(field(col_dst_port), dport)) return false;
        if (!parse_protocol(field(col_protocol), rec.protocol)) return false;
        try {
            rec.src_addr = parse_ipv4(field(col_src_addr));
            rec.dst_addr = parse_ipv4(field(col_dst_addr));
        } catch (const ConfigError&) {
            return false;
        }
        rec.packets = pkts;
        rec.src_port = sport;
        rec.dst_port = dport;
        if (!rec.valid()) return false;
        if (rec.timestamp < last_ts) return false; // stream must stay non-decreasing

        const std::string lbl = field(col_label);
        const std::string lbl_lower = lower(lbl);
        bool benign = false;
        for (const std::string& lit : schema.benign_literals)
            if (lbl_lower == lower(lit)) benign = true;
        rec.label = benign ? Label::BENIGN : Label::MALICIOUS;
        rec.attack_kind = benign ? std::string() : lbl;

        rec.extra.clear();
        for (int idx : col_passthrough) {
            double v;
            if (!parse_double(field(idx), v)) return false;
            rec.extra.push_back(v);
        }
        return true;
    }
};

FlowCsvReader::FlowCsvReader(const std::string& path, CsvSchema schema)
    : impl_(std::make_unique<Impl>(path, std::move(schema))) {}
FlowCsvReader::~FlowCsvReader() = default;
FlowCsvReader::FlowCsvReader(FlowCsvReader&&) noexcept = default;
FlowCsvReader& FlowCsvReader::operator=(FlowCsvReader&&) noexcept = default;

std::optional<FlowRecord> FlowCsvReader::next() {
    std::string line;
    while (std::getline(impl_->in, line)) {
        if (line.empty() || line == "\r") continue;
        FlowRecord rec;
        if (impl_->parse_row(split_csv_line(line), rec)) {
            impl_->last_ts = rec.timestamp;
            return rec;
        }
        ++impl_->skipped;
    }
    return std::nullopt;
}

std::size_t FlowCsvReader::skipped() const { return impl_->skipped; }

CsvReadResult read_flow_csv(const std::string& path, const CsvSchema& schema) {
    FlowCsvReader reader(path, schema);
    CsvReadResult result;
    while (auto rec = reader.next()) result.records.push_back(std::move(*rec));
    result.skipped = reader.skipped();
    return result;
}

// ---------------------------------------------------------------- synthetic

void SyntheticConfig::validate() const {
    if (malicious_fraction < 0.0 || malicious_fraction > 1.0)
        throw ConfigError("traffic: malicious_fraction must lie in [0,1], got " +
                          std::to_string(malicious_fraction));
    if (flows_per_sec <= 0.0) throw ConfigError("traffic: flows_per_sec must be positive");
    if (benign_host_count < 1) throw ConfigError("traffic: benign_host_count must be >= 1");
}

namespace {

constexpr std::uint32_t kBenignBase = 0xC0A80101;  // 192.168.1.1
constexpr std::uint32_t kServerBase = 0x0A000001;  // 10.0.0.1
constexpr int kServerCount = 5;
constexpr std::uint16_t kBenignPorts[] = {80, 443, 53, 22, 25};

} // namespace

SyntheticTraffic::SyntheticTraffic(SyntheticConfig config, std::uint64_t seed)
    : cfg_(std::move(config)), rng_(seed) {
    cfg_.validate();
}

FlowRecord SyntheticTraffic::next() {
    clock_ += rng_.exponential(cfg_.flows_per_sec);

    const std::vector<std::uint32_t>* attackers = nullptr;
    if (clock_ >= cfg_.phase2_start) {
        if (!cfg_.attacker_addrs_phase2.empty()) attackers = &cfg_.attacker_addrs_phase2;
    } else if (clock_ >= cfg_.attack_start && clock_ < cfg_.attack_stop) {
        if (!cfg_.attacker_addrs.empty()) attackers = &cfg_.attacker_addrs;
    }

    FlowRecord rec;
    rec.timestamp = clock_;
    const bool malicious = attackers && rng_.bernoulli(cfg_.malicious_fraction);
    if (malicious) {
        rec.src_addr = (*attackers)[rng_.uniform_int(attackers->size())];
        rec.dst_addr = kServerBase + static_cast<std::uint32_t>(rng_.uniform_int(kServerCount));
        rec.protocol = Protocol::TCP;
        rec.src_port = static_cast<std::uint16_t>(49152 + rng_.uniform_int(16000));
        rec.dst_port = 80;
        rec.packets = 200 + rng_.uniform_int(1801);
        rec.bytes = rec.packets * (40 + rng_.uniform_int(21));
        rec.duration = rng_.uniform(0.01, 0.1);
        rec.label = Label::MALICIOUS;
        rec.attack_kind = "flood";
    } else {
        rec.src_addr = kBenignBase + static_cast<std::uint32_t>(rng_.uniform_int(cfg_.benign_host_count));
        rec.dst_addr = kServerBase + static_cast<std::uint32_t>(rng_.uniform_int(kServerCount));
        const double proto_draw = rng_.uniform01();
        if (proto_draw < 0.05) {
            rec.protocol = Protocol::ICMP;
            rec.src_port = 0;
            rec.dst_port = 0;
        } else {
            rec.protocol = proto_draw < 0.20 ? Protocol::UDP : Protocol::TCP;
            rec.src_port = static_cast<std::uint16_t>(49152 + rng_.uniform_int(16000));
            rec.dst_port = kBenignPorts[rng_.uniform_int(std::size(kBenignPorts))];
        }
        rec.packets = 2 + rng_.uniform_int(39);
        rec.bytes = rec.packets * (100 + rng_.uniform_int(1101));
        rec.duration = rng_.uniform(0.05, 2.0);
        rec.label = Label::BENIGN;
    }
    return rec;
}

std::vector<FlowRecord> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                                           std::size_t count) {
    SyntheticTraffic gen(config, seed);
    std::vector<FlowRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(gen.next());
    return out;
}

// ---------------------------------------------------------------- features

FeatureExtractor::FeatureExtractor(double horizon_sec) : horizon_(horizon_sec) {}

void FeatureExtractor::reset() { per_src_.clear(); }

std::vector<double> FeatureExtractor::raw_features(const FlowRecord& r) {
    auto& hist = per_src_[r.src_addr];
    const double cutoff = r.timestamp - horizon_;
    while (!hist.empty() && hist.front().t < cutoff) hist.pop_front();
    hist.push_back({r.timestamp, r.bytes, r.packets, r.dst_port});

    double src_bytes = 0.0, src_packets = 0.0;
    std::set<std::uint16_t> ports;
    for (const SrcEvent& e : hist) {
        src_bytes += static_cast<double>(e.bytes);
        src_packets += static_cast<double>(e.packets);
        ports.insert(e.dst_port);
    }

    const double dur = std::max(r.duration, 1e-3);
    const double bytes = static_cast<double>(r.bytes);
    const double packets = static_cast<double>(r.packets);

    std::vector<double> f(kDim, 0.0);
    f[0] = std::log1p(bytes);
    f[1] = std::log1p(packets);
    f[2] = std::log1p(r.duration);
    f[3] = std::log1p(bytes / packets);
    f[4] = std::log1p(packets / dur);
    f[5] = std::log1p(bytes / dur);
    f[6] = r.protocol == Protocol::TCP ? 1.0 : 0.0;
    f[7] = r.protocol == Protocol::UDP ? 1.0 : 0.0;
    f[8] = r.protocol == Protocol::ICMP ? 1.0 : 0.0;
    f[9] = r.dst_port < 1024 ? 1.0 : 0.0;
    f[10] = (r.dst_port >= 1024 && r.dst_port < 49152) ? 1.0 : 0.0;
    f[11] = r.dst_port >= 49152 ? 1.0 : 0.0;
    f[12] = std::log1p(static_cast<double>(hist.size()));
    f[13] = std::log1p(static_cast<double>(ports.size()));
    f[14] = std::log1p(src_bytes);
    f[15] = std::log1p(src_packets);
    return f;
}

void Normalizer::fit(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw ConfigError("traffic: normalizer fit on empty data");
    const std::size_t dim = rows.front().size();
    lo_.assign(dim, 1e300);
    hi_.assign(dim, -1e300);
    for (const auto& row : rows) {
        if (row.size() != dim) throw ShapeError("traffic: inconsistent feature dimensions in fit");
        for (std::size_t i = 0; i < dim; ++i) {
            lo_[i] = std::min(lo_[i], row[i]);
            hi_[i] = std::max(hi_[i], row[i]);
        }
    }
    fitted_ = true;
}

void Normalizer::set_bounds(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size()) throw ShapeError("traffic: normalizer bounds size mismatch");
    lo_ = std::move(lo);
    hi_ = std::move(hi);
    fitted_ = true;
}

std::vector<double> Normalizer::apply(const std::vector<double>& raw) const {
    if (!fitted_) throw StateError("traffic: normalizer used before fitting");
    if (raw.size() != lo_.size())
        throw ShapeError("traffic: feature vector length " + std::to_string(raw.size()) +
                         ", normalizer expects " + std::to_string(lo_.size()));
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double range = hi_[i] - lo_[i];
        double v = range > 1e-12 ? (raw[i] - lo_[i]) / range : 0.0;
        out[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

FeaturePipeline::FeaturePipeline(Normalizer normalizer, double horizon_sec, bool passthrough)
    : normalizer_(std::move(normalizer)), extractor_(horizon_sec), passthrough_(passthrough) {}

FeatureVector FeaturePipeline::extract(const FlowRecord& record) {
    FeatureVector fv;
    if (passthrough_) {
        fv.values = normalizer_.apply(record.extra);
    } else {
        fv.values = normalizer_.apply(extractor_.raw_features(record));
    }
    fv.label = record.label;
    return fv;
}

FeatureVector extract_features(const FlowRecord& record, FeatureExtractor& extractor,
                               const Normalizer& normalizer) {
    FeatureVector fv;
    fv.values = normalizer.apply(extractor.raw_features(record));
    fv.label = record.label;
    return fv;
}

// ---------------------------------------------------------------- windows

std::vector<TrafficWindow> make_windows(std::span<const FeatureVector> stream, int w, int stride) {
    if (w < 1) throw ConfigError("traffic: window length must be >= 1");
    if (stride < 1) throw ConfigError("traffic: window stride must be >= 1");
    std::vector<TrafficWindow> out;
    const std::size_t n = stream.size();
    for (std::size_t k = 0;; ++k) {
        const std::size_t begin = k * static_cast<std::size_t>(stride);
        if (begin + w > n) break;
        TrafficWindow win;
        win.window_index = k;
        win.features.assign(stream.begin() + begin, stream.begin() + begin + w);
        out.push_back(std::move(win));
    }
    return out;
}

} // namespace adfrl::traffic
