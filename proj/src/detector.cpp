#include "adfrl/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace adfrl::detector {

using nn::Seq;
using nn::Vec;

Classification classify(const AnomalyScore& score, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigError("detector: threshold must lie in [0,1]");
    return score.omega > threshold ? Classification::FLAGGED : Classification::CLEAR;
}

namespace {

// Runs before the layer members are constructed, so a bad hyper surfaces as
// one ConfigError instead of a layer-level shape failure.
DetectorHyper checked(DetectorHyper hyper) {
    if (hyper.input_dim < 1 || hyper.hidden < 1 || hyper.kernel < 1 || hyper.channels < 1)
        throw ConfigError("detector: all layer dimensions must be positive");
    return hyper;
}

} // namespace

DetectorModel::DetectorModel(DetectorHyper hyper)
    : hyper_(checked(hyper)),
      lstm_(hyper.input_dim, hyper.hidden, "detector.lstm"),
      conv_(hyper.hidden, hyper.channels, hyper.kernel, "detector.conv"),
      head_(hyper.channels, 1, "detector.head") {}

void DetectorModel::init(std::uint64_t seed) {
    Rng rng(seed);
    lstm_.init_uniform(rng);
    conv_.init_uniform(rng);
    head_.init_uniform(rng);
}

double DetectorModel::forward_logit(const std::vector<Vec>& window_values,
                                    ForwardCaches* caches) const {
    if (static_cast<int>(window_values.size()) < hyper_.kernel)
        throw ShapeError("detector: window shorter than convolution kernel");
    const Seq hidden = lstm_.forward(window_values, caches ? &caches->lstm : nullptr);
    const Seq filtered = conv_.forward(hidden, caches ? &caches->conv : nullptr);

    // Mean-pool over the time axis to a fixed-size vector.
    Vec pooled(hyper_.channels, 0.0);
    for (const Vec& v : filtered)
        for (int c = 0; c < hyper_.channels; ++c) pooled[c] += v[c];
    const double inv_t = 1.0 / static_cast<double>(filtered.size());
    for (double& v : pooled) v *= inv_t;
    if (caches) caches->pooled_len = static_cast<int>(filtered.size());

    return head_.forward(pooled, caches ? &caches->head : nullptr)[0];
}

void DetectorModel::backward_from_logit(double grad_logit, const ForwardCaches& caches) {
    const Vec grad_pooled = head_.backward({grad_logit}, caches.head);
    const double inv_t = 1.0 / static_cast<double>(caches.pooled_len);
    Seq grad_filtered(caches.pooled_len, Vec(hyper_.channels));
    for (int t = 0; t < caches.pooled_len; ++t)
        for (int c = 0; c < hyper_.channels; ++c) grad_filtered[t][c] = grad_pooled[c] * inv_t;
    const Seq grad_hidden = conv_.backward(grad_filtered, caches.conv);
    lstm_.backward(grad_hidden, caches.lstm);
}

double DetectorModel::score_values(const std::vector<Vec>& window_values) const {
    return nn::sigmoid(forward_logit(window_values));
}

AnomalyScore DetectorModel::score(const traffic::TrafficWindow& window) const {
    std::vector<Vec> values;
    values.reserve(window.features.size());
    for (const traffic::FeatureVector& f : window.features) values.push_back(f.values);
    return {score_values(values), window.window_index};
}

std::vector<nn::ParamRef> DetectorModel::params() {
    std::vector<nn::ParamRef> out;
    for (auto& p : lstm_.params()) out.push_back(std::move(p));
    for (auto& p : conv_.params()) out.push_back(std::move(p));
    for (auto& p : head_.params()) out.push_back(std::move(p));
    return out;
}

void DetectorModel::save(const std::string& path) const {
    auto& self = const_cast<DetectorModel&>(*this);
    std::map<std::string, std::string> meta;
    meta["kind"] = "detector";
    meta["input_dim"] = std::to_string(hyper_.input_dim);
    meta["hidden"] = std::to_string(hyper_.hidden);
    meta["kernel"] = std::to_string(hyper_.kernel);
    meta["channels"] = std::to_string(hyper_.channels);
    auto params = self.params();
    nn::save_params(path, params, meta);
}

DetectorModel DetectorModel::load(const std::string& path) {
    // Meta lines sit directly below the header; read them first to size the
    // model, then load the parameters into it.
    std::ifstream in(path);
    if (!in) throw IoError("detector: cannot open checkpoint: " + path);
    DetectorHyper probe;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag, key;
        ls >> tag >> key;
        if (tag != "meta") break;
        int v = 0;
        ls >> v;
        if (key == "input_dim") probe.input_dim = v;
        if (key == "hidden") probe.hidden = v;
        if (key == "kernel") probe.kernel = v;
        if (key == "channels") probe.channels = v;
    }
    in.close();
    DetectorModel model(probe);
    auto params = model.params();
    nn::load_params(path, params);
    return model;
}

// ---------------------------------------------------------------- training

namespace {

bool window_label(const traffic::TrafficWindow& w, const DetectorHyper& hyper) {
    return hyper.majority_label ? w.majority_malicious() : w.any_malicious();
}

double accuracy(const DetectorModel& model, std::span<const std::size_t> indices,
                std::span<const traffic::TrafficWindow> data, const DetectorHyper& hyper) {
    if (indices.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const double omega = model.score(data[idx]).omega;
        const bool predicted = omega > 0.5;
        if (predicted == window_label(data[idx], hyper)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

} // namespace

TrainReport train(DetectorModel& model, std::span<const traffic::TrafficWindow> data,
                  std::uint64_t seed) {
    const DetectorHyper& hyper = model.hyper();
    if (data.empty()) throw ConfigError("detector: training data is empty");

    std::size_t positives = 0;
    for (const auto& w : data) positives += window_label(w, hyper) ? 1 : 0;
    if (positives == 0 || positives == data.size())
        throw ConfigError("detector: training data contains a single class only");

    TrainReport report;
    if (hyper.epochs <= 0) return report;

    // Deterministic shuffle, then split off the validation tail.
    Rng rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    const std::size_t val_count =
        std::min(data.size() - 1,
                 static_cast<std::size_t>(std::floor(hyper.val_fraction * data.size())));
    std::vector<std::size_t> train_idx(order.begin(), order.end() - val_count);
    std::vector<std::size_t> val_idx(order.end() - val_count, order.end());

    std::size_t train_pos = 0;
    for (std::size_t idx : train_idx) train_pos += window_label(data[idx], hyper) ? 1 : 0;
    if (train_pos == 0 || train_pos == train_idx.size())
        throw ConfigError("detector: training split contains a single class only");

    // Inverse-frequency class weights.
    const double n = static_cast<double>(train_idx.size());
    const double w_pos = n / (2.0 * static_cast<double>(train_pos));
    const double w_neg = n / (2.0 * static_cast<double>(train_idx.size() - train_pos));

    auto optimizer = nn::make_optimizer(hyper.optimizer, hyper.learning_rate);
    auto params = model.params();

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[rng.uniform_int(i)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(hyper.batch_size)) {
            const std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(hyper.batch_size));
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            for (std::size_t bi = start; bi < stop; ++bi) {
                const traffic::TrafficWindow& win = data[train_idx[bi]];
                std::vector<Vec> values;
                values.reserve(win.features.size());
                for (const auto& f : win.features) values.push_back(f.values);

                DetectorModel::ForwardCaches caches;
                const double logit = model.forward_logit(values, &caches);
                const double omega = nn::sigmoid(logit);
                const double y = window_label(win, hyper) ? 1.0 : 0.0;
                const double cw = y > 0.5 ? w_pos : w_neg;
                const double p = std::clamp(omega, 1e-12, 1.0 - 1e-12);
                loss_sum += -cw * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
                // d(BCE)/dlogit = omega - y, scaled by the class weight and
                // the batch-mean factor.
                model.backward_from_logit(cw * (omega - y) * inv_b, caches);
            }
            optimizer->step(params);
            nn::zero_grads(params);
        }

        TrainEpoch row;
        row.epoch = epoch;
        row.loss = loss_sum / static_cast<double>(train_idx.size());
        row.train_acc = accuracy(model, train_idx, data, hyper);
        row.val_acc = accuracy(model, val_idx, data, hyper);
        report.epochs.push_back(row);
    }
    report.final_train_acc = report.epochs.back().train_acc;
    report.final_val_acc = report.epochs.back().val_acc;
    return report;
}

std::string train_report_csv(const TrainReport& report) {
    std::ostringstream out;
    out << "epoch,loss,train_acc,val_acc\n";
    char buf[128];
    for (const TrainEpoch& e : report.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.loss, e.train_acc,
                      e.val_acc);
        out << buf;
    }
    return out.str();
}

} // namespace adfrl::detector
