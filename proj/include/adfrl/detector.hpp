#ifndef ADFRL_DETECTOR_HPP
#define ADFRL_DETECTOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adfrl/nn/checkpoint.hpp"
#include "adfrl/nn/layers.hpp"
#include "adfrl/traffic.hpp"

namespace adfrl::detector {

struct DetectorHyper {
    int input_dim = 16;   // D, must match the feature pipeline
    int hidden = 16;      // H
    int kernel = 3;       // K
    int channels = 8;     // C
    double learning_rate = 0.001;
    int epochs = 5;
    int batch_size = 32;
    double val_fraction = 0.2;
    // Window label: any member malicious (default) or majority vote.
    bool majority_label = false;
    nn::OptimKind optimizer = nn::OptimKind::ADAM;
};

struct AnomalyScore {
    double omega = 0.0; // in [0, 1]
    std::size_t window_index = 0;
};

enum class Classification : std::uint8_t { FLAGGED, CLEAR };

// FLAGGED iff omega strictly exceeds the threshold.
Classification classify(const AnomalyScore& score, double threshold);

struct TrainEpoch {
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainReport {
    std::vector<TrainEpoch> epochs;
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
};

// Anomaly scorer: an LSTM encodes the window's feature vectors, a 1-D
// convolution with ReLU filters the hidden-state sequence over time, the
// result is mean-pooled and a sigmoid head emits the anomaly likelihood.
class DetectorModel {
public:
    explicit DetectorModel(DetectorHyper hyper);

    void init(std::uint64_t seed);

    // Pure; safe to call concurrently on a shared const model.
    AnomalyScore score(const traffic::TrafficWindow& window) const;
    double score_values(const std::vector<nn::Vec>& window_values) const;

    const DetectorHyper& hyper() const { return hyper_; }
    std::vector<nn::ParamRef> params();

    // Pre-sigmoid forward with caches for training and gradient checks.
    struct ForwardCaches {
        nn::Lstm::Cache lstm;
        nn::Conv1dRelu::Cache conv;
        nn::Dense::Cache head;
        int pooled_len = 0;
    };
    double forward_logit(const std::vector<nn::Vec>& window_values,
                         ForwardCaches* caches = nullptr) const;
    // Backprop from dL/dlogit; accumulates into the layer gradient buffers.
    void backward_from_logit(double grad_logit, const ForwardCaches& caches);

    void save(const std::string& path) const;
    static DetectorModel load(const std::string& path);

private:
    DetectorHyper hyper_;
    nn::Lstm lstm_;
    nn::Conv1dRelu conv_;
    nn::Dense head_;
};

// Minimizes class-weighted binary cross-entropy of the window score against
// the window label. Deterministic for a fixed seed. Throws ConfigError on
// empty or single-class data.
TrainReport train(DetectorModel& model, std::span<const traffic::TrafficWindow> data,
                  std::uint64_t seed);

std::string train_report_csv(const TrainReport& report);

} // namespace adfrl::detector

#endif
