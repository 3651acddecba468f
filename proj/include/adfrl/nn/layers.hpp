#ifndef ADFRL_NN_LAYERS_HPP
#define ADFRL_NN_LAYERS_HPP

#include <vector>

#include "adfrl/nn/optim.hpp"
#include "adfrl/nn/tensor.hpp"
#include "adfrl/rng.hpp"

namespace adfrl::nn {

using Seq = std::vector<Vec>; // time-major sequence of equally sized vectors

// ----------------------------------------------------------------------------
// Dense (affine) layer: y = W x + b.
//
// Forward is const and pure; when the caller passes a Cache the inputs needed
// for backward are recorded there. backward() accumulates into the layer's
// gradient buffers and returns the gradient w.r.t. the input.
// ----------------------------------------------------------------------------
class Dense {
public:
    struct Cache {
        Vec x;
    };

    // With bias disabled the layer is the pure linear map y = W x; the bias
    // vector stays zero and is excluded from params() and checkpoints.
    Dense(int in_dim, int out_dim, std::string name, bool bias = true);

    void init_uniform(Rng& rng); // uniform(-s, s), s = 1/sqrt(fan_in)

    Vec forward(const Vec& x, Cache* cache = nullptr) const;
    Vec backward(const Vec& grad_out, const Cache& cache);

    std::vector<ParamRef> params();
    int in_dim() const { return w_.cols; }
    int out_dim() const { return w_.rows; }
    bool has_bias() const { return bias_; }

    Matrix& weights() { return w_; }
    Vec& bias() { return b_; }
    const Matrix& weights() const { return w_; }
    const Vec& bias() const { return b_; }

private:
    std::string name_;
    bool bias_;
    Matrix w_, gw_;
    Vec b_, gb_;
};

// ----------------------------------------------------------------------------
// 1-D convolution over the time axis with fused ReLU, no padding.
//
// Input: T vectors of in_channels; output: T-K+1 vectors of out_channels.
//   out[t][co] = relu(b[co] + sum_{ci,k} w[co][ci*K+k] * in[t+k][ci])
// ----------------------------------------------------------------------------
class Conv1dRelu {
public:
    struct Cache {
        Seq input;
        Seq preact;
    };

    Conv1dRelu(int in_channels, int out_channels, int kernel_width, std::string name);

    void init_uniform(Rng& rng);

    Seq forward(const Seq& input, Cache* cache = nullptr) const;
    Seq backward(const Seq& grad_out, const Cache& cache);

    std::vector<ParamRef> params();
    int in_channels() const { return in_channels_; }
    int out_channels() const { return w_.rows; }
    int kernel_width() const { return kernel_width_; }

private:
    std::string name_;
    int in_channels_;
    int kernel_width_;
    Matrix w_, gw_; // rows = out_channels, cols = in_channels * K
    Vec b_, gb_;
};

// ----------------------------------------------------------------------------
// LSTM cell and layer.
// ----------------------------------------------------------------------------
struct LstmState {
    Vec hidden;
    Vec cell;
};

// Gate-stacked parameters: rows ordered [input; forget; candidate; output].
struct LstmParams {
    Matrix wx; // 4H x D
    Matrix wh; // 4H x H
    Vec b;     // 4H
    int input_dim() const { return wx.cols; }
    int hidden_dim() const { return wh.cols; }
};

// One cell step: i,f,o = sigmoid(affine), g = tanh(affine),
// cell' = f*cell + i*g, hidden' = o*tanh(cell'). Pure.
LstmState lstm_step(const LstmParams& params, const LstmState& state, const Vec& x);

class Lstm {
public:
    struct StepRecord {
        Vec x, h_prev, c_prev;
        Vec gate_i, gate_f, gate_g, gate_o;
        Vec c, tanh_c;
    };
    struct Cache {
        std::vector<StepRecord> steps;
    };

    Lstm(int input_dim, int hidden_dim, std::string name);

    void init_uniform(Rng& rng);

    // Runs the cell over the whole sequence from a zero state and returns
    // every hidden state h_1..h_T.
    Seq forward(const Seq& input, Cache* cache = nullptr) const;

    // Full BPTT given dL/dh_t for every step; accumulates parameter grads
    // and returns dL/dx_t per step.
    Seq backward(const Seq& grad_hidden, const Cache& cache);

    std::vector<ParamRef> params();
    const LstmParams& raw() const { return p_; }
    LstmParams& raw() { return p_; }
    int input_dim() const { return p_.input_dim(); }
    int hidden_dim() const { return p_.hidden_dim(); }

private:
    std::string name_;
    LstmParams p_;
    Matrix gwx_, gwh_;
    Vec gb_;
};

// ----------------------------------------------------------------------------
// MLP with ReLU between hidden layers and a linear output layer.
// ----------------------------------------------------------------------------
class Mlp {
public:
    struct Cache {
        std::vector<Dense::Cache> dense;
        std::vector<Vec> relu_out; // post-activation values per hidden layer
    };

    Mlp(int input_dim, const std::vector<int>& hidden, int output_dim, std::string name,
        bool bias = true);

    void init_uniform(Rng& rng);

    Vec forward(const Vec& x, Cache* cache = nullptr) const;
    Vec backward(const Vec& grad_out, const Cache& cache);

    std::vector<ParamRef> params();
    int input_dim() const { return layers_.front().in_dim(); }
    int output_dim() const { return layers_.back().out_dim(); }

private:
    std::vector<Dense> layers_;
};

} // namespace adfrl::nn

#endif
