#include "adfrl/nn/layers.hpp"

#include <cmath>
#include <utility>

namespace adfrl::nn {

namespace {

void init_matrix(Matrix& m, int fan_in, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.data) v = rng.uniform(-s, s);
}

void init_vec(Vec& v, int fan_in, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : v) x = rng.uniform(-s, s);
}

// Validates before any buffer is sized from the value.
int checked_dim(int v, const char* msg) {
    if (v < 1) throw ShapeError(msg);
    return v;
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_dim, int out_dim, std::string name, bool bias)
    : name_(std::move(name)),
      bias_(bias),
      w_(checked_dim(out_dim, "nn: dense dimensions must be positive"),
         checked_dim(in_dim, "nn: dense dimensions must be positive")),
      gw_(out_dim, in_dim),
      b_(out_dim, 0.0),
      gb_(out_dim, 0.0) {}

void Dense::init_uniform(Rng& rng) {
    init_matrix(w_, w_.cols, rng);
    if (bias_) init_vec(b_, w_.cols, rng);
}

Vec Dense::forward(const Vec& x, Cache* cache) const {
    Vec y = matvec(w_, x);
    for (int i = 0; i < w_.rows; ++i) y[i] += b_[i];
    if (cache) cache->x = x;
    return y;
}

Vec Dense::backward(const Vec& grad_out, const Cache& cache) {
    if (cache.x.empty()) throw StateError("nn: dense backward before forward");
    if (static_cast<int>(grad_out.size()) != w_.rows)
        throw ShapeError("nn: dense backward gradient length mismatch");
    add_outer(gw_, grad_out, cache.x);
    if (bias_) add_into(gb_, grad_out);
    return matvec_transposed(w_, grad_out);
}

std::vector<ParamRef> Dense::params() {
    std::vector<ParamRef> out;
    out.push_back({name_ + ".w", std::span<double>(w_.data), std::span<double>(gw_.data)});
    if (bias_) out.push_back({name_ + ".b", std::span<double>(b_), std::span<double>(gb_)});
    return out;
}

// ---------------------------------------------------------------- Conv1dRelu

Conv1dRelu::Conv1dRelu(int in_channels, int out_channels, int kernel_width, std::string name)
    : name_(std::move(name)),
      in_channels_(checked_dim(in_channels, "nn: conv1d dimensions must be positive")),
      kernel_width_(checked_dim(kernel_width, "nn: conv1d dimensions must be positive")),
      w_(checked_dim(out_channels, "nn: conv1d dimensions must be positive"),
         in_channels * kernel_width),
      gw_(out_channels, in_channels * kernel_width),
      b_(out_channels, 0.0),
      gb_(out_channels, 0.0) {}

void Conv1dRelu::init_uniform(Rng& rng) {
    init_matrix(w_, w_.cols, rng);
    init_vec(b_, w_.cols, rng);
}

Seq Conv1dRelu::forward(const Seq& input, Cache* cache) const {
    const int t_in = static_cast<int>(input.size());
    if (t_in < kernel_width_)
        throw ShapeError("nn: conv1d input length " + std::to_string(t_in) +
                         " shorter than kernel width " + std::to_string(kernel_width_));
    for (const Vec& v : input)
        if (static_cast<int>(v.size()) != in_channels_)
            throw ShapeError("nn: conv1d channel count mismatch");

    const int t_out = t_in - kernel_width_ + 1;
    Seq pre(t_out), out(t_out);
    for (int t = 0; t < t_out; ++t) {
        Vec z(w_.rows, 0.0);
        for (int co = 0; co < w_.rows; ++co) {
            double acc = b_[co];
            const double* row = w_.data.data() + static_cast<std::size_t>(co) * w_.cols;
            for (int k = 0; k < kernel_width_; ++k) {
                const Vec& xv = input[t + k];
                const double* wk = row + static_cast<std::size_t>(k) * in_channels_;
                for (int ci = 0; ci < in_channels_; ++ci) acc += wk[ci] * xv[ci];
            }
            z[co] = acc;
        }
        pre[t] = z;
        Vec& y = out[t];
        y.resize(w_.rows);
        for (int co = 0; co < w_.rows; ++co) y[co] = z[co] > 0.0 ? z[co] : 0.0;
    }
    if (cache) {
        cache->input = input;
        cache->preact = std::move(pre);
    }
    return out;
}

Seq Conv1dRelu::backward(const Seq& grad_out, const Cache& cache) {
    if (cache.input.empty()) throw StateError("nn: conv1d backward before forward");
    const int t_out = static_cast<int>(cache.preact.size());
    if (static_cast<int>(grad_out.size()) != t_out)
        throw ShapeError("nn: conv1d backward sequence length mismatch");

    Seq grad_in(cache.input.size(), Vec(in_channels_, 0.0));
    for (int t = 0; t < t_out; ++t) {
        for (int co = 0; co < w_.rows; ++co) {
            if (cache.preact[t][co] <= 0.0) continue; // ReLU mask
            const double g = grad_out[t][co];
            if (g == 0.0) continue;
            gb_[co] += g;
            double* grow = gw_.data.data() + static_cast<std::size_t>(co) * gw_.cols;
            const double* wrow = w_.data.data() + static_cast<std::size_t>(co) * w_.cols;
            for (int k = 0; k < kernel_width_; ++k) {
                const Vec& xv = cache.input[t + k];
                Vec& gx = grad_in[t + k];
                double* gk = grow + static_cast<std::size_t>(k) * in_channels_;
                const double* wk = wrow + static_cast<std::size_t>(k) * in_channels_;
                for (int ci = 0; ci < in_channels_; ++ci) {
                    gk[ci] += g * xv[ci];
                    gx[ci] += g * wk[ci];
                }
            }
        }
    }
    return grad_in;
}

std::vector<ParamRef> Conv1dRelu::params() {
    return {
        {name_ + ".w", std::span<double>(w_.data), std::span<double>(gw_.data)},
        {name_ + ".b", std::span<double>(b_), std::span<double>(gb_)},
    };
}

// ---------------------------------------------------------------- LSTM

namespace {

struct Gates {
    Vec i, f, g, o, c, tanh_c;
};

Gates run_gates(const LstmParams& p, const Vec& h_prev, const Vec& c_prev, const Vec& x) {
    const int h = p.hidden_dim();
    if (static_cast<int>(x.size()) != p.input_dim())
        throw ShapeError("nn: lstm input length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(p.input_dim()));
    if (static_cast<int>(h_prev.size()) != h || static_cast<int>(c_prev.size()) != h)
        throw ShapeError("nn: lstm state length mismatch");

    Vec z = matvec(p.wx, x);
    const Vec zh = matvec(p.wh, h_prev);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += zh[j] + p.b[j];

    Gates gs;
    gs.i.resize(h);
    gs.f.resize(h);
    gs.g.resize(h);
    gs.o.resize(h);
    gs.c.resize(h);
    gs.tanh_c.resize(h);
    for (int j = 0; j < h; ++j) {
        gs.i[j] = sigmoid(z[j]);
        gs.f[j] = sigmoid(z[h + j]);
        gs.g[j] = std::tanh(z[2 * h + j]);
        gs.o[j] = sigmoid(z[3 * h + j]);
        gs.c[j] = gs.f[j] * c_prev[j] + gs.i[j] * gs.g[j];
        gs.tanh_c[j] = std::tanh(gs.c[j]);
    }
    return gs;
}

} // namespace

LstmState lstm_step(const LstmParams& params, const LstmState& state, const Vec& x) {
    const Gates gs = run_gates(params, state.hidden, state.cell, x);
    const int h = params.hidden_dim();
    LstmState next;
    next.hidden.resize(h);
    next.cell = gs.c;
    for (int j = 0; j < h; ++j) next.hidden[j] = gs.o[j] * gs.tanh_c[j];
    return next;
}

Lstm::Lstm(int input_dim, int hidden_dim, std::string name) : name_(std::move(name)) {
    if (input_dim < 1 || hidden_dim < 1)
        throw ShapeError("nn: lstm dimensions must be positive");
    p_.wx = Matrix(4 * hidden_dim, input_dim);
    p_.wh = Matrix(4 * hidden_dim, hidden_dim);
    p_.b = Vec(4 * hidden_dim, 0.0);
    gwx_ = Matrix(4 * hidden_dim, input_dim);
    gwh_ = Matrix(4 * hidden_dim, hidden_dim);
    gb_ = Vec(4 * hidden_dim, 0.0);
}

void Lstm::init_uniform(Rng& rng) {
    const int fan_in = p_.input_dim() + p_.hidden_dim();
    init_matrix(p_.wx, fan_in, rng);
    init_matrix(p_.wh, fan_in, rng);
    init_vec(p_.b, fan_in, rng);
}

Seq Lstm::forward(const Seq& input, Cache* cache) const {
    const int h = p_.hidden_dim();
    Vec hv(h, 0.0), cv(h, 0.0);
    Seq hidden_seq;
    hidden_seq.reserve(input.size());
    if (cache) {
        cache->steps.clear();
        cache->steps.reserve(input.size());
    }
    for (const Vec& x : input) {
        const Gates gs = run_gates(p_, hv, cv, x);
        Vec h_next(h);
        for (int j = 0; j < h; ++j) h_next[j] = gs.o[j] * gs.tanh_c[j];
        if (cache) {
            StepRecord rec;
            rec.x = x;
            rec.h_prev = hv;
            rec.c_prev = cv;
            rec.gate_i = gs.i;
            rec.gate_f = gs.f;
            rec.gate_g = gs.g;
            rec.gate_o = gs.o;
            rec.c = gs.c;
            rec.tanh_c = gs.tanh_c;
            cache->steps.push_back(std::move(rec));
        }
        cv = gs.c;
        hv = std::move(h_next);
        hidden_seq.push_back(hv);
    }
    return hidden_seq;
}

Seq Lstm::backward(const Seq& grad_hidden, const Cache& cache) {
    if (cache.steps.empty()) throw StateError("nn: lstm backward before forward");
    const int steps = static_cast<int>(cache.steps.size());
    if (static_cast<int>(grad_hidden.size()) != steps)
        throw ShapeError("nn: lstm backward sequence length mismatch");
    const int h = p_.hidden_dim();

    Seq grad_in(steps);
    Vec dh_next(h, 0.0), dc_next(h, 0.0);
    Vec dgates(4 * h, 0.0);
    for (int t = steps - 1; t >= 0; --t) {
        const StepRecord& rec = cache.steps[t];
        for (int j = 0; j < h; ++j) {
            const double dh = grad_hidden[t][j] + dh_next[j];
            const double o = rec.gate_o[j];
            const double tc = rec.tanh_c[j];
            const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            const double i = rec.gate_i[j];
            const double f = rec.gate_f[j];
            const double g = rec.gate_g[j];
            dgates[j] = dc * g * i * (1.0 - i);                  // input gate
            dgates[h + j] = dc * rec.c_prev[j] * f * (1.0 - f);  // forget gate
            dgates[2 * h + j] = dc * i * (1.0 - g * g);          // candidate
            dgates[3 * h + j] = dh * tc * o * (1.0 - o);         // output gate
            dc_next[j] = dc * f;
        }
        add_outer(gwx_, dgates, rec.x);
        add_outer(gwh_, dgates, rec.h_prev);
        add_into(gb_, dgates);
        dh_next = matvec_transposed(p_.wh, dgates);
        grad_in[t] = matvec_transposed(p_.wx, dgates);
    }
    return grad_in;
}

std::vector<ParamRef> Lstm::params() {
    return {
        {name_ + ".wx", std::span<double>(p_.wx.data), std::span<double>(gwx_.data)},
        {name_ + ".wh", std::span<double>(p_.wh.data), std::span<double>(gwh_.data)},
        {name_ + ".b", std::span<double>(p_.b), std::span<double>(gb_)},
    };
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(int input_dim, const std::vector<int>& hidden, int output_dim, std::string name,
         bool bias) {
    int prev = input_dim;
    int idx = 0;
    for (int hdim : hidden) {
        layers_.emplace_back(prev, hdim, name + ".fc" + std::to_string(idx++), bias);
        prev = hdim;
    }
    layers_.emplace_back(prev, output_dim, name + ".fc" + std::to_string(idx), bias);
}

void Mlp::init_uniform(Rng& rng) {
    for (Dense& l : layers_) l.init_uniform(rng);
}

Vec Mlp::forward(const Vec& x, Cache* cache) const {
    if (cache) {
        cache->dense.assign(layers_.size(), {});
        cache->relu_out.assign(layers_.size() - 1, {});
    }
    Vec a = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        a = layers_[li].forward(a, cache ? &cache->dense[li] : nullptr);
        if (li + 1 < layers_.size()) {
            for (double& v : a)
                if (v < 0.0) v = 0.0;
            if (cache) cache->relu_out[li] = a;
        }
    }
    return a;
}

Vec Mlp::backward(const Vec& grad_out, const Cache& cache) {
    if (cache.dense.size() != layers_.size()) throw StateError("nn: mlp backward before forward");
    Vec g = grad_out;
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        g = layers_[li].backward(g, cache.dense[li]);
        if (li > 0) {
            const Vec& act = cache.relu_out[li - 1];
            for (std::size_t j = 0; j < g.size(); ++j)
                if (act[j] <= 0.0) g[j] = 0.0;
        }
    }
    return g;
}

std::vector<ParamRef> Mlp::params() {
    std::vector<ParamRef> out;
    for (Dense& l : layers_)
        for (ParamRef& p : l.params()) out.push_back(std::move(p));
    return out;
}

} // namespace adfrl::nn
