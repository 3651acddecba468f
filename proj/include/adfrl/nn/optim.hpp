#ifndef ADFRL_NN_OPTIM_HPP
#define ADFRL_NN_OPTIM_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adfrl/nn/tensor.hpp"

namespace adfrl::nn {

// Named view over one parameter block and its gradient buffer. Models hand
// these out so optimizers, gradient checks and checkpoints can treat every
// architecture uniformly.
struct ParamRef {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

void zero_grads(std::span<ParamRef> params);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::span<ParamRef> params) = 0;
    virtual void reset() = 0;
};

class Sgd final : public Optimizer {
public:
    explicit Sgd(double lr) : lr_(lr) {}
    void step(std::span<ParamRef> params) override;
    void reset() override {}

private:
    double lr_;
};

// Adam with bias correction. Moment buffers are keyed by parameter name, so
// the same optimizer instance must only ever drive one model.
class Adam final : public Optimizer {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(std::span<ParamRef> params) override;
    void reset() override;

private:
    struct Moments {
        std::vector<double> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Moments> state_;
};

enum class OptimKind { SGD, ADAM };

std::unique_ptr<Optimizer> make_optimizer(OptimKind kind, double lr);

// Runs the model's backward pass (the callable must populate every grad
// buffer; it throws StateError if no forward pass preceded it), applies one
// optimizer step, then clears the gradient buffers.
template <typename BackwardFn>
void backward_and_step(BackwardFn&& backward, std::span<ParamRef> params, Optimizer& opt) {
    backward();
    opt.step(params);
    zero_grads(params);
}

} // namespace adfrl::nn

#endif
