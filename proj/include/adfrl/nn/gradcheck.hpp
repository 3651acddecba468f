#ifndef ADFRL_NN_GRADCHECK_HPP
#define ADFRL_NN_GRADCHECK_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adfrl/nn/optim.hpp"

namespace adfrl::nn {

struct GradCheckEntry {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    std::size_t checked = 0;
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    std::vector<GradCheckEntry> flagged; // entries whose rel_err exceeds the tolerance

    bool ok() const { return flagged.empty(); }
};

// Compares analytic gradients against central finite differences.
//
// `loss_fn` must run a pure forward pass and return the scalar loss for the
// current parameter values. `backward_fn` must populate every gradient
// buffer for the same sample (it is invoked once, after zeroing grads).
// Relative error per scalar: |ga - gfd| / max(|ga|, |gfd|, 1e-8).
GradCheckReport gradient_check(std::span<ParamRef> params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& backward_fn,
                               double tolerance,
                               double fd_step = 1e-5);

} // namespace adfrl::nn

#endif
