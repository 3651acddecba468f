#include "adfrl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace adfrl::nn {

GradCheckReport gradient_check(std::span<ParamRef> params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& backward_fn,
                               double tolerance,
                               double fd_step) {
    zero_grads(params);
    backward_fn();

    // Snapshot analytic gradients before the probing loop disturbs anything.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const ParamRef& p : params)
        analytic.emplace_back(p.grad.begin(), p.grad.end());

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        ParamRef& p = params[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + fd_step;
            const double plus = loss_fn();
            p.value[i] = saved - fd_step;
            const double minus = loss_fn();
            p.value[i] = saved;

            const double numeric = (plus - minus) / (2.0 * fd_step);
            const double ga = analytic[pi][i];
            const double denom = std::max({std::fabs(ga), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(ga - numeric) / denom;

            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = {p.name, i, ga, numeric, rel};
            }
            if (rel > tolerance) report.flagged.push_back({p.name, i, ga, numeric, rel});
        }
    }
    zero_grads(params);
    return report;
}

} // namespace adfrl::nn
