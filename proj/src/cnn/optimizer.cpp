#include "contam/cnn.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <cmath>

namespace contam::cnn {

LossValue weighted_bce(double p, int y, ClassWeights w) {
    if (y != 0 && y != 1) throw UsageError("label must be 0 or 1");
    const double pc = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    LossValue out;
    if (y == 1) {
        out.loss = -w.tc * std::log(pc);
        out.dloss_dp = -w.tc / pc;
        out.dloss_dlogit = -w.tc * (1.0 - p);
    } else {
        out.loss = -w.fc * std::log(1.0 - pc);
        out.dloss_dp = w.fc / (1.0 - pc);
        out.dloss_dlogit = w.fc * p;
    }
    return out;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long long step, double alpha, double beta1) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw UsageError("adam_update: mismatched block sizes");
    }
    if (step < 1) throw UsageError("adam_update: step counter must be >= 1");
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= alpha * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
}

void adam_step(Model& model, const Gradients& grads, AdamState& state, double alpha, double mu) {
    auto& params = model.params();
    if (grads.params.size() != params.size()) throw UsageError("gradients do not match the model");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.push_back({Tensor(p.weight.shape), Tensor(p.bias.shape)});
            state.v.push_back({Tensor(p.weight.shape), Tensor(p.bias.shape)});
        }
    }
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_update(params[i].weight.data, grads.params[i].weight.data, state.m[i].weight.data, state.v[i].weight.data,
                    state.step, alpha, mu);
        adam_update(params[i].bias.data, grads.params[i].bias.data, state.m[i].bias.data, state.v[i].bias.data,
                    state.step, alpha, mu);
    }
    model.touch();
}

}  // namespace contam::cnn
