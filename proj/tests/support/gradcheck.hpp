#pragma once

#include "contam/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace contam::testing {

struct GradConfig {
    std::vector<cnn::LayerSpec> layers;
    cnn::Shape input;
};

/// Small random network (inputs up to 2x8x8) ending in dense(1) + sigmoid.
inline GradConfig random_grad_config(std::mt19937_64& rng) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
    GradConfig cfg;
    cfg.input = {uni(1, 2), uni(4, 8), uni(4, 8)};
    cnn::Shape s = cfg.input;
    auto add = [&](cnn::LayerSpec l) {
        s = cnn::output_shape(l, s, cfg.layers.size());
        cfg.layers.push_back(l);
    };
    auto activation = [&] {
        const int a = uni(0, 4);
        if (a <= 2) add(cnn::LayerSpec::relu());
        else if (a == 3) add(cnn::LayerSpec::sigmoid());
    };
    if (coin(0.85)) {
        add(cnn::LayerSpec::conv(uni(1, 3), uni(1, std::min(3, std::min(s.h, s.w)))));
        activation();
    }
    if (coin(0.6)) {
        const int m = uni(1, std::min(3, std::min(s.h, s.w)));
        add(cnn::LayerSpec::maxpool(m));
    }
    if (coin(0.4) && std::min(s.h, s.w) >= 2) {
        add(cnn::LayerSpec::conv(uni(1, 3), uni(1, 2)));
        activation();
    }
    if (coin(0.4)) add(cnn::LayerSpec::dropout(std::uniform_real_distribution<double>(0.1, 0.6)(rng)));
    if (coin(0.7)) {
        add(cnn::LayerSpec::dense(uni(1, 5)));
        activation();
        if (coin(0.3)) add(cnn::LayerSpec::dropout(0.5));
    }
    add(cnn::LayerSpec::dense(1));
    add(cnn::LayerSpec::sigmoid());
    return cfg;
}

/// ReLU sign patterns and pooling argmaxes; a finite difference is only meaningful when these agree.
inline std::vector<std::uint32_t> branch_signature(const cnn::Model& model, const cnn::Cache& cache) {
    std::vector<std::uint32_t> sig;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        if (model.layers()[i].kind == cnn::LayerKind::relu) {
            for (double v : cache.inputs[i].data) sig.push_back(v > 0.0);
        } else if (model.layers()[i].kind == cnn::LayerKind::maxpool) {
            sig.insert(sig.end(), cache.argmax[i].begin(), cache.argmax[i].end());
        }
    }
    return sig;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped = 0;
    std::set<cnn::LayerKind> kinds;
};

inline double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

/// Central differences (step h) of both the probability and the logit against backward()/backward_logit(),
/// over every parameter and every input value. Dropout masks are held fixed by reseeding.
inline GradCheckResult check_gradients(cnn::Model& model, const cnn::Tensor& x, std::uint64_t seed, bool training,
                                       double h = 1e-5) {
    GradCheckResult res;
    for (const auto& l : model.layers()) res.kinds.insert(l.kind);
    auto run = [&](const cnn::Tensor& in) {
        std::mt19937_64 rng(seed);
        return cnn::forward(model, in, training, rng);
    };
    const auto base = run(x);
    const auto sig = branch_signature(model, base.cache);
    const auto gp = cnn::backward(model, base.cache, 1.0);
    const auto gz = cnn::backward_logit(model, base.cache, 1.0);

    auto probe = [&](double& slot, double analytic_p, double analytic_z, bool is_param) {
        const double saved = slot;
        slot = saved + h;
        if (is_param) model.touch();
        const auto plus = run(x);
        slot = saved - h;
        if (is_param) model.touch();
        const auto minus = run(x);
        slot = saved;
        if (is_param) model.touch();
        if (branch_signature(model, plus.cache) != sig || branch_signature(model, minus.cache) != sig) {
            ++res.skipped;
            return;
        }
        const double np = (plus.probability - minus.probability) / (2 * h);
        const double nz = (plus.logit - minus.logit) / (2 * h);
        res.max_rel_error = std::max({res.max_rel_error, rel_error(analytic_p, np), rel_error(analytic_z, nz)});
        ++res.checked;
    };

    for (std::size_t li = 0; li < model.params().size(); ++li) {
        auto& p = model.params()[li];
        for (std::size_t j = 0; j < p.weight.data.size(); ++j) {
            probe(p.weight.data[j], gp.params[li].weight.data[j], gz.params[li].weight.data[j], true);
        }
        for (std::size_t j = 0; j < p.bias.data.size(); ++j) {
            probe(p.bias.data[j], gp.params[li].bias.data[j], gz.params[li].bias.data[j], true);
        }
    }
    cnn::Tensor xi = x;
    for (std::size_t j = 0; j < xi.data.size(); ++j) {
        const double saved = xi.data[j];
        auto fx = [&](double v) {
            xi.data[j] = v;
            return run(xi);
        };
        const auto plus = fx(saved + h);
        const auto minus = fx(saved - h);
        xi.data[j] = saved;
        if (branch_signature(model, plus.cache) != sig || branch_signature(model, minus.cache) != sig) {
            ++res.skipped;
            continue;
        }
        const double np = (plus.probability - minus.probability) / (2 * h);
        const double nz = (plus.logit - minus.logit) / (2 * h);
        res.max_rel_error =
            std::max({res.max_rel_error, rel_error(gp.input.data[j], np), rel_error(gz.input.data[j], nz)});
        ++res.checked;
    }
    return res;
}

/// Random parameters, random biases, random input in [0, 1].
inline cnn::Tensor randomize(cnn::Model& model, std::mt19937_64& rng) {
    model.initialize(rng());
    std::uniform_real_distribution<double> b(-0.5, 0.5), u(0.0, 1.0);
    for (auto& p : model.params()) {
        for (double& v : p.bias.data) v = b(rng);
    }
    model.touch();
    cnn::Tensor x(model.input_shape());
    for (double& v : x.data) v = u(rng);
    return x;
}

}  // namespace contam::testing
