#include "contam/cnn.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace contam::cnn {

namespace {

std::uint64_t next_model_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void conv_forward(const Tensor& in, const LayerParams& p, int filters, int k, Tensor& out) {
    const int C = in.shape.c, H = in.shape.h, W = in.shape.w;
    const int OH = H - k + 1, OW = W - k + 1;
    for (int f = 0; f < filters; ++f) {
        double* dst = out.channel(f);
        std::fill(dst, dst + static_cast<std::size_t>(OH) * OW, p.bias.data[f]);
        for (int c = 0; c < C; ++c) {
            const double* src = in.channel(c);
            const double* wk = p.weight.data.data() + (static_cast<std::size_t>(f) * C + c) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double w = wk[ky * k + kx];
                    for (int y = 0; y < OH; ++y) {
                        const double* s = src + static_cast<std::size_t>(y + ky) * W + kx;
                        double* d = dst + static_cast<std::size_t>(y) * OW;
                        for (int x = 0; x < OW; ++x) d[x] += w * s[x];
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& in, const LayerParams& p, int filters, int k, const Tensor& dout, LayerParams& dp,
                   Tensor& din) {
    const int C = in.shape.c, W = in.shape.w;
    const int OH = dout.shape.h, OW = dout.shape.w;
    for (int f = 0; f < filters; ++f) {
        const double* g = dout.channel(f);
        double db = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(OH) * OW; ++i) db += g[i];
        dp.bias.data[f] += db;
        for (int c = 0; c < C; ++c) {
            const double* src = in.channel(c);
            double* dsrc = din.channel(c);
            const std::size_t base = (static_cast<std::size_t>(f) * C + c) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double w = p.weight.data[base + ky * k + kx];
                    double dw = 0.0;
                    for (int y = 0; y < OH; ++y) {
                        const double* s = src + static_cast<std::size_t>(y + ky) * W + kx;
                        double* ds = dsrc + static_cast<std::size_t>(y + ky) * W + kx;
                        const double* gg = g + static_cast<std::size_t>(y) * OW;
                        for (int x = 0; x < OW; ++x) {
                            dw += gg[x] * s[x];
                            ds[x] += w * gg[x];
                        }
                    }
                    dp.weight.data[base + ky * k + kx] += dw;
                }
            }
        }
    }
}

void check_cache(const Model& model, const Cache& cache) {
    if (cache.model_id != model.id() || cache.model_version != model.version()) {
        throw UsageError("forward cache does not belong to the current model parameters");
    }
    if (cache.inputs.size() != model.layers().size() + 1) throw UsageError("forward cache is malformed");
}

}  // namespace

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " + std::to_string(s.w) + ")";
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::dropout: return "dropout";
        case LayerKind::dense: return "dense";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "relu";
}

LayerKind layer_kind_from_string(const std::string& name) {
    for (auto k : {LayerKind::conv, LayerKind::relu, LayerKind::maxpool, LayerKind::dropout, LayerKind::dense,
                   LayerKind::sigmoid}) {
        if (to_string(k) == name) return k;
    }
    throw DataError("unknown layer kind: " + name);
}

Shape output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
    const std::string where = "layer " + std::to_string(index) + " (" + to_string(spec.kind) + ")";
    switch (spec.kind) {
        case LayerKind::conv:
            if (spec.units < 1 || spec.size < 1) throw UsageError(where + ": filter count and kernel must be >= 1");
            if (in.h < spec.size || in.w < spec.size) {
                throw UsageError(where + ": kernel " + std::to_string(spec.size) + " exceeds input " + to_string(in));
            }
            return {spec.units, in.h - spec.size + 1, in.w - spec.size + 1};
        case LayerKind::maxpool:
            if (spec.size < 1) throw UsageError(where + ": window must be >= 1");
            if (in.h < spec.size || in.w < spec.size) {
                throw UsageError(where + ": window " + std::to_string(spec.size) + " exceeds input " + to_string(in));
            }
            return {in.c, in.h / spec.size, in.w / spec.size};
        case LayerKind::dense:
            if (spec.units < 1) throw UsageError(where + ": neuron count must be >= 1");
            return {spec.units, 1, 1};
        case LayerKind::dropout:
            if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw UsageError(where + ": rate must lie in [0, 1)");
            return in;
        case LayerKind::relu:
        case LayerKind::sigmoid:
            return in;
    }
    return in;
}

std::vector<LayerSpec> reference_architecture() {
    return {LayerSpec::conv(16, 3), LayerSpec::relu(),    LayerSpec::maxpool(2),     LayerSpec::conv(32, 3),
            LayerSpec::relu(),      LayerSpec::maxpool(2), LayerSpec::conv(64, 3),   LayerSpec::relu(),
            LayerSpec::maxpool(2),  LayerSpec::dense(64),  LayerSpec::relu(),        LayerSpec::dropout(0.5),
            LayerSpec::dense(1),    LayerSpec::sigmoid()};
}

Model::Model(std::vector<LayerSpec> layers, Shape input) : layers_(std::move(layers)), input_(input), id_(next_model_id()) {
    if (layers_.empty() || layers_.back().kind != LayerKind::sigmoid) {
        throw UsageError("the final layer must be a sigmoid");
    }
    if (input_.c < 1 || input_.h < 1 || input_.w < 1) throw UsageError("input shape must be positive");
    Shape s = input_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Shape in = s;
        s = output_shape(layers_[i], in, i);
        shapes_.push_back(s);
        LayerParams p{Tensor({0, 0, 0}), Tensor({0, 0, 0})};
        if (layers_[i].kind == LayerKind::conv) {
            const int k = layers_[i].size;
            p.weight = Tensor({layers_[i].units * in.c * k * k, 1, 1});
            p.bias = Tensor({layers_[i].units, 1, 1});
        } else if (layers_[i].kind == LayerKind::dense) {
            p.weight = Tensor({static_cast<int>(static_cast<std::size_t>(layers_[i].units) * in.size()), 1, 1});
            p.bias = Tensor({layers_[i].units, 1, 1});
        }
        params_.push_back(std::move(p));
    }
    if (s.size() != 1) throw UsageError("the network must end in a single sigmoid output, got " + to_string(s));
}

Model::Model(const Model& other)
    : layers_(other.layers_), input_(other.input_), shapes_(other.shapes_), params_(other.params_),
      id_(next_model_id()), version_(other.version_) {}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        layers_ = other.layers_;
        input_ = other.input_;
        shapes_ = other.shapes_;
        params_ = other.params_;
        id_ = next_model_id();
        version_ = other.version_;
    }
    return *this;
}

void Model::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Shape in = input_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& spec = layers_[i];
        if (spec.kind == LayerKind::conv || spec.kind == LayerKind::dense) {
            const double fan_in = spec.kind == LayerKind::conv
                                       ? static_cast<double>(in.c) * spec.size * spec.size
                                       : static_cast<double>(in.size());
            const double limit = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (auto& w : params_[i].weight.data) w = dist(rng);
            std::fill(params_[i].bias.data.begin(), params_[i].bias.data.end(), 0.0);
        }
        in = shapes_[i];
    }
    touch();
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.weight.data.size() + p.bias.data.size();
    return n;
}

ForwardResult forward(const Model& model, const Tensor& x, bool training, std::mt19937_64& rng) {
    if (x.shape != model.input_shape()) {
        throw UsageError("input shape " + to_string(x.shape) + " does not match model input " +
                         to_string(model.input_shape()));
    }
    const auto& layers = model.layers();
    ForwardResult res;
    Cache& cache = res.cache;
    cache.model_id = model.id();
    cache.model_version = model.version();
    cache.training = training;
    cache.inputs.reserve(layers.size() + 1);
    cache.inputs.push_back(x);
    cache.dropout_scale.resize(layers.size());
    cache.argmax.resize(layers.size());

    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& spec = layers[i];
        const Tensor& in = cache.inputs.back();
        Tensor out(model.shapes()[i]);
        switch (spec.kind) {
            case LayerKind::conv:
                conv_forward(in, model.params()[i], spec.units, spec.size, out);
                break;
            case LayerKind::relu:
                for (std::size_t j = 0; j < in.data.size(); ++j) out.data[j] = in.data[j] > 0.0 ? in.data[j] : 0.0;
                break;
            case LayerKind::maxpool: {
                const int m = spec.size, OH = out.shape.h, OW = out.shape.w, W = in.shape.w;
                auto& arg = cache.argmax[i];
                arg.resize(out.data.size());
                for (int c = 0; c < out.shape.c; ++c) {
                    const double* src = in.channel(c);
                    for (int y = 0; y < OH; ++y) {
                        for (int xx = 0; xx < OW; ++xx) {
                            std::size_t best = static_cast<std::size_t>(y * m) * W + xx * m;
                            for (int dy = 0; dy < m; ++dy) {
                                for (int dx = 0; dx < m; ++dx) {
                                    const std::size_t idx = static_cast<std::size_t>(y * m + dy) * W + xx * m + dx;
                                    if (src[idx] > src[best]) best = idx;
                                }
                            }
                            const std::size_t o = (static_cast<std::size_t>(c) * OH + y) * OW + xx;
                            out.data[o] = src[best];
                            arg[o] = static_cast<std::uint32_t>(static_cast<std::size_t>(c) * in.shape.h * W + best);
                        }
                    }
                }
                break;
            }
            case LayerKind::dropout:
                if (training && spec.rate > 0.0) {
                    auto& scale = cache.dropout_scale[i];
                    scale.resize(in.data.size());
                    std::bernoulli_distribution keep(1.0 - spec.rate);
                    const double s = 1.0 / (1.0 - spec.rate);
                    for (std::size_t j = 0; j < in.data.size(); ++j) {
                        scale[j] = keep(rng) ? s : 0.0;
                        out.data[j] = in.data[j] * scale[j];
                    }
                } else {
                    out.data = in.data;
                }
                break;
            case LayerKind::dense: {
                const auto& p = model.params()[i];
                const std::size_t n = in.data.size();
                for (int u = 0; u < spec.units; ++u) {
                    const double* w = p.weight.data.data() + static_cast<std::size_t>(u) * n;
                    double acc = p.bias.data[u];
                    for (std::size_t j = 0; j < n; ++j) acc += w[j] * in.data[j];
                    out.data[u] = acc;
                }
                break;
            }
            case LayerKind::sigmoid:
                for (std::size_t j = 0; j < in.data.size(); ++j) out.data[j] = stable_sigmoid(in.data[j]);
                break;
        }
        cache.inputs.push_back(std::move(out));
    }
    res.logit = cache.inputs[layers.size() - 1].data[0];
    res.probability = cache.inputs.back().data[0];
    return res;
}

double predict_probability(const Model& model, const Tensor& x) {
    std::mt19937_64 unused(0);
    return forward(model, x, false, unused).probability;
}

void Gradients::zero_like(const Model& model) {
    params.clear();
    for (const auto& p : model.params()) params.push_back({Tensor(p.weight.shape), Tensor(p.bias.shape)});
    input = Tensor(model.input_shape());
}

void Gradients::accumulate(const Gradients& other, double scale) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].weight.data;
        auto& b = params[i].bias.data;
        const auto& ow = other.params[i].weight.data;
        const auto& ob = other.params[i].bias.data;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += scale * ow[j];
        for (std::size_t j = 0; j < b.size(); ++j) b[j] += scale * ob[j];
    }
    for (std::size_t j = 0; j < input.data.size() && j < other.input.data.size(); ++j) {
        input.data[j] += scale * other.input.data[j];
    }
}

namespace {

// Propagates `grad` (gradient w.r.t. the output of layer `last`) down to the input.
Gradients backprop_from(const Model& model, const Cache& cache, std::size_t last, Tensor grad) {
    Gradients out;
    out.zero_like(model);
    const auto& layers = model.layers();
    for (std::size_t ii = last + 1; ii-- > 0;) {
        const LayerSpec& spec = layers[ii];
        const Tensor& in = cache.inputs[ii];
        Tensor din(in.shape);
        switch (spec.kind) {
            case LayerKind::conv:
                conv_backward(in, model.params()[ii], spec.units, spec.size, grad, out.params[ii], din);
                break;
            case LayerKind::relu:
                for (std::size_t j = 0; j < in.data.size(); ++j) din.data[j] = in.data[j] > 0.0 ? grad.data[j] : 0.0;
                break;
            case LayerKind::maxpool: {
                const auto& arg = cache.argmax[ii];
                for (std::size_t j = 0; j < arg.size(); ++j) din.data[arg[j]] += grad.data[j];
                break;
            }
            case LayerKind::dropout: {
                const auto& scale = cache.dropout_scale[ii];
                if (scale.empty()) {
                    din.data = grad.data;
                } else {
                    for (std::size_t j = 0; j < in.data.size(); ++j) din.data[j] = grad.data[j] * scale[j];
                }
                break;
            }
            case LayerKind::dense: {
                const auto& p = model.params()[ii];
                auto& dp = out.params[ii];
                const std::size_t n = in.data.size();
                for (int u = 0; u < spec.units; ++u) {
                    const double g = grad.data[u];
                    if (g == 0.0) continue;
                    dp.bias.data[u] += g;
                    const double* w = p.weight.data.data() + static_cast<std::size_t>(u) * n;
                    double* dw = dp.weight.data.data() + static_cast<std::size_t>(u) * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        dw[j] += g * in.data[j];
                        din.data[j] += g * w[j];
                    }
                }
                break;
            }
            case LayerKind::sigmoid: {
                const Tensor& s = cache.inputs[ii + 1];
                for (std::size_t j = 0; j < s.data.size(); ++j) {
                    din.data[j] = grad.data[j] * s.data[j] * (1.0 - s.data[j]);
                }
                break;
            }
        }
        grad = std::move(din);
    }
    out.input = std::move(grad);
    return out;
}

}  // namespace

Gradients backward(const Model& model, const Cache& cache, double dloss_dp) {
    check_cache(model, cache);
    Tensor g(model.shapes().back(), dloss_dp);
    return backprop_from(model, cache, model.layers().size() - 1, std::move(g));
}

Gradients backward_logit(const Model& model, const Cache& cache, double dloss_dlogit) {
    check_cache(model, cache);
    const std::size_t n = model.layers().size();
    if (n == 1) {
        Gradients out;
        out.zero_like(model);
        out.input = Tensor(model.input_shape(), dloss_dlogit);
        return out;
    }
    Tensor g(model.shapes()[n - 2], dloss_dlogit);
    return backprop_from(model, cache, n - 2, std::move(g));
}

Tensor to_tensor(const imaging::GrayImage& img) {
    Tensor t({1, img.height, img.width});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) t.data[i] = img.pixels[i] / 255.0;
    return t;
}

std::string to_string(Label l) {
    return l == Label::tc ? "TC" : "FC";
}

Label label_from_string(const std::string& name) {
    if (name == "TC" || name == "tc") return Label::tc;
    if (name == "FC" || name == "fc") return Label::fc;
    throw DataError("unknown label: " + name);
}

Prediction predict(const Model& model, const imaging::GrayImage& crop) {
    const Shape& in = model.input_shape();
    if (crop.width != in.w || crop.height != in.h) {
        throw UsageError("crop is " + std::to_string(crop.width) + "x" + std::to_string(crop.height) +
                         ", model expects " + std::to_string(in.w) + "x" + std::to_string(in.h));
    }
    const double p = predict_probability(model, to_tensor(crop));
    return {p >= kDecisionThreshold ? Label::tc : Label::fc, p};
}

}  // namespace contam::cnn
