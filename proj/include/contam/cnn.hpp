#pragma once

#include "contam/imaging.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace contam::cnn {

/// (channels, height, width); flat feature vectors use (n, 1, 1).
struct Shape {
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}

    double* channel(int c) { return data.data() + static_cast<std::size_t>(c) * shape.h * shape.w; }
    const double* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * shape.h * shape.w; }
    bool all_finite() const;
};

enum class LayerKind { conv, relu, maxpool, dropout, dense, sigmoid };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int units = 0;     // conv: filter count; dense: neuron count
    int size = 0;      // conv: kernel size; maxpool: window
    double rate = 0.0; // dropout rate in [0, 1)

    static LayerSpec conv(int filters, int kernel) { return {LayerKind::conv, filters, kernel, 0.0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0.0}; }
    static LayerSpec maxpool(int window) { return {LayerKind::maxpool, 0, window, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, rate}; }
    static LayerSpec dense(int units) { return {LayerKind::dense, units, 0, 0.0}; }
    static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0, 0.0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Output shape of one layer; throws UsageError naming the layer on incompatible input.
Shape output_shape(const LayerSpec& spec, const Shape& in, std::size_t index);

/// Reference architecture: three conv(3x3)+ReLU+maxpool(2) blocks with 16/32/64 filters,
/// dense 64 + ReLU + dropout 0.5, dense 1 + sigmoid.
std::vector<LayerSpec> reference_architecture();

struct LayerParams {
    Tensor weight;
    Tensor bias;
};

/// Layered network with weights; the final layer is a sigmoid emitting one probability.
class Model {
public:
    Model() = default;
    explicit Model(std::vector<LayerSpec> layers, Shape input = {1, 120, 120});
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    /// Fan-in-scaled uniform weights, zero biases.
    void initialize(std::uint64_t seed);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const Shape& input_shape() const { return input_; }
    /// Output shape of each layer.
    const std::vector<Shape>& shapes() const { return shapes_; }
    std::vector<LayerParams>& params() { return params_; }
    const std::vector<LayerParams>& params() const { return params_; }
    std::size_t parameter_count() const;

    std::uint64_t id() const { return id_; }
    std::uint64_t version() const { return version_; }
    /// Marks parameters as changed; invalidates outstanding forward caches.
    void touch() { ++version_; }

private:
    std::vector<LayerSpec> layers_;
    Shape input_;
    std::vector<Shape> shapes_;
    std::vector<LayerParams> params_;
    std::uint64_t id_ = 0;
    std::uint64_t version_ = 0;
};

/// Intermediates kept by forward() for backward().
struct Cache {
    std::uint64_t model_id = 0;
    std::uint64_t model_version = 0;
    bool training = false;
    std::vector<Tensor> inputs;                     // input of each layer, plus the final output
    std::vector<std::vector<double>> dropout_scale; // per layer (empty when unused)
    std::vector<std::vector<std::uint32_t>> argmax; // per maxpool layer
};

struct ForwardResult {
    double probability = 0.5;
    double logit = 0.0;
    Cache cache;
};

/// Dropout is active only when `training` is true (inverted scaling, so inference needs none).
ForwardResult forward(const Model& model, const Tensor& x, bool training, std::mt19937_64& rng);

/// Inference-only forward pass without a cache.
double predict_probability(const Model& model, const Tensor& x);

struct Gradients {
    std::vector<LayerParams> params;
    Tensor input;

    void zero_like(const Model& model);
    void accumulate(const Gradients& other, double scale = 1.0);
};

/// Gradients of a loss with respect to all parameters and the input, given dL/dp.
Gradients backward(const Model& model, const Cache& cache, double dloss_dp);
/// Same, given dL/d(logit) at the input of the final sigmoid.
Gradients backward_logit(const Model& model, const Cache& cache, double dloss_dlogit);

// ---- loss and optimizer -----------------------------------------------------

/// Per-class multipliers of the cross-entropy terms: (w_FC, w_TC).
struct ClassWeights {
    double fc = 1.0;
    double tc = 1.0;
    friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossValue {
    double loss = 0.0;
    double dloss_dp = 0.0;
    double dloss_dlogit = 0.0;
};

/// -[w_TC y ln p + w_FC (1 - y) ln(1 - p)], with p clamped to [eps, 1 - eps].
LossValue weighted_bce(double p, int y, ClassWeights w);

struct AdamState {
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    long long step = 0;
};

inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One bias-corrected ADAM update of a flat parameter block. `step` is the already-incremented counter.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long long step, double alpha, double beta1);

/// ADAM over every parameter of the model (beta1 = mu); increments the step counter and touches the model.
void adam_step(Model& model, const Gradients& grads, AdamState& state, double alpha, double mu);

// ---- data -------------------------------------------------------------------

/// Gray levels scaled to [0, 1].
Tensor to_tensor(const imaging::GrayImage& img);

struct AugmentRanges {
    double max_rotation_deg = 20.0;
    double max_shift = 10.0;
    double zoom_min = 0.9;
    double zoom_max = 1.1;
};

struct AffineParams {
    double rotation_deg = 0.0;
    double shift_row = 0.0;
    double shift_col = 0.0;
    double zoom = 1.0;
};

/// Rotation and zoom about the image centre followed by a shift; bilinear, edge-replicated.
imaging::GrayImage apply_affine(const imaging::GrayImage& img, const AffineParams& t);

/// Random affine within `ranges`.
imaging::GrayImage augment(const imaging::GrayImage& img, std::mt19937_64& rng, const AugmentRanges& ranges = {});

enum class Label { fc = 0, tc = 1 };

std::string to_string(Label l);
Label label_from_string(const std::string& name);

struct LabeledCrop {
    imaging::GrayImage image;
    Label label = Label::fc;
    std::string id;
};

struct Augmentation {
    int copies = 3;
    AugmentRanges ranges;
};

struct Hyperparams {
    std::vector<LayerSpec> architecture = reference_architecture();
    double alpha = 1e-3;
    double mu = 0.9;
    int batch_size = 32;
    int epochs = 10;
    ClassWeights class_weights;
    Augmentation augmentation;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainOptions {
    int threads = 1;
    /// Called after every epoch with (epoch, mean loss).
    std::function<void(int, double)> on_epoch;
};

struct TrainResult {
    Model model;
    std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Mini-batch ADAM on the weighted cross-entropy. Throws DivergenceError on a non-finite loss.
TrainResult train(std::span<const LabeledCrop> dataset, const Hyperparams& hp, const TrainOptions& options = {});

struct Prediction {
    Label label = Label::fc;
    double probability = 0.5;
};

inline constexpr double kDecisionThreshold = 0.5;

/// TC iff p >= 0.5. The crop must match the model input size.
Prediction predict(const Model& model, const imaging::GrayImage& crop);

}  // namespace contam::cnn
