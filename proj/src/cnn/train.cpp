#include "contam/cnn.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace contam::cnn {

void Hyperparams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be > 0");
    if (!(mu >= 0.0 && mu < 1.0)) throw UsageError("mu must lie in [0, 1)");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(class_weights.fc > 0.0) || !(class_weights.tc > 0.0)) throw UsageError("class weights must be > 0");
    if (augmentation.copies < 0) throw UsageError("augmentation copies must be >= 0");
    const auto& r = augmentation.ranges;
    if (r.max_rotation_deg < 0.0 || r.max_shift < 0.0 || !(r.zoom_min > 0.0) || r.zoom_min > r.zoom_max) {
        throw UsageError("invalid augmentation ranges");
    }
    if (architecture.empty()) throw UsageError("architecture is empty");
}

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

struct Sample {
    const imaging::GrayImage* image;
    int y;
};

struct ChunkResult {
    Gradients grads;
    double loss = 0.0;
    bool finite = true;
};

void run_chunk(const Model& model, const std::vector<Sample>& samples, std::span<const std::size_t> idx,
               std::uint64_t seed, int epoch, ClassWeights w, ChunkResult& out) {
    out.grads.zero_like(model);
    for (std::size_t i : idx) {
        auto rng = derived_rng(seed, static_cast<std::uint64_t>(epoch) + 1, i);
        const auto fr = forward(model, to_tensor(*samples[i].image), true, rng);
        const auto lv = weighted_bce(fr.probability, samples[i].y, w);
        if (!std::isfinite(lv.loss) || !std::isfinite(lv.dloss_dlogit)) {
            out.finite = false;
            return;
        }
        out.loss += lv.loss;
        out.grads.accumulate(backward_logit(model, fr.cache, lv.dloss_dlogit));
    }
}

bool params_finite(const Model& m) {
    for (const auto& p : m.params()) {
        if (!p.weight.all_finite() || !p.bias.all_finite()) return false;
    }
    return true;
}

}  // namespace

TrainResult train(std::span<const LabeledCrop> dataset, const Hyperparams& hp, const TrainOptions& options) {
    hp.validate();
    if (dataset.empty()) throw UsageError("training set is empty");
    const int H = dataset.front().image.height, W = dataset.front().image.width;
    bool has_tc = false, has_fc = false;
    for (const auto& c : dataset) {
        if (c.image.height != H || c.image.width != W) throw DataError("training crops differ in size: " + c.id);
        (c.label == Label::tc ? has_tc : has_fc) = true;
    }
    if (!has_tc || !has_fc) throw UsageError("training set must contain both TC and FC crops");

    // Originals plus augmented copies, generated once up front.
    std::vector<imaging::GrayImage> extra;
    std::vector<Sample> samples;
    {
        auto rng = derived_rng(hp.seed, 0xA5A5, 0);
        extra.reserve(dataset.size() * static_cast<std::size_t>(hp.augmentation.copies));
        for (const auto& c : dataset) {
            for (int j = 0; j < hp.augmentation.copies; ++j) extra.push_back(augment(c.image, rng, hp.augmentation.ranges));
        }
        std::size_t e = 0;
        for (const auto& c : dataset) {
            const int y = c.label == Label::tc ? 1 : 0;
            samples.push_back({&c.image, y});
            for (int j = 0; j < hp.augmentation.copies; ++j) samples.push_back({&extra[e++], y});
        }
    }

    TrainResult result{Model(hp.architecture, {1, H, W}), {}};
    Model& model = result.model;
    model.initialize(hp.seed);
    AdamState state;
    auto shuffle_rng = derived_rng(hp.seed, 0x5EED, 1);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    const int threads = std::max(1, options.threads);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        int batch = 0;
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const std::size_t n_chunks = std::min<std::size_t>(threads, idx.size());
            std::vector<ChunkResult> chunks(n_chunks);
            auto chunk_span = [&](std::size_t c) {
                const std::size_t lo = idx.size() * c / n_chunks, hi = idx.size() * (c + 1) / n_chunks;
                return idx.subspan(lo, hi - lo);
            };
            if (n_chunks == 1) {
                run_chunk(model, samples, idx, hp.seed, epoch, hp.class_weights, chunks[0]);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t c = 0; c < n_chunks; ++c) {
                    pool.emplace_back([&, c] {
                        run_chunk(model, samples, chunk_span(c), hp.seed, epoch, hp.class_weights, chunks[c]);
                    });
                }
                for (auto& t : pool) t.join();
            }
            Gradients total;
            total.zero_like(model);
            double batch_loss = 0.0;
            for (const auto& c : chunks) {
                if (!c.finite) {
                    throw DivergenceError(epoch, batch,
                                          "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch));
                }
                total.accumulate(c.grads, 1.0 / static_cast<double>(idx.size()));
                batch_loss += c.loss;
            }
            adam_step(model, total, state, hp.alpha, hp.mu);
            if (!params_finite(model)) {
                throw DivergenceError(epoch, batch,
                                      "non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch));
            }
            epoch_loss += batch_loss;
        }
        const double mean = epoch_loss / static_cast<double>(samples.size());
        result.loss_trace.push_back(mean);
        if (options.on_epoch) options.on_epoch(epoch, mean);
    }
    return result;
}

}  // namespace contam::cnn
