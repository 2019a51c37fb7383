#include "contam/eval.hpp"

#include "contam/error.hpp"

#include <cmath>

namespace contam::eval {

namespace {

template <typename T>
const T& pick(const std::vector<T>& options, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
    return options[d(rng)];
}

bool fits(const std::vector<cnn::LayerSpec>& layers, int size) {
    try {
        cnn::Model probe(layers, {1, size, size});
        return true;
    } catch (const UsageError&) {
        return false;
    }
}

}  // namespace

void SearchSpace::validate() const {
    if (conv_layers.empty() || pool_layers.empty() || filters.empty() || kernels.empty() || pool_windows.empty() ||
        dense_layers.empty() || dense_units.empty() || dropout.empty() || batch_sizes.empty() || epochs.empty() ||
        class_weights.empty() || augmentation_copies.empty()) {
        throw UsageError("every search range must offer at least one value");
    }
    if (!(alpha_min > 0.0) || alpha_min > alpha_max) throw UsageError("invalid alpha range");
    if (!(mu_min >= 0.0) || mu_min > mu_max || !(mu_max < 1.0)) throw UsageError("invalid mu range");
    if (input_size < 1) throw UsageError("input size must be >= 1");
}

cnn::Hyperparams sample_hyperparams(const SearchSpace& space, std::mt19937_64& rng) {
    space.validate();
    cnn::Hyperparams hp;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 100) throw UsageError("no architecture in the search space fits the input size");
        const int nc = pick(space.conv_layers, rng);
        const int nm = pick(space.pool_layers, rng);
        const int nf = pick(space.dense_layers, rng);
        std::vector<cnn::LayerSpec> layers;
        for (int i = 0; i < nc; ++i) {
            layers.push_back(cnn::LayerSpec::conv(pick(space.filters, rng), pick(space.kernels, rng)));
            layers.push_back(cnn::LayerSpec::relu());
            if (i < nm) layers.push_back(cnn::LayerSpec::maxpool(pick(space.pool_windows, rng)));
        }
        for (int h = 0; h < nf; ++h) {
            layers.push_back(cnn::LayerSpec::dense(pick(space.dense_units, rng)));
            layers.push_back(cnn::LayerSpec::relu());
            layers.push_back(cnn::LayerSpec::dropout(pick(space.dropout, rng)));
        }
        layers.push_back(cnn::LayerSpec::dense(1));
        layers.push_back(cnn::LayerSpec::sigmoid());
        if (fits(layers, space.input_size)) {
            hp.architecture = std::move(layers);
            break;
        }
    }
    std::uniform_real_distribution<double> log_alpha(std::log(space.alpha_min), std::log(space.alpha_max));
    std::uniform_real_distribution<double> mu(space.mu_min, space.mu_max);
    hp.alpha = std::exp(log_alpha(rng));
    hp.mu = mu(rng);
    hp.batch_size = pick(space.batch_sizes, rng);
    hp.epochs = pick(space.epochs, rng);
    hp.class_weights = pick(space.class_weights, rng);
    hp.augmentation.copies = pick(space.augmentation_copies, rng);
    hp.augmentation.ranges = space.augmentation_ranges;
    hp.seed = space.train_seed;
    return hp;
}

FoldRunner cnn_fold_runner(int threads) {
    return [threads](const cnn::Hyperparams& hp, std::span<const cnn::LabeledCrop> train,
                     std::span<const cnn::LabeledCrop> validation) {
        cnn::TrainOptions opt;
        opt.threads = threads;
        const auto result = cnn::train(train, hp, opt);
        ConfusionMatrix cm;
        for (const auto& c : validation) {
            tally(cm, c.label == cnn::Label::tc, cnn::predict(result.model, c.image).label == cnn::Label::tc);
        }
        return cm;
    };
}

CvResult cross_validate(std::span<const cnn::LabeledCrop> data, const cnn::Hyperparams& hp, int k, std::uint64_t seed,
                        const FoldRunner& runner) {
    const auto labels = labels_of(data);
    const auto folds = kfold_split(labels, k, seed);
    CvResult out;
    for (int f = 0; f < k; ++f) {
        std::vector<cnn::LabeledCrop> train, val;
        for (int g = 0; g < k; ++g) {
            for (std::size_t i : folds[g]) (g == f ? val : train).push_back(data[i]);
        }
        try {
            const ConfusionMatrix cm = runner(hp, train, val);
            out.folds.push_back(cm);
            out.mean += cm;
        } catch (const DivergenceError& e) {
            out.diverged = true;
            out.note = "fold " + std::to_string(f) + ": " + e.what();
            return out;
        }
    }
    out.mean = out.mean * (1.0 / k);
    return out;
}

std::optional<std::size_t> select_best(std::span<const MetricsRow> table) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& r = table[i];
        if (r.diverged) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = table[*best];
        if (r.f2 > b.f2 || (r.f2 == b.f2 && (r.recall > b.recall || (r.recall == b.recall && r.cm.fp < b.cm.fp)))) {
            best = i;
        }
    }
    return best;
}

SearchResult random_search(const SearchSpace& space, int l, int k, std::span<const cnn::LabeledCrop> train_set,
                           std::uint64_t seed, const FoldRunner& runner) {
    if (l < 1) throw UsageError("the number of sampled combinations must be >= 1");
    space.validate();
    std::mt19937_64 rng(seed);
    SearchResult out;
    for (int i = 0; i < l; ++i) {
        const cnn::Hyperparams hp = sample_hyperparams(space, rng);
        const CvResult cv = cross_validate(train_set, hp, k, seed, runner);
        MetricsRow row;
        if (cv.diverged) {
            row.hyperparams = hp;
            row.diverged = true;
            row.note = cv.note;
        } else {
            row = make_row(cv.mean, hp);
        }
        row.index = i;
        out.table.push_back(std::move(row));
    }
    out.best = select_best(out.table);
    return out;
}

}  // namespace contam::eval
