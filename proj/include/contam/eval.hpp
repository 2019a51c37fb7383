#pragma once

#include "contam/cnn.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace contam::eval {

/// Real-valued so that cross-fold averages can be represented.
struct ConfusionMatrix {
    double tn = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double tp = 0.0;

    double total() const { return tn + fp + fn + tp; }
    void validate() const;
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix operator*(const ConfusionMatrix& cm, double s);

/// Adds one (truth, predicted) observation; `true` means the positive class.
void tally(ConfusionMatrix& cm, bool truth, bool predicted);

/// A rate with the zero-denominator flag: degenerate values are reported as 0.
struct Score {
    double value = 0.0;
    bool degenerate = false;
    operator double() const { return value; }
};

Score precision(const ConfusionMatrix& cm);
Score recall(const ConfusionMatrix& cm);
Score accuracy(const ConfusionMatrix& cm);
Score f_beta(const ConfusionMatrix& cm, double beta = 2.0);
/// FP / (FP + TN)
Score fp_rate(const ConfusionMatrix& cm);
/// FN / (FN + TP)
Score fn_rate(const ConfusionMatrix& cm);

struct MetricsRow {
    int index = 0;
    double f2 = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    ConfusionMatrix cm;
    cnn::Hyperparams hyperparams;
    bool degenerate = false;
    bool diverged = false;
    std::string note;
};

MetricsRow make_row(const ConfusionMatrix& cm, const cnn::Hyperparams& hp = {});

// ---- splits -----------------------------------------------------------------

/// Seeded stratified partition of item indices by class label; fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::span<const int> labels, int k, std::uint64_t seed);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded stratified split with round(n * fraction) test items.
Split holdout_split(std::span<const int> labels, double fraction, std::uint64_t seed);

std::vector<int> labels_of(std::span<const cnn::LabeledCrop> crops);

// ---- cross-validation and search -------------------------------------------

/// Trains on `train` and returns the confusion matrix on `validation`.
using FoldRunner = std::function<ConfusionMatrix(const cnn::Hyperparams&, std::span<const cnn::LabeledCrop> train,
                                                 std::span<const cnn::LabeledCrop> validation)>;

/// Default runner: cnn::train with augmentation, cnn::predict on the untouched validation crops.
FoldRunner cnn_fold_runner(int threads = 1);

struct CvResult {
    std::vector<ConfusionMatrix> folds;
    ConfusionMatrix mean;
    bool diverged = false;
    std::string note;
};

CvResult cross_validate(std::span<const cnn::LabeledCrop> data, const cnn::Hyperparams& hp, int k, std::uint64_t seed,
                        const FoldRunner& runner);

/// Value ranges sampled by random_search. Each conv layer is followed by ReLU and, for the first
/// `pool_layers` of them, a max-pool; each hidden dense layer by ReLU and dropout.
struct SearchSpace {
    std::vector<int> conv_layers{2, 3};
    std::vector<int> pool_layers{2, 3};
    std::vector<int> filters{8, 16, 32};
    std::vector<int> kernels{3, 5};
    std::vector<int> pool_windows{2};
    std::vector<int> dense_layers{1};
    std::vector<int> dense_units{32, 64};
    std::vector<double> dropout{0.25, 0.5};
    double alpha_min = 1e-4;
    double alpha_max = 3e-3;  // sampled log-uniformly
    double mu_min = 0.8;
    double mu_max = 0.95;
    std::vector<int> batch_sizes{16, 32};
    std::vector<int> epochs{5, 10};
    std::vector<cnn::ClassWeights> class_weights{{1, 1}, {1, 2}, {1, 5}, {1, 10}};
    std::vector<int> augmentation_copies{3};
    cnn::AugmentRanges augmentation_ranges;
    std::uint64_t train_seed = 1;
    int input_size = 120;

    void validate() const;
};

/// One random combination; architectures whose shapes do not fit the input are redrawn.
cnn::Hyperparams sample_hyperparams(const SearchSpace& space, std::mt19937_64& rng);

struct SearchResult {
    std::vector<MetricsRow> table;
    std::optional<std::size_t> best;  // index into table; empty when every row diverged
};

/// Index of the best non-diverged row: highest F2, then higher recall, then fewer false positives.
std::optional<std::size_t> select_best(std::span<const MetricsRow> table);

SearchResult random_search(const SearchSpace& space, int l, int k, std::span<const cnn::LabeledCrop> train_set,
                           std::uint64_t seed, const FoldRunner& runner);

// ---- export -----------------------------------------------------------------

nlohmann::json to_json(const ConfusionMatrix& cm);
/// cm entries plus every derived rate.
nlohmann::json metrics_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricsRow& row);

/// Missing keys keep their defaults.
SearchSpace search_space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SearchSpace& space);

/// Compact architecture label such as "conv16k3-relu-pool2-dense1-sigmoid".
std::string architecture_label(const std::vector<cnn::LayerSpec>& layers);

void write_search_csv(std::span<const MetricsRow> table, const std::string& path);
void write_search_json(const SearchResult& result, const std::string& path);

}  // namespace contam::eval
