#include "contam/eval.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace contam::eval {

namespace {

/// Item indices grouped by label (ascending label order), each group shuffled with `rng`.
std::vector<std::vector<std::size_t>> shuffled_classes(std::span<const int> labels, std::mt19937_64& rng) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [label, idx] : groups) {
        std::shuffle(idx.begin(), idx.end(), rng);
        out.push_back(std::move(idx));
    }
    return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> kfold_split(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw UsageError("K must be >= 2");
    if (static_cast<std::size_t>(k) > labels.size()) {
        throw UsageError("K = " + std::to_string(k) + " exceeds the number of items (" + std::to_string(labels.size()) + ")");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    // Deal each class round-robin, carrying the fold pointer across classes.
    std::size_t next = 0;
    for (const auto& group : shuffled_classes(labels, rng)) {
        for (std::size_t i : group) {
            folds[next].push_back(i);
            next = (next + 1) % k;
        }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

Split holdout_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("holdout fraction must lie in (0, 1)");
    if (labels.size() < 5) throw UsageError("holdout split needs at least 5 items");
    std::mt19937_64 rng(seed);
    auto groups = shuffled_classes(labels, rng);
    const auto target = static_cast<std::size_t>(std::llround(labels.size() * fraction));

    // Largest-remainder apportionment of the test quota over classes.
    std::vector<std::size_t> quota(groups.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double exact = groups[g].size() * fraction;
        quota[g] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[g];
        remainders.push_back({exact - quota[g], g});
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned) ++quota[remainders[i].second];

    Split s;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t i = 0; i < groups[g].size(); ++i) (i < quota[g] ? s.test : s.train).push_back(groups[g][i]);
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::vector<int> labels_of(std::span<const cnn::LabeledCrop> crops) {
    std::vector<int> out;
    out.reserve(crops.size());
    for (const auto& c : crops) out.push_back(static_cast<int>(c.label));
    return out;
}

}  // namespace contam::eval
