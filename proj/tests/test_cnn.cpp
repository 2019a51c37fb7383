#include "contam/cnn.hpp"
#include "contam/cnn_io.hpp"
#include "contam/error.hpp"

#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace contam;
using namespace contam::cnn;

namespace {

Model zero_model(std::vector<LayerSpec> layers, Shape in) {
    Model m(std::move(layers), in);
    for (auto& p : m.params()) {
        std::fill(p.weight.data.begin(), p.weight.data.end(), 0.0);
        std::fill(p.bias.data.begin(), p.bias.data.end(), 0.0);
    }
    m.touch();
    return m;
}

std::vector<LayerSpec> tiny_arch() {
    return {LayerSpec::conv(4, 5), LayerSpec::relu(),     LayerSpec::maxpool(4), LayerSpec::dense(8),
            LayerSpec::relu(),     LayerSpec::dense(1),   LayerSpec::sigmoid()};
}

imaging::GrayImage blob_crop(int size, bool dark, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 4.0);
    imaging::GrayImage img(size, size);
    std::uniform_int_distribution<int> pos(size / 4, 3 * size / 4);
    const int cr = pos(rng), cc = pos(rng);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double v = 220 + noise(rng);
            if (dark && (r - cr) * (r - cr) + (c - cc) * (c - cc) <= 9) v = 40;
            img.at(r, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return img;
}

}  // namespace

TEST(Forward, ZeroWeightsGiveOneHalf) {
    Model m = zero_model(reference_architecture(), {1, 120, 120});
    imaging::GrayImage crop(120, 120, 77);
    const auto pred = predict(m, crop);
    EXPECT_DOUBLE_EQ(pred.probability, 0.5);
    EXPECT_EQ(pred.label, Label::tc);
}

TEST(Forward, SingleDenseClosedForm) {
    Model m({LayerSpec::dense(1), LayerSpec::sigmoid()}, {1, 1, 1});
    m.params()[0].weight.data[0] = 1.7;
    m.touch();
    Tensor x({1, 1, 1}, 0.3);
    EXPECT_NEAR(predict_probability(m, x), 1.0 / (1.0 + std::exp(-1.7 * 0.3)), 1e-15);
}

TEST(Forward, MatchesNaiveLoops) {
    // conv(2,3) relu conv(3,2) relu maxpool(2) dense(1) sigmoid on 8x8
    Model m({LayerSpec::conv(2, 3), LayerSpec::relu(), LayerSpec::conv(3, 2), LayerSpec::relu(), LayerSpec::maxpool(2),
             LayerSpec::dense(1), LayerSpec::sigmoid()},
            {1, 8, 8});
    std::mt19937_64 rng(5);
    const Tensor x = contam::testing::randomize(m, rng);
    const auto& P = m.params();

    auto conv = [](const std::vector<std::vector<std::vector<double>>>& in, const LayerParams& p, int F, int k) {
        const int C = static_cast<int>(in.size()), H = static_cast<int>(in[0].size()), W = static_cast<int>(in[0][0].size());
        std::vector<std::vector<std::vector<double>>> out(F, std::vector<std::vector<double>>(H - k + 1, std::vector<double>(W - k + 1)));
        for (int f = 0; f < F; ++f)
            for (int y = 0; y <= H - k; ++y)
                for (int xx = 0; xx <= W - k; ++xx) {
                    double s = p.bias.data[f];
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) s += p.weight.data[((f * C + c) * k + i) * k + j] * in[c][y + i][xx + j];
                    out[f][y][xx] = std::max(0.0, s);
                }
        return out;
    };
    std::vector<std::vector<std::vector<double>>> a(1, std::vector<std::vector<double>>(8, std::vector<double>(8)));
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) a[0][r][c] = x.data[r * 8 + c];
    auto b = conv(a, P[0], 2, 3);
    auto c2 = conv(b, P[2], 3, 2);  // 3 x 5 x 5
    std::vector<double> flat;
    for (int f = 0; f < 3; ++f)
        for (int y = 0; y < 2; ++y)
            for (int xx = 0; xx < 2; ++xx) {
                double mx = -1e300;
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) mx = std::max(mx, c2[f][2 * y + i][2 * xx + j]);
                flat.push_back(mx);
            }
    double z = P[5].bias.data[0];
    for (std::size_t i = 0; i < flat.size(); ++i) z += P[5].weight.data[i] * flat[i];
    EXPECT_NEAR(predict_probability(m, x), 1.0 / (1.0 + std::exp(-z)), 1e-12);
}

TEST(Forward, ShapeErrorsNameTheLayer) {
    try {
        Model m({LayerSpec::conv(2, 3), LayerSpec::maxpool(8), LayerSpec::dense(1), LayerSpec::sigmoid()}, {1, 8, 8});
        FAIL() << "expected an error";
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(Model({LayerSpec::dense(2)}, {1, 4, 4}), UsageError);
    EXPECT_THROW(Model({LayerSpec::dense(2), LayerSpec::sigmoid()}, {1, 4, 4}), UsageError);

    Model m({LayerSpec::dense(1), LayerSpec::sigmoid()}, {1, 4, 4});
    std::mt19937_64 rng(1);
    EXPECT_THROW(forward(m, Tensor({1, 5, 4}), false, rng), UsageError);
}

TEST(Forward, ShapeAlgebra) {
    for (int h = 5; h < 40; h += 3) {
        for (int k = 1; k <= 5; ++k) {
            EXPECT_EQ(output_shape(LayerSpec::conv(2, k), {1, h, h}, 0), (Shape{2, h - k + 1, h - k + 1}));
            EXPECT_EQ(output_shape(LayerSpec::maxpool(k), {3, h, h}, 0), (Shape{3, h / k, h / k}));
        }
    }
    Model ref(reference_architecture());
    EXPECT_EQ(ref.shapes()[8], (Shape{64, 13, 13}));
}

TEST(Backward, ZeroLossGradientGivesZeroGradients) {
    Model m(tiny_arch(), {1, 24, 24});
    std::mt19937_64 rng(3);
    const Tensor x = contam::testing::randomize(m, rng);
    const auto fr = forward(m, x, true, rng);
    const auto g = backward(m, fr.cache, 0.0);
    for (const auto& p : g.params) {
        for (double v : p.weight.data) EXPECT_EQ(v, 0.0);
        for (double v : p.bias.data) EXPECT_EQ(v, 0.0);
    }
}

TEST(Backward, ReluPassesOrBlocks) {
    // relu directly on the input: d p / d x_i = w_i * s'(z) for positive x_i, 0 for negative.
    Model m({LayerSpec::relu(), LayerSpec::dense(1), LayerSpec::sigmoid()}, {1, 1, 4});
    m.params()[1].weight.data = {0.5, -1.0, 2.0, 1.5};
    m.touch();
    Tensor x({1, 1, 4});
    x.data = {0.3, -0.2, -0.7, 0.9};
    std::mt19937_64 rng(0);
    const auto fr = forward(m, x, true, rng);
    const auto g = backward_logit(m, fr.cache, 1.0);
    EXPECT_DOUBLE_EQ(g.input.data[0], 0.5);
    EXPECT_DOUBLE_EQ(g.input.data[1], 0.0);
    EXPECT_DOUBLE_EQ(g.input.data[2], 0.0);
    EXPECT_DOUBLE_EQ(g.input.data[3], 1.5);
}

TEST(Backward, StaleCacheRejected) {
    Model m(tiny_arch(), {1, 24, 24});
    std::mt19937_64 rng(3);
    const Tensor x = contam::testing::randomize(m, rng);
    const auto fr = forward(m, x, true, rng);
    m.touch();
    EXPECT_THROW(backward(m, fr.cache, 1.0), UsageError);
    Model other = m;
    const auto fr2 = forward(m, x, true, rng);
    EXPECT_THROW(backward(other, fr2.cache, 1.0), UsageError);
}

TEST(Backward, FiniteDifferencesOnRandomNetworks) {
    std::mt19937_64 rng(2024);
    std::set<LayerKind> seen;
    for (int i = 0; i < 40; ++i) {
        const auto cfg = contam::testing::random_grad_config(rng);
        Model m(cfg.layers, cfg.input);
        const Tensor x = contam::testing::randomize(m, rng);
        const auto r = contam::testing::check_gradients(m, x, rng(), true);
        seen.insert(r.kinds.begin(), r.kinds.end());
        EXPECT_LE(r.max_rel_error, 1e-4) << "config " << i;
        EXPECT_GT(r.checked, 0);
    }
    EXPECT_EQ(seen.size(), 6u);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
    Model m({LayerSpec::dropout(0.3), LayerSpec::dense(1), LayerSpec::sigmoid()}, {1, 1, 3});
    Tensor x({1, 1, 3});
    x.data = {0.2, 0.5, 1.0};
    std::mt19937_64 rng(11);
    const int n = 10000;
    std::vector<double> sum(3, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto fr = forward(m, x, true, rng);
        for (int j = 0; j < 3; ++j) sum[j] += fr.cache.inputs[1].data[j];
    }
    const double r = 0.3;
    for (int j = 0; j < 3; ++j) {
        const double sigma = x.data[j] * std::sqrt(r / (1 - r)) / std::sqrt(static_cast<double>(n));
        EXPECT_NEAR(sum[j] / n, x.data[j], 3 * sigma);
    }
    const auto inf = forward(m, x, false, rng);
    EXPECT_EQ(inf.cache.inputs[1].data, x.data);
}

TEST(Loss, WeightedCrossEntropy) {
    EXPECT_NEAR(weighted_bce(0.5, 1, {1, 1}).loss, std::log(2.0), 1e-15);
    for (double p : {0.1, 0.4, 0.9}) {
        EXPECT_DOUBLE_EQ(weighted_bce(p, 1, {1, 5}).loss, 5 * weighted_bce(p, 1, {1, 1}).loss);
        EXPECT_DOUBLE_EQ(weighted_bce(p, 0, {1, 1}).loss, weighted_bce(p, 0, {1, 10}).loss);
        const double c = 3.5;
        const auto a = weighted_bce(p, 1, {2, 3});
        const auto b = weighted_bce(p, 1, {2 * c, 3 * c});
        EXPECT_NEAR(b.loss, c * a.loss, 1e-12);
        EXPECT_NEAR(b.dloss_dp, c * a.dloss_dp, 1e-12);
        // chain rule through the sigmoid
        EXPECT_NEAR(a.dloss_dlogit, a.dloss_dp * p * (1 - p), 1e-12);
    }
    EXPECT_TRUE(std::isfinite(weighted_bce(0.0, 1, {1, 1}).loss));
    EXPECT_NEAR(weighted_bce(0.0, 1, {1, 1}).loss, -std::log(kProbabilityEpsilon), 1e-9);
    EXPECT_TRUE(std::isfinite(weighted_bce(1.0, 0, {1, 1}).loss));
    EXPECT_THROW(weighted_bce(0.5, 2, {1, 1}), UsageError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> p{1.0, -2.0}, g{0.0, 0.0}, m{0, 0}, v{0, 0};
    adam_update(p, g, m, v, 1, 0.01, 0.9);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByAlphaAgainstGradient) {
    std::vector<double> p{0.0, 0.0, 0.0}, g{3.0, -0.01, 1e-3}, m(3, 0.0), v(3, 0.0);
    adam_update(p, g, m, v, 1, 0.05, 0.9);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], -0.05 * (g[i] > 0 ? 1 : -1), 1e-6);
}

TEST(Adam, ConstantGradientStepConvergesToAlpha) {
    const double alpha = 0.01, beta1 = 0.8, g = 0.37;
    std::vector<double> p{0.0}, grad{g}, m{0.0}, v{0.0};
    // independent iteration of the moment recurrences
    double mm = 0, vv = 0, last_step = 0;
    for (int t = 1; t <= 3000; ++t) {
        const double before = p[0];
        adam_update(p, grad, m, v, t, alpha, beta1);
        mm = beta1 * mm + (1 - beta1) * g;
        vv = 0.999 * vv + 0.001 * g * g;
        const double expect = alpha * (mm / (1 - std::pow(beta1, t))) / (std::sqrt(vv / (1 - std::pow(0.999, t))) + 1e-8);
        EXPECT_NEAR(before - p[0], expect, 1e-12);
        last_step = before - p[0];
    }
    EXPECT_NEAR(last_step, alpha, 1e-6);
}

TEST(Adam, StepIncrementsCounterAndTouchesModel) {
    Model m(tiny_arch(), {1, 24, 24});
    m.initialize(1);
    Gradients g;
    g.zero_like(m);
    AdamState st;
    const auto v0 = m.version();
    adam_step(m, g, st, 1e-3, 0.9);
    EXPECT_EQ(st.step, 1);
    EXPECT_GT(m.version(), v0);
    EXPECT_EQ(st.m.size(), m.params().size());
}

TEST(Augment, IdentityAndConstant) {
    std::mt19937_64 rng(4);
    imaging::GrayImage img(120, 120);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() % 256);
    EXPECT_EQ(apply_affine(img, {}), img);
    imaging::GrayImage flat(120, 120, 93);
    for (int i = 0; i < 20; ++i) {
        const auto out = augment(flat, rng);
        EXPECT_EQ(out, flat);
        EXPECT_EQ(out.width, 120);
    }
}

TEST(Augment, QuarterTurnMatchesRemapOracle) {
    imaging::GrayImage img(120, 120);
    for (int r = 0; r < 120; ++r)
        for (int c = 0; c < 120; ++c) img.at(r, c) = static_cast<std::uint8_t>((r * 2 + c * 5 + (r > 70 ? 60 : 0)) % 256);
    const auto out = apply_affine(img, {90.0, 0.0, 0.0, 1.0});
    // rotating by +90 degrees about (59.5, 59.5): out(r, c) = in(c', r') with the inverse map below
    int worst = 0;
    for (int r = 0; r < 120; ++r) {
        for (int c = 0; c < 120; ++c) {
            const double dr = r - 59.5, dc = c - 59.5;
            const int sr = static_cast<int>(std::lround(59.5 - dc));
            const int sc = static_cast<int>(std::lround(59.5 + dr));
            worst = std::max(worst, std::abs(int(out.at(r, c)) - int(img.at(sr, sc))));
        }
    }
    EXPECT_LE(worst, 1);
}

TEST(Augment, ShiftMovesContent) {
    imaging::GrayImage img(120, 120, 200);
    img.at(60, 60) = 10;
    const auto out = apply_affine(img, {0.0, 5.0, -7.0, 1.0});
    EXPECT_EQ(out.at(65, 53), 10);
}

TEST(Train, MemorizesTwoSamples) {
    std::mt19937_64 rng(8);
    std::vector<LabeledCrop> data{{blob_crop(24, true, rng), Label::tc, "a"}, {blob_crop(24, false, rng), Label::fc, "b"}};
    Hyperparams hp;
    hp.architecture = tiny_arch();
    hp.epochs = 60;
    hp.batch_size = 2;
    hp.alpha = 5e-3;
    hp.augmentation.copies = 0;
    const auto res = train(data, hp);
    EXPECT_EQ(predict(res.model, data[0].image).label, Label::tc);
    EXPECT_EQ(predict(res.model, data[1].image).label, Label::fc);
    EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
}

TEST(Train, SeparableCropsAndDeterminism) {
    std::mt19937_64 rng(21);
    std::vector<LabeledCrop> data, val;
    for (int i = 0; i < 60; ++i) data.push_back({blob_crop(32, i % 2 == 0, rng), i % 2 == 0 ? Label::tc : Label::fc, ""});
    for (int i = 0; i < 100; ++i) val.push_back({blob_crop(32, i % 2 == 0, rng), i % 2 == 0 ? Label::tc : Label::fc, ""});
    Hyperparams hp;
    hp.architecture = tiny_arch();
    hp.epochs = 5;
    hp.batch_size = 8;
    hp.alpha = 1e-2;
    hp.augmentation.copies = 1;
    const auto a = train(data, hp);
    int correct = 0;
    for (const auto& c : val) correct += predict(a.model, c.image).label == c.label;
    EXPECT_GE(correct, 99);

    const auto b = train(data, hp);
    for (std::size_t i = 0; i < a.model.params().size(); ++i) {
        EXPECT_EQ(a.model.params()[i].weight.data, b.model.params()[i].weight.data);
        EXPECT_EQ(a.model.params()[i].bias.data, b.model.params()[i].bias.data);
    }
    EXPECT_EQ(a.loss_trace, b.loss_trace);

    TrainOptions two;
    two.threads = 2;
    const auto c = train(data, hp, two);
    const auto d = train(data, hp, two);
    EXPECT_EQ(c.model.params()[0].weight.data, d.model.params()[0].weight.data);
}

TEST(Train, RejectsBadInput) {
    std::mt19937_64 rng(1);
    Hyperparams hp;
    hp.architecture = tiny_arch();
    std::vector<LabeledCrop> one{{blob_crop(24, true, rng), Label::tc, ""}};
    EXPECT_THROW(train(one, hp), UsageError);
    hp.alpha = 0;
    EXPECT_THROW(hp.validate(), UsageError);
    hp.alpha = 1e-3;
    hp.mu = 1.0;
    EXPECT_THROW(hp.validate(), UsageError);
    hp.mu = 0.9;
    hp.class_weights = {0, 1};
    EXPECT_THROW(hp.validate(), UsageError);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
    std::mt19937_64 rng(2);
    std::vector<LabeledCrop> data{{blob_crop(24, true, rng), Label::tc, ""}, {blob_crop(24, false, rng), Label::fc, ""}};
    Hyperparams hp;
    hp.architecture = tiny_arch();
    hp.alpha = 1e300;
    hp.epochs = 5;
    hp.batch_size = 1;
    hp.augmentation.copies = 0;
    try {
        train(data, hp);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch(), 0);
        EXPECT_GE(e.batch(), 0);
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(Predict, WrongSizeRejected) {
    Model m(tiny_arch(), {1, 24, 24});
    EXPECT_THROW(predict(m, imaging::GrayImage(20, 24)), UsageError);
}

TEST(ModelIo, RoundTripIsExact) {
    Model m(reference_architecture());
    m.initialize(99);
    const auto path = std::filesystem::temp_directory_path() / "contam_model_rt.cdnn";
    save_model(m, path);
    const Model back = load_model(path);
    EXPECT_EQ(back.layers(), m.layers());
    EXPECT_EQ(back.input_shape(), m.input_shape());
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        EXPECT_EQ(back.params()[i].weight.data, m.params()[i].weight.data);
        EXPECT_EQ(back.params()[i].bias.data, m.params()[i].bias.data);
    }
    const auto path2 = std::filesystem::temp_directory_path() / "contam_model_rt2.cdnn";
    save_model(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(ModelIo, CorruptFilesRejected) {
    const auto path = std::filesystem::temp_directory_path() / "contam_model_bad.cdnn";
    {
        std::ofstream out(path, std::ios::binary);
        out << "XXXX1234";
    }
    EXPECT_THROW(load_model(path), DataError);
    Model m(tiny_arch(), {1, 24, 24});
    m.initialize(1);
    save_model(m, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    EXPECT_THROW(load_model(path), DataError);
}

TEST(HyperparamsIo, RoundTrip) {
    Hyperparams hp;
    hp.architecture = tiny_arch();
    hp.alpha = 2.5e-4;
    hp.class_weights = {1, 5};
    hp.augmentation.copies = 2;
    hp.seed = 77;
    const Hyperparams back = hyperparams_from_json(to_json(hp));
    EXPECT_EQ(back.architecture, hp.architecture);
    EXPECT_EQ(back.alpha, hp.alpha);
    EXPECT_EQ(back.class_weights, hp.class_weights);
    EXPECT_EQ(back.augmentation.copies, 2);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_THROW(hyperparams_from_json(nlohmann::json{{"alpha", -1.0}}), UsageError);
}

TEST(Manifest, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "contam_manifest";
    std::filesystem::create_directories(dir);
    write_manifest({{"a.pgm", Label::tc}, {"b.pgm", Label::fc}}, dir / "m.csv");
    const auto back = read_manifest(dir / "m.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].path, "a.pgm");
    EXPECT_EQ(back[1].label, Label::fc);
}
