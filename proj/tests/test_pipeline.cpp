#include "contam/error.hpp"
#include "contam/image_io.hpp"
#include "contam/mtfilter_io.hpp"
#include "contam/pipeline.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

namespace contam::pipeline {
namespace {

namespace fs = std::filesystem;
using imaging::GrayImage;
using mtfilter::Verdict;

constexpr int kCrop = 21;

GrayImage blank() {
    return GrayImage(200, 150, 230);
}

void fill_rect(GrayImage& img, int r0, int c0, int rows, int cols, std::uint8_t gray) {
    for (int r = r0; r < r0 + rows; ++r)
        for (int c = c0; c < c0 + cols; ++c) img.at(r, c) = gray;
}

// A 2x14 dark bar and a 5x5 mid-gray square; both pass the broad profile below.
void plant_needle(GrayImage& img) {
    fill_rect(img, 40, 40, 2, 14, 40);
}
void plant_knot(GrayImage& img) {
    fill_rect(img, 100, 140, 5, 5, 95);
}

mtfilter::CalibrationProfile broad_profile() {
    mtfilter::CalibrationProfile p;
    p.ladder = {3, 12};
    p.area_iv = {0, 0, 10, 60};
    p.ratio_iv = {0, 0, 1, 20};
    p.solidity_iv = {0, 0, 0.5, 1};
    p.se = {imaging::SeShape::disk, 1};
    p.d0 = 10.0;
    p.neighborhood_size = 41;
    return p;
}

// Single dense unit looking only at the crop's centre pixel: TC iff it is darker than 64.
cnn::Model centre_darkness_model() {
    cnn::Model m({cnn::LayerSpec::dense(1), cnn::LayerSpec::sigmoid()}, {1, kCrop, kCrop});
    m.initialize(1);
    auto& w = m.params()[0].weight.data;
    std::fill(w.begin(), w.end(), 0.0);
    w[static_cast<std::size_t>(kCrop / 2) * kCrop + kCrop / 2] = -40.0;
    m.params()[0].bias.data[0] = 10.0;
    m.touch();
    return m;
}

PipelineConfig config() {
    PipelineConfig c;
    c.crop_size = kCrop;
    return c;
}

TEST(Pipeline, BlankImageGivesEmptyReport) {
    const auto r = run_pipeline(blank(), broad_profile(), centre_darkness_model(), config(), "blank");
    EXPECT_TRUE(r.detections.empty());
    EXPECT_FALSE(r.flagged());
    const auto j = to_json(r, false);
    EXPECT_EQ(j.at("summary").at("candidates"), 0);
    EXPECT_FALSE(j.contains("timing"));
    EXPECT_TRUE(to_json(r).contains("timing"));
}

TEST(Pipeline, ClassifierSplitsCandidates) {
    GrayImage img = blank();
    plant_needle(img);
    plant_knot(img);
    const auto r = run_pipeline(img, broad_profile(), centre_darkness_model(), config(), "scene");
    ASSERT_EQ(r.detections.size(), 2u);
    for (const auto& d : r.detections) {
        ASSERT_TRUE(d.probability.has_value());
        EXPECT_NE(d.verdict, Verdict::candidate);
        EXPECT_EQ(d.verdict == Verdict::true_contamination, *d.probability >= 0.5);
    }
    EXPECT_EQ(r.count(Verdict::true_contamination), 1);
    EXPECT_EQ(r.count(Verdict::false_alarm), 1);
    const auto tc = std::find_if(r.detections.begin(), r.detections.end(),
                                 [](const auto& d) { return d.verdict == Verdict::true_contamination; });
    EXPECT_NEAR(tc->centroid.row, 40.5, 1e-9);
    EXPECT_NEAR(tc->centroid.col, 46.5, 1e-9);
    EXPECT_TRUE(r.flagged());
}

TEST(Pipeline, TrueContaminationsAreASubsetOfFilterCandidates) {
    GrayImage img = blank();
    plant_needle(img);
    plant_knot(img);
    const auto profile = broad_profile();
    const auto candidates = mtfilter::detect(img, profile);
    const auto r = run_pipeline(img, profile, centre_darkness_model(), config());
    ASSERT_EQ(r.detections.size(), candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        EXPECT_EQ(r.detections[i].blob.pixels, candidates[i].blob.pixels);
    }
}

TEST(Pipeline, ShapeAndConfigErrors) {
    GrayImage img = blank();
    plant_needle(img);
    auto cfg = config();
    cfg.crop_size = 120;
    EXPECT_THROW(run_pipeline(img, broad_profile(), centre_darkness_model(), cfg), UsageError);
    cfg = config();
    cfg.threshold = 1.0;
    EXPECT_THROW(cfg.validate(), UsageError);
    cfg = config();
    cfg.budget_seconds = 0.0;
    EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Pipeline, BudgetOverrunIsReportedNotFatal) {
    GrayImage img = blank();
    plant_needle(img);
    auto cfg = config();
    cfg.budget_seconds = 1e-12;
    const auto r = run_pipeline(img, broad_profile(), centre_darkness_model(), cfg);
    EXPECT_TRUE(r.over_budget);
    EXPECT_GE(r.seconds, r.detect_seconds);
}

class PipelineFiles : public ::testing::Test {
protected:
    fs::path dir = fs::temp_directory_path() / ("contam_pipeline_" + std::to_string(::getpid()));

    void SetUp() override {
        fs::create_directories(dir);
        GrayImage contaminated = blank();
        plant_needle(contaminated);
        GrayImage decoy = blank();
        plant_knot(decoy);
        write("a", contaminated, {{{40, 47}, mtfilter::Kind::needle}});
        write("b", decoy, {});
        write("c", blank(), {});
        mtfilter::write_json_file({{"generator", "test"}}, dir / "metadata.json");
    }
    void TearDown() override { fs::remove_all(dir); }

    void write(const std::string& stem, const GrayImage& img,
               std::vector<mtfilter::AnnotatedContamination> truth) {
        imaging::write_png(img, dir / (stem + ".png"));
        mtfilter::GroundTruthAnnotation a{stem + ".png", std::move(truth)};
        mtfilter::save_annotation(a, dir / (stem + ".json"));
    }
};

TEST_F(PipelineFiles, AnnotationListingSkipsOtherJson) {
    const auto files = annotation_files(dir);
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "a.json");
    EXPECT_EQ(files[2].filename(), "c.json");
    EXPECT_THROW(annotation_files(dir / "nope"), DataError);
}

TEST_F(PipelineFiles, ImageLevelAccounting) {
    const auto files = annotation_files(dir);
    int seen = 0;
    const auto ev = evaluate_pipeline(files, broad_profile(), centre_darkness_model(), config(), 1,
                                      [&](const ImageReport&) { ++seen; });
    EXPECT_EQ(seen, 3);
    // filter: a flagged (tp), b flagged (fp), c clear (tn)
    EXPECT_EQ(ev.filter_cm.tp, 1);
    EXPECT_EQ(ev.filter_cm.fp, 1);
    EXPECT_EQ(ev.filter_cm.tn, 1);
    EXPECT_EQ(ev.filter_cm.fn, 0);
    // the classifier clears the decoy
    EXPECT_EQ(ev.pipeline_cm.tp, 1);
    EXPECT_EQ(ev.pipeline_cm.fp, 0);
    EXPECT_EQ(ev.pipeline_cm.tn, 2);
    EXPECT_EQ(ev.contaminations, 1);
    EXPECT_EQ(ev.filter_matched, 1);
    EXPECT_EQ(ev.pipeline_matched, 1);
    ASSERT_EQ(ev.reports.size(), 3u);
    EXPECT_EQ(ev.reports[1].image, "b.png");
}

TEST_F(PipelineFiles, ReportsIndependentOfThreadCountWithoutTiming) {
    const auto files = annotation_files(dir);
    const auto one = evaluate_pipeline(files, broad_profile(), centre_darkness_model(), config(), 1);
    const auto three = evaluate_pipeline(files, broad_profile(), centre_darkness_model(), config(), 3);
    EXPECT_EQ(to_json(one, false).dump(), to_json(three, false).dump());
    for (std::size_t i = 0; i < one.reports.size(); ++i) {
        EXPECT_EQ(to_json(one.reports[i], false).dump(), to_json(three.reports[i], false).dump());
    }
}

TEST_F(PipelineFiles, MissingImageIsADataError) {
    fs::remove(dir / "b.png");
    const auto files = annotation_files(dir);
    EXPECT_THROW(evaluate_pipeline(files, broad_profile(), centre_darkness_model(), config(), 2), DataError);
    EXPECT_THROW(evaluate_pipeline({}, broad_profile(), centre_darkness_model(), config()), UsageError);
}

}  // namespace
}  // namespace contam::pipeline
