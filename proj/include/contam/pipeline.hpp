#pragma once

#include "contam/cnn.hpp"
#include "contam/eval.hpp"
#include "contam/mtfilter.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace contam::pipeline {

struct PipelineConfig {
    std::filesystem::path profile_path;
    std::filesystem::path model_path;
    int crop_size = 120;
    double threshold = 0.5;       // probability at or above which a candidate is a true contamination
    double budget_seconds = 5.0;  // per image; overruns are reported, not fatal
    std::filesystem::path report_path;

    void validate() const;
};

struct ImageReport {
    std::string image;
    std::vector<mtfilter::Detection> detections;  // every filter candidate, with a terminal verdict
    double detect_seconds = 0.0;
    double classify_seconds = 0.0;
    double seconds = 0.0;
    bool over_budget = false;

    int count(mtfilter::Verdict v) const;
    bool flagged() const { return count(mtfilter::Verdict::true_contamination) > 0; }
};

/// Sets verdict and probability of each candidate from the classifier output on its crop.
void classify(const imaging::GrayImage& img, std::span<mtfilter::Detection> candidates, const cnn::Model& model,
              int crop_size = 120, double threshold = 0.5);

ImageReport run_pipeline(const imaging::GrayImage& img, const mtfilter::CalibrationProfile& profile,
                         const cnn::Model& model, const PipelineConfig& config, const std::string& image_id = "");

/// Annotation documents (*.json with an image and contaminations) in `dir`, sorted by name.
std::vector<std::filesystem::path> annotation_files(const std::filesystem::path& dir);

struct PipelineEvaluation {
    eval::ConfusionMatrix filter_cm;    // image flagged if the filter proposed anything
    eval::ConfusionMatrix pipeline_cm;  // image flagged if a candidate survived classification
    int contaminations = 0;
    int filter_matched = 0;    // object level: annotated contaminations with a candidate nearby
    int pipeline_matched = 0;  // same, counting only true_contamination verdicts
    double match_radius = 10.0;
    std::vector<ImageReport> reports;
    int over_budget = 0;
    double mean_seconds = 0.0;
    double max_seconds = 0.0;
};

/// Runs the pipeline on every annotated image and scores it at image level.
/// Images are processed on `threads` workers; results keep the input order.
PipelineEvaluation evaluate_pipeline(std::span<const std::filesystem::path> annotations,
                                     const mtfilter::CalibrationProfile& profile, const cnn::Model& model,
                                     const PipelineConfig& config, int threads = 1,
                                     const std::function<void(const ImageReport&)>& on_image = {});

// ---- reports ----------------------------------------------------------------

/// Timing fields are omitted when `timing` is false, which makes reports comparable byte for byte.
nlohmann::json to_json(const ImageReport& r, bool timing = true);
nlohmann::json to_json(const PipelineEvaluation& e, bool timing = true);

}  // namespace contam::pipeline
