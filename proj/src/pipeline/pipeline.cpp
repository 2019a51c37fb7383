#include "contam/pipeline.hpp"

#include "contam/error.hpp"
#include "contam/image_io.hpp"
#include "contam/mtfilter_io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

namespace contam::pipeline {

namespace fs = std::filesystem;
using mtfilter::Verdict;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void PipelineConfig::validate() const {
    if (crop_size < 1) throw UsageError("crop size must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("decision threshold must lie in (0, 1)");
    if (!(budget_seconds > 0.0)) throw UsageError("time budget must be positive");
}

int ImageReport::count(Verdict v) const {
    return static_cast<int>(std::count_if(detections.begin(), detections.end(),
                                          [v](const mtfilter::Detection& d) { return d.verdict == v; }));
}

void classify(const imaging::GrayImage& img, std::span<mtfilter::Detection> candidates, const cnn::Model& model,
              int crop_size, double threshold) {
    const auto& in = model.input_shape();
    if (in.c != 1 || in.h != crop_size || in.w != crop_size) {
        throw UsageError("model expects " + std::to_string(in.h) + "x" + std::to_string(in.w) +
                         " crops but the pipeline crops " + std::to_string(crop_size) + "x" +
                         std::to_string(crop_size));
    }
    for (auto& d : candidates) {
        const auto crop = imaging::crop(img, imaging::round_to_pixel(d.centroid), crop_size);
        const double p = cnn::predict_probability(model, cnn::to_tensor(crop));
        d.probability = p;
        d.verdict = p >= threshold ? Verdict::true_contamination : Verdict::false_alarm;
    }
}

ImageReport run_pipeline(const imaging::GrayImage& img, const mtfilter::CalibrationProfile& profile,
                         const cnn::Model& model, const PipelineConfig& config, const std::string& image_id) {
    config.validate();
    ImageReport r;
    r.image = image_id;
    const auto t0 = Clock::now();
    r.detections = mtfilter::detect(img, profile);
    r.detect_seconds = since(t0);
    const auto t1 = Clock::now();
    classify(img, r.detections, model, config.crop_size, config.threshold);
    r.classify_seconds = since(t1);
    r.seconds = since(t0);
    r.over_budget = r.seconds > config.budget_seconds;
    return r;
}

std::vector<fs::path> annotation_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        const auto j = mtfilter::read_json_file(e.path());
        if (j.is_object() && j.contains("image") && j.contains("contaminations")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

PipelineEvaluation evaluate_pipeline(std::span<const fs::path> annotations, const mtfilter::CalibrationProfile& profile,
                                     const cnn::Model& model, const PipelineConfig& config, int threads,
                                     const std::function<void(const ImageReport&)>& on_image) {
    config.validate();
    if (annotations.empty()) throw UsageError("evaluation needs at least one annotated image");
    const std::size_t n = annotations.size();
    std::vector<ImageReport> reports(n);
    std::vector<mtfilter::GroundTruthAnnotation> truth(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::mutex cb_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                auto ann = mtfilter::load_annotation(annotations[i]);
                fs::path img_path = ann.image;
                if (img_path.is_relative()) img_path = annotations[i].parent_path() / img_path;
                const auto img = imaging::read_image(img_path);
                ann.validate(img.width, img.height);
                reports[i] = run_pipeline(img, profile, model, config, ann.image);
                truth[i] = std::move(ann);
                if (on_image) {
                    std::lock_guard lock(cb_mutex);
                    on_image(reports[i]);
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(threads, 1, static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    PipelineEvaluation ev;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = reports[i];
        const bool contaminated = !truth[i].contaminations.empty();
        eval::tally(ev.filter_cm, contaminated, !r.detections.empty());
        eval::tally(ev.pipeline_cm, contaminated, r.flagged());

        std::vector<mtfilter::Detection> kept;
        for (const auto& d : r.detections) {
            if (d.verdict == Verdict::true_contamination) kept.push_back(d);
        }
        const auto all = mtfilter::match_detections(r.detections, truth[i], ev.match_radius);
        const auto tc = mtfilter::match_detections(kept, truth[i], ev.match_radius);
        ev.contaminations += all.contaminations;
        ev.filter_matched += all.matched;
        ev.pipeline_matched += tc.matched;

        ev.over_budget += r.over_budget ? 1 : 0;
        ev.max_seconds = std::max(ev.max_seconds, r.seconds);
        total += r.seconds;
    }
    ev.mean_seconds = total / static_cast<double>(n);
    ev.reports = std::move(reports);
    return ev;
}

}  // namespace contam::pipeline
