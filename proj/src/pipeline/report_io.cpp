#include "contam/pipeline.hpp"

#include "contam/mtfilter_io.hpp"

namespace contam::pipeline {

using nlohmann::json;
using mtfilter::Verdict;

json to_json(const ImageReport& r, bool timing) {
    json dets = json::array();
    for (const auto& d : r.detections) dets.push_back(mtfilter::to_json(d));
    json j = {{"image", r.image},
              {"detections", dets},
              {"summary",
               {{"candidates", r.detections.size()},
                {"true_contamination", r.count(Verdict::true_contamination)},
                {"false_alarm", r.count(Verdict::false_alarm)},
                {"flagged", r.flagged()}}}};
    if (timing) {
        j["timing"] = {{"seconds", r.seconds},
                       {"detect_seconds", r.detect_seconds},
                       {"classify_seconds", r.classify_seconds},
                       {"over_budget", r.over_budget}};
    }
    return j;
}

json to_json(const PipelineEvaluation& e, bool timing) {
    auto object_recall = [&](int matched) {
        return e.contaminations > 0 ? json(static_cast<double>(matched) / e.contaminations) : json(nullptr);
    };
    json j = {{"images", e.reports.size()},
              {"filter", eval::metrics_json(e.filter_cm)},
              {"pipeline", eval::metrics_json(e.pipeline_cm)},
              {"object_level",
               {{"contaminations", e.contaminations},
                {"match_radius", e.match_radius},
                {"filter_matched", e.filter_matched},
                {"pipeline_matched", e.pipeline_matched},
                {"filter_recall", object_recall(e.filter_matched)},
                {"pipeline_recall", object_recall(e.pipeline_matched)}}}};
    if (timing) {
        j["timing"] = {{"mean_seconds", e.mean_seconds}, {"max_seconds", e.max_seconds}, {"over_budget", e.over_budget}};
    }
    return j;
}

}  // namespace contam::pipeline
