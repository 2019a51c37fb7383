#include "contam/mtfilter.hpp"

#include "contam/error.hpp"
#include "contam/runs.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>

namespace contam::mtfilter {

using imaging::Blob;
using imaging::GrayImage;
using imaging::PixelCoord;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lowest ladder index at which a pixel of gray level g turns white, or nullopt above th_22.
std::optional<int> entry_level(std::uint8_t g) {
    for (int k = 0; k < kMaxLevel; ++k) {
        if (static_cast<double>(g) < threshold_level(k)) return k;
    }
    return std::nullopt;
}

/// Component containing `pos` after binarizing its neighbourhood at th_k and closing; image coordinates.
std::optional<Blob> component_at(const GrayImage& img, PixelCoord pos, int k, const imaging::StructuringElement& se,
                                 int window) {
    const GrayImage sub = imaging::crop(img, pos, window);
    const int r0 = pos.row - window / 2, c0 = pos.col - window / 2;
    const auto runs = imaging::closing(imaging::binarize_runs(sub, threshold_level(k)), se);
    for (const auto& comp : imaging::run_components(runs)) {
        const bool hit = std::any_of(comp.runs.begin(), comp.runs.end(), [&](const auto& rr) {
            return rr.first == window / 2 && rr.second.col0 <= window / 2 && rr.second.col1 >= window / 2;
        });
        if (!hit) continue;
        auto px = comp.pixels();
        for (auto& p : px) {
            p.row += r0;
            p.col += c0;
        }
        return imaging::make_blob(comp.label, std::move(px));
    }
    return std::nullopt;
}

struct Reference {
    Kind kind;
    int k_entry;
    int k_ref;
    Blob blob;
};

struct IntervalSet {
    ShapeInterval area, ratio, solidity;
};

IntervalSet fit_intervals(const std::vector<const Reference*>& refs) {
    std::vector<double> area, ratio, solidity;
    for (const auto* r : refs) {
        area.push_back(r->blob.area);
        ratio.push_back(r->blob.aspect_ratio);
        solidity.push_back(r->blob.solidity);
    }
    return {ShapeInterval::from_samples(area, 0.0, kInf), ShapeInterval::from_samples(ratio, 1.0, kInf),
            ShapeInterval::from_samples(solidity, 0.0, 1.0)};
}

struct Candidate {
    imaging::Point2 centroid;
    int k;
    double dist;
    std::optional<Growth> growth;
};

struct GridScore {
    int matched = -1;
    int false_positives = 0;

    bool better_than(const GridScore& o) const {
        if (matched != o.matched) return matched > o.matched;
        return false_positives < o.false_positives;
    }
};

}  // namespace

CalibrationReport calibrate(std::span<const AnnotatedImage> annotated, const CalibrationSearch& search) {
    if (annotated.empty()) throw UsageError("calibration needs at least one annotated image");
    if (search.se_options.empty() || search.d0_options.empty() || search.area_growth_options.empty() ||
        search.axis_growth_options.empty()) {
        throw UsageError("calibration search ranges must be non-empty");
    }
    CalibrationReport report;
    const int window = search.neighborhood_size;

    // Entry levels are morphology-free; everything else is re-measured per structuring element.
    struct Target {
        std::size_t image;
        AnnotatedContamination c;
        int k_entry;
    };
    std::vector<Target> targets;
    std::map<Kind, int> usable_per_kind, unusable_per_kind;
    for (std::size_t i = 0; i < annotated.size(); ++i) {
        const auto& ai = annotated[i];
        ai.annotation.validate(ai.image.width, ai.image.height);
        for (const auto& c : ai.annotation.contaminations) {
            const auto k0 = entry_level(ai.image.at(c.position.row, c.position.col));
            if (!k0) {
                ++unusable_per_kind[c.kind];
                report.warnings.push_back("contamination (" + to_string(c.kind) + ") at (" +
                                          std::to_string(c.position.row) + ", " + std::to_string(c.position.col) +
                                          ") in " + ai.annotation.image +
                                          " is not segmentable below th_23; excluded");
                continue;
            }
            ++usable_per_kind[c.kind];
            targets.push_back({i, c, *k0});
        }
    }
    for (const auto& [kind, n] : unusable_per_kind) {
        if (!usable_per_kind.contains(kind)) report.uncalibratable.push_back(kind);
    }
    for (const auto& [kind, n] : usable_per_kind) {
        if (n < 2) report.warnings.push_back("only one " + to_string(kind) + " sample; its interval has zero width");
    }
    if (targets.empty()) throw DataError("no segmentable contaminations in the calibration set");
    report.contaminations_used = static_cast<int>(targets.size());

    GridScore best;
    CalibrationProfile best_profile;

    for (const auto& se : search.se_options) {
        // Reference blob per contamination: the first level (within two steps of entry) where it stops growing.
        std::vector<Reference> refs;
        for (const auto& t : targets) {
            const GrayImage& img = annotated[t.image].image;
            const int last = std::min(t.k_entry + 2, kMaxLevel - 1);
            std::optional<Reference> chosen;
            for (int k = t.k_entry; k <= last && !chosen; ++k) {
                auto here = component_at(img, t.c.position, k, se, window);
                if (!here) continue;
                auto next = component_at(img, t.c.position, k + 1, se, window);
                const double growth = next ? static_cast<double>(next->area) / here->area : kInf;
                if (growth <= search.settle_growth) chosen = Reference{t.c.kind, t.k_entry, k, std::move(*here)};
            }
            if (!chosen) {
                auto entry = component_at(img, t.c.position, t.k_entry, se, window);
                if (!entry) continue;
                chosen = Reference{t.c.kind, t.k_entry, t.k_entry, std::move(*entry)};
            }
            refs.push_back(std::move(*chosen));
        }
        if (refs.empty()) continue;

        CalibrationProfile base;
        base.se = se;
        base.neighborhood_size = search.neighborhood_size;
        base.merge_radius = search.merge_radius;
        base.per_band = search.per_band;
        base.ladder.k_lo = kMaxLevel;
        base.ladder.k_hi = 0;
        std::vector<const Reference*> all;
        std::map<Kind, std::vector<const Reference*>> by_kind;
        for (const auto& r : refs) {
            all.push_back(&r);
            by_kind[r.kind].push_back(&r);
            base.ladder.k_lo = std::min(base.ladder.k_lo, r.k_entry);
            base.ladder.k_hi = std::max(base.ladder.k_hi, std::min(r.k_ref + 1, kMaxLevel));
        }
        const IntervalSet global = fit_intervals(all);
        base.area_iv = global.area;
        base.ratio_iv = global.ratio;
        base.solidity_iv = global.solidity;
        for (const auto& [kind, list] : by_kind) {
            ShapeBand band;
            band.kind = kind;
            band.k_lo = kMaxLevel;
            band.k_hi = 0;
            for (const auto* r : list) {
                band.k_lo = std::min(band.k_lo, r->k_entry);
                band.k_hi = std::max(band.k_hi, std::min(r->k_ref + 1, kMaxLevel));
            }
            const IntervalSet iv = fit_intervals(list);
            band.area = iv.area;
            band.ratio = iv.ratio;
            band.solidity = iv.solidity;
            base.bands.push_back(band);
        }

        // Stage the expensive work once per element: candidates, neighbour distances, growth.
        const double d_min = *std::min_element(search.d0_options.begin(), search.d0_options.end());
        std::vector<std::vector<Candidate>> per_image(annotated.size());
        for (std::size_t i = 0; i < annotated.size(); ++i) {
            const GrayImage& img = annotated[i].image;
            for (int k = base.ladder.k_lo; k < base.ladder.k_hi; ++k) {
                const auto cands = level_candidates(img, base, k);
                std::vector<imaging::Point2> pts;
                for (const auto& c : cands) pts.push_back(c.blob.centroid);
                const auto dist = mean_neighbour_distances(pts);
                for (std::size_t j = 0; j < cands.size(); ++j) {
                    if (dist[j] < d_min) continue;
                    per_image[i].push_back({cands[j].blob.centroid, k, dist[j], measure_growth(img, cands[j].blob, k, base)});
                }
            }
        }

        for (double d0 : search.d0_options) {
            for (double ag : search.area_growth_options) {
                for (double xg : search.axis_growth_options) {
                    GridScore score{0, 0};
                    for (std::size_t i = 0; i < annotated.size(); ++i) {
                        std::vector<Detection> dets;
                        for (const auto& c : per_image[i]) {
                            if (c.dist < d0 || c.growth->area_ratio > ag || c.growth->axis_ratio > xg) continue;
                            Detection d;
                            d.centroid = c.centroid;
                            d.threshold_index = c.k;
                            dets.push_back(std::move(d));
                        }
                        dets = merge_duplicates(std::move(dets), search.merge_radius);
                        const auto m = match_detections(dets, annotated[i].annotation, search.match_radius);
                        score.matched += m.matched;
                        score.false_positives += m.false_positives;
                    }
                    if (score.better_than(best)) {
                        best = score;
                        best_profile = base;
                        best_profile.d0 = d0;
                        best_profile.area_growth_max = ag;
                        best_profile.axis_growth_max = xg;
                    }
                }
            }
        }
    }
    if (best.matched < 0) throw DataError("calibration could not segment any annotated contamination");

    int total = 0;
    for (const auto& ai : annotated) total += static_cast<int>(ai.annotation.contaminations.size());
    report.profile = best_profile;
    report.recall = total > 0 ? static_cast<double>(best.matched) / total : 0.0;
    report.false_positives = best.false_positives;
    report.profile.validate();
    return report;
}

}  // namespace contam::mtfilter
