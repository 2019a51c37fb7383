#include "contam/mtfilter.hpp"

#include "contam/error.hpp"
#include "contam/runs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace contam::mtfilter {

using imaging::Blob;
using imaging::GrayImage;
using imaging::Point2;

void ThresholdLadder::validate() const {
    if (k_lo < 0 || k_lo >= k_hi || k_hi > kMaxLevel) {
        throw UsageError("threshold ladder requires 0 <= k_lo < k_hi <= 23 (got [" + std::to_string(k_lo) + ", " +
                         std::to_string(k_hi) + "))");
    }
}

bool ShapeInterval::contains(double v) const {
    // Absorbs rounding when an interval collapses to a point.
    const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    return v >= lo - tol && v <= hi + tol;
}

ShapeInterval ShapeInterval::from_samples(std::span<const double> values, double natural_lo, double natural_hi) {
    if (values.empty()) throw UsageError("cannot fit a shape interval to an empty sample");
    ShapeInterval iv;
    double sum = 0.0;
    for (double v : values) sum += v;
    iv.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - iv.mean) * (v - iv.mean);
        iv.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    iv.lo = std::clamp(iv.mean - 2.0 * iv.std, natural_lo, natural_hi);
    iv.hi = std::clamp(iv.mean + 2.0 * iv.std, natural_lo, natural_hi);
    return iv;
}

ShapeInterval ShapeInterval::widened(double amount) const {
    ShapeInterval out = *this;
    out.lo -= std::max(0.0, amount);
    out.hi += std::max(0.0, amount);
    return out;
}

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::pebble: return "pebble";
        case Kind::needle: return "needle";
        case Kind::clip: return "clip";
        case Kind::plastic: return "plastic";
        case Kind::other: return "other";
    }
    return "other";
}

Kind kind_from_string(const std::string& name) {
    if (name == "pebble") return Kind::pebble;
    if (name == "needle" || name == "needle_bit") return Kind::needle;
    if (name == "clip") return Kind::clip;
    if (name == "plastic") return Kind::plastic;
    if (name == "other") return Kind::other;
    throw DataError("unknown contamination kind: " + name);
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::candidate: return "candidate";
        case Verdict::true_contamination: return "true_contamination";
        case Verdict::false_alarm: return "false_alarm";
    }
    return "candidate";
}

Verdict verdict_from_string(const std::string& name) {
    if (name == "candidate") return Verdict::candidate;
    if (name == "true_contamination") return Verdict::true_contamination;
    if (name == "false_alarm") return Verdict::false_alarm;
    throw DataError("unknown verdict: " + name);
}

void CalibrationProfile::validate() const {
    ladder.validate();
    if (!(d0 > 0.0)) throw UsageError("density threshold d0 must be positive");
    if (!(area_growth_max >= 1.0) || !(axis_growth_max >= 1.0)) throw UsageError("growth bounds must be >= 1");
    if (se.radius < 1) throw UsageError("structuring element radius must be >= 1");
    if (neighborhood_size < 3) throw UsageError("neighbourhood size must be >= 3");
    if (merge_radius < 0.0) throw UsageError("merge radius must be non-negative");
    for (const ShapeInterval* iv : {&area_iv, &ratio_iv, &solidity_iv}) {
        if (iv->lo > iv->hi || iv->std < 0.0) throw UsageError("malformed shape interval");
    }
    if (per_band && bands.empty()) throw UsageError("per-band filtering requested without bands");
}

void GroundTruthAnnotation::validate(int width, int height) const {
    for (const auto& c : contaminations) {
        if (c.position.row < 0 || c.position.row >= height || c.position.col < 0 || c.position.col >= width) {
            throw DataError("annotation for " + image + " lies outside the image");
        }
    }
}

std::vector<double> mean_neighbour_distances(std::span<const Point2> points) {
    const std::size_t n = points.size();
    std::vector<double> out(n, std::numeric_limits<double>::infinity());
    if (n < 2) return out;
    const std::size_t m = std::min<std::size_t>(3, n - 1);
    std::vector<double> d;
    d.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(imaging::distance(points[i], points[j]));
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += d[j];
        out[i] = s / static_cast<double>(m);
    }
    return out;
}

std::vector<Blob> density_filter(std::vector<Blob> blobs, double d0) {
    if (!(d0 > 0.0)) throw UsageError("density threshold d0 must be positive");
    std::vector<Point2> pts;
    pts.reserve(blobs.size());
    for (const auto& b : blobs) pts.push_back(b.centroid);
    const auto dist = mean_neighbour_distances(pts);
    std::vector<Blob> kept;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        if (dist[i] >= d0) kept.push_back(std::move(blobs[i]));
    }
    return kept;
}

namespace {

bool fits(const Blob& b, const ShapeInterval& area, const ShapeInterval& ratio, const ShapeInterval& solidity) {
    return area.contains(b.area) && ratio.contains(b.aspect_ratio) && solidity.contains(b.solidity);
}

bool area_admissible(long long area, int k, const CalibrationProfile& p) {
    if (!p.per_band) return p.area_iv.contains(static_cast<double>(area));
    for (const auto& band : p.bands) {
        if (k >= band.k_lo && k < band.k_hi && band.area.contains(static_cast<double>(area))) return true;
    }
    return false;
}

}  // namespace

ShapeMatch match_shape(const Blob& blob, int k, const CalibrationProfile& profile) {
    if (!profile.per_band) {
        return {fits(blob, profile.area_iv, profile.ratio_iv, profile.solidity_iv), std::nullopt};
    }
    for (const auto& band : profile.bands) {
        if (k >= band.k_lo && k < band.k_hi && fits(blob, band.area, band.ratio, band.solidity)) {
            return {true, band.kind};
        }
    }
    return {false, std::nullopt};
}

std::vector<LevelCandidate> level_candidates(const GrayImage& img, const CalibrationProfile& profile, int k,
                                            int* component_count) {
    auto runs = imaging::closing(imaging::binarize_runs(img, threshold_level(k)), profile.se);
    const auto comps = imaging::run_components(runs);
    if (component_count) *component_count = static_cast<int>(comps.size());
    std::vector<LevelCandidate> out;
    for (const auto& comp : comps) {
        if (!area_admissible(comp.area, k, profile)) continue;
        Blob blob = imaging::make_blob(comp.label, comp.pixels());
        const ShapeMatch m = match_shape(blob, k, profile);
        if (m.pass) out.push_back({std::move(blob), m.kind});
    }
    return out;
}

Growth measure_growth(const GrayImage& img, const Blob& blob, int k, const CalibrationProfile& profile) {
    if (k + 1 > kMaxLevel) throw UsageError("stability check needs k + 1 <= 23");
    const int n = profile.neighborhood_size;
    const imaging::PixelCoord center = imaging::round_to_pixel(blob.centroid);
    const GrayImage window = imaging::crop(img, center, n);
    const int r0 = center.row - n / 2;
    const int c0 = center.col - n / 2;

    const auto runs = imaging::closing(imaging::binarize_runs(window, threshold_level(k + 1)), profile.se);
    const auto comps = imaging::run_components(runs);
    std::vector<int> label(static_cast<std::size_t>(n) * n, 0);
    for (const auto& comp : comps)
        for (const auto& [row, run] : comp.runs)
            for (int c = run.col0; c <= run.col1; ++c) label[static_cast<std::size_t>(row) * n + c] = comp.label;

    std::vector<int> overlap(comps.size() + 1, 0);
    for (const auto& p : blob.pixels) {
        const int wr = p.row - r0, wc = p.col - c0;
        if (wr < 0 || wr >= n || wc < 0 || wc >= n) continue;
        ++overlap[label[static_cast<std::size_t>(wr) * n + wc]];
    }
    int best = 0;
    for (std::size_t i = 1; i < overlap.size(); ++i) {
        if (overlap[i] > overlap[best] || (best == 0 && overlap[i] > 0)) best = static_cast<int>(i);
    }
    if (best == 0) {
        // Binarization is monotone in the threshold and closing is increasing, so this cannot happen.
        throw std::logic_error("stability check lost the original object at the next threshold");
    }
    const auto grown = imaging::shape_stats(comps[best - 1].pixels());
    return {static_cast<double>(grown.area) / blob.area, grown.major_axis_len / blob.major_axis_len};
}

bool stability_check(const GrayImage& img, const Detection& det, const CalibrationProfile& profile) {
    const Growth g = measure_growth(img, det.blob, det.threshold_index, profile);
    return g.area_ratio <= profile.area_growth_max && g.axis_ratio <= profile.axis_growth_max;
}

std::vector<Detection> merge_duplicates(std::vector<Detection> dets, double radius) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.threshold_index < b.threshold_index; });
    std::vector<Detection> kept;
    for (auto& d : dets) {
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return imaging::distance(k.centroid, d.centroid) <= radius;
        });
        if (!dup) kept.push_back(std::move(d));
    }
    return kept;
}

std::vector<Detection> detect(const GrayImage& img, const CalibrationProfile& profile, std::vector<LevelTrace>* trace) {
    profile.validate();
    std::vector<Detection> all;
    for (int k = profile.ladder.k_lo; k < profile.ladder.k_hi; ++k) {
        LevelTrace lt;
        lt.k = k;
        auto cands = level_candidates(img, profile, k, &lt.components);
        lt.shape_pass = static_cast<int>(cands.size());

        std::vector<Point2> pts;
        pts.reserve(cands.size());
        for (const auto& c : cands) pts.push_back(c.blob.centroid);
        const auto dist = mean_neighbour_distances(pts);

        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (dist[i] < profile.d0) continue;
            ++lt.density_pass;
            const Growth g = measure_growth(img, cands[i].blob, k, profile);
            if (g.area_ratio > profile.area_growth_max || g.axis_ratio > profile.axis_growth_max) continue;
            ++lt.stable;
            Detection d;
            d.centroid = cands[i].blob.centroid;
            d.threshold_index = k;
            d.kind_hint = cands[i].kind;
            d.neighbour_distance = dist[i];
            d.area_growth = g.area_ratio;
            d.axis_growth = g.axis_ratio;
            d.blob = std::move(cands[i].blob);
            all.push_back(std::move(d));
        }
        if (trace) trace->push_back(lt);
    }
    return merge_duplicates(std::move(all), profile.merge_radius);
}

MatchSummary match_detections(std::span<const Detection> dets, const GroundTruthAnnotation& truth, double radius) {
    MatchSummary s;
    s.contaminations = static_cast<int>(truth.contaminations.size());
    auto near = [radius](const Point2& a, const imaging::PixelCoord& b) {
        return imaging::distance(a, {static_cast<double>(b.row), static_cast<double>(b.col)}) <= radius;
    };
    for (const auto& c : truth.contaminations) {
        if (std::any_of(dets.begin(), dets.end(), [&](const Detection& d) { return near(d.centroid, c.position); }))
            ++s.matched;
    }
    for (const auto& d : dets) {
        if (std::none_of(truth.contaminations.begin(), truth.contaminations.end(),
                         [&](const AnnotatedContamination& c) { return near(d.centroid, c.position); }))
            ++s.false_positives;
    }
    return s;
}

}  // namespace contam::mtfilter
