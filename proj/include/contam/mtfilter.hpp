#pragma once

#include "contam/imaging.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace contam::mtfilter {

/// Gray-level step between consecutive ladder thresholds.
inline constexpr double kLadderStep = 255.0 / 24.0;
inline constexpr int kMaxLevel = 23;

/// th_k = k * 255 / 24.
constexpr double threshold_level(int k) { return k * kLadderStep; }

/// Threshold indices [k_lo, k_hi) scanned by the detector.
struct ThresholdLadder {
    int k_lo = 0;
    int k_hi = 1;

    double delta() const { return kLadderStep; }
    double level(int k) const { return threshold_level(k); }
    bool contains(int k) const { return k >= k_lo && k < k_hi; }
    void validate() const;
    friend bool operator==(const ThresholdLadder&, const ThresholdLadder&) = default;
};

/// Confidence interval [lo, hi] built from a sample mean and standard deviation.
struct ShapeInterval {
    double mean = 0.0;
    double std = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const;
    /// [mean - 2 std, mean + 2 std] clamped to [natural_lo, natural_hi]; sample std (n - 1).
    static ShapeInterval from_samples(std::span<const double> values, double natural_lo, double natural_hi);
    /// Widens both ends by `amount` (never narrows).
    ShapeInterval widened(double amount) const;
    friend bool operator==(const ShapeInterval&, const ShapeInterval&) = default;
};

enum class Kind { pebble, needle, clip, plastic, other };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

/// Shape intervals restricted to a threshold band, tagged with the kind they were fitted on.
struct ShapeBand {
    Kind kind = Kind::other;
    int k_lo = 0;
    int k_hi = 1;
    ShapeInterval area;
    ShapeInterval ratio;
    ShapeInterval solidity;
};

struct CalibrationProfile {
    ThresholdLadder ladder;
    ShapeInterval area_iv;
    ShapeInterval ratio_iv;
    ShapeInterval solidity_iv;
    /// When set, a blob passes if it fits any band covering its level; otherwise the global intervals apply.
    bool per_band = false;
    std::vector<ShapeBand> bands;
    imaging::StructuringElement se;
    double d0 = 15.0;
    double area_growth_max = 1.5;
    double axis_growth_max = 1.3;
    int neighborhood_size = 120;
    double merge_radius = 10.0;

    void validate() const;
};

enum class Verdict { candidate, true_contamination, false_alarm };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& name);

struct Detection {
    imaging::Point2 centroid;
    int threshold_index = 0;
    imaging::Blob blob;
    std::optional<Kind> kind_hint;
    Verdict verdict = Verdict::candidate;
    /// Mean distance to the nearest shape-filter survivors at the detection level (infinite when alone).
    double neighbour_distance = 0.0;
    double area_growth = 1.0;
    double axis_growth = 1.0;
    /// Classifier output, once classified.
    std::optional<double> probability;
};

struct AnnotatedContamination {
    imaging::PixelCoord position;
    Kind kind = Kind::other;
};

struct GroundTruthAnnotation {
    std::string image;
    std::vector<AnnotatedContamination> contaminations;

    /// Throws DataError when a position lies outside a width x height frame.
    void validate(int width, int height) const;
};

struct AnnotatedImage {
    imaging::GrayImage image;
    GroundTruthAnnotation annotation;
};

// ---- filtering stages -------------------------------------------------------

/// Mean distance from each point to its m = min(3, n - 1) nearest neighbours; +inf if n == 1.
std::vector<double> mean_neighbour_distances(std::span<const imaging::Point2> points);

/// Keeps blobs whose mean nearest-neighbour centroid distance is at least d0.
std::vector<imaging::Blob> density_filter(std::vector<imaging::Blob> blobs, double d0);

struct ShapeMatch {
    bool pass = false;
    std::optional<Kind> kind;
};

/// Interval test for a blob segmented at level k.
ShapeMatch match_shape(const imaging::Blob& blob, int k, const CalibrationProfile& profile);

struct LevelCandidate {
    imaging::Blob blob;
    std::optional<Kind> kind;
};

/// Binarize at th_k, close with the profile element, label, and keep blobs inside the shape intervals.
std::vector<LevelCandidate> level_candidates(const imaging::GrayImage& img, const CalibrationProfile& profile, int k,
                                            int* component_count = nullptr);

struct Growth {
    double area_ratio = 1.0;
    double axis_ratio = 1.0;
};

/// Re-segments the neighbourhood of `blob` at th_k + delta and measures how much the matching object grew.
Growth measure_growth(const imaging::GrayImage& img, const imaging::Blob& blob, int k, const CalibrationProfile& profile);

/// True iff both growth ratios stay within the profile bounds. Requires k + 1 <= 23.
bool stability_check(const imaging::GrayImage& img, const Detection& det, const CalibrationProfile& profile);

/// Drops detections whose centroid lies within `radius` of an earlier-kept one, visiting the lowest level first.
std::vector<Detection> merge_duplicates(std::vector<Detection> dets, double radius);

struct LevelTrace {
    int k = 0;
    int components = 0;
    int shape_pass = 0;
    int density_pass = 0;
    int stable = 0;
};

/// Full multi-threshold scan. Detections carry verdict = candidate.
std::vector<Detection> detect(const imaging::GrayImage& img, const CalibrationProfile& profile,
                              std::vector<LevelTrace>* trace = nullptr);

// ---- calibration ------------------------------------------------------------

struct MatchSummary {
    int contaminations = 0;
    int matched = 0;
    int false_positives = 0;  // detections not within the radius of any annotation
};

MatchSummary match_detections(std::span<const Detection> dets, const GroundTruthAnnotation& truth, double radius);

struct CalibrationSearch {
    std::vector<imaging::StructuringElement> se_options{{imaging::SeShape::disk, 1},
                                                        {imaging::SeShape::disk, 2}};
    std::vector<double> d0_options{5.0, 10.0, 20.0, 30.0};
    std::vector<double> area_growth_options{1.2, 1.5, 2.0, 3.0};
    std::vector<double> axis_growth_options{1.1, 1.3, 1.6, 2.0};
    int neighborhood_size = 120;
    double merge_radius = 10.0;
    double match_radius = 10.0;
    bool per_band = false;
    /// Area growth between consecutive levels below which a contamination counts as fully segmented.
    double settle_growth = 1.2;
};

struct CalibrationReport {
    CalibrationProfile profile;
    std::vector<std::string> warnings;
    std::vector<Kind> uncalibratable;
    int contaminations_used = 0;
    double recall = 0.0;
    int false_positives = 0;
};

CalibrationReport calibrate(std::span<const AnnotatedImage> annotated, const CalibrationSearch& search = {});

}  // namespace contam::mtfilter
