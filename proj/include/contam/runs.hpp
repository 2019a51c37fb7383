#pragma once

// Run-length binary rasters. The detector works on full-size scans that are
// almost entirely black at every threshold, so runs keep labelling and
// morphology proportional to the foreground rather than the frame.

#include "contam/imaging.hpp"

#include <vector>

namespace contam::imaging {

/// Horizontal white run [col0, col1], inclusive.
struct Run {
    int col0 = 0;
    int col1 = 0;
    friend bool operator==(const Run&, const Run&) = default;
};

struct RunImage {
    int width = 0;
    int height = 0;
    std::vector<std::vector<Run>> rows;  // sorted, non-touching

    RunImage() = default;
    RunImage(int w, int h) : width(w), height(h), rows(static_cast<std::size_t>(h)) {}

    long long count() const;
    friend bool operator==(const RunImage&, const RunImage&) = default;
};

RunImage to_runs(const BinaryImage& bin);
BinaryImage to_dense(const RunImage& runs);

RunImage binarize_runs(const GrayImage& img, double th);

RunImage dilate(const RunImage& img, const StructuringElement& se);
RunImage erode(const RunImage& img, const StructuringElement& se);
RunImage closing(const RunImage& img, const StructuringElement& se);

/// A component as a list of (row, run) pairs; cheap to measure before expanding to pixels.
struct RunComponent {
    int label = 0;
    long long area = 0;
    BBox bbox;
    std::vector<std::pair<int, Run>> runs;

    std::vector<PixelCoord> pixels() const;
};

/// 8-connected components labelled in raster order of their first run.
std::vector<RunComponent> run_components(const RunImage& img);

}  // namespace contam::imaging
