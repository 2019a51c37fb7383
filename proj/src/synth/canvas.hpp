#pragma once

#include "contam/synth.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace contam::synth::detail {

/// Deterministic 64-bit seed derived from a base seed and up to two stream indices.
std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct Offset {
    int row;
    int col;
};

/// Pixels of an object relative to an anchor, with their gray levels.
struct Sprite {
    std::vector<Offset> px;
    std::vector<std::uint8_t> gray;
};

class Canvas {
public:
    Canvas(int width, int height, std::uint64_t seed);

    imaging::GrayImage& image() { return img_; }
    std::mt19937_64& rng() { return rng_; }

    double uniform(double lo, double hi);
    double uniform(const Range& r) { return uniform(r.lo, r.hi); }
    int uniform_int(int lo, int hi);
    int uniform_int(const IntRange& r) { return uniform_int(r.lo, r.hi); }
    double normal(double sigma);

    void paint_background(const BackgroundSpec& bg);
    void paint_sporadic(const ArtefactSpec& a);

    /// True if every pixel lies inside the image (with `border` clearance) and on free cells.
    bool fits(const Sprite& s, int row, int col, int border) const;
    /// Writes the sprite and reserves its surroundings (`margin` pixels) for later placements.
    void stamp(const Sprite& s, int row, int col, int margin);
    /// Reserves a disk without drawing.
    void reserve_disk(int row, int col, double radius);

    /// Tries random anchors until the sprite fits; returns false after `attempts` failures.
    bool place_random(const Sprite& s, int margin, int attempts, int& row, int& col);

private:
    bool cell_free(int r, int c) const;
    void mark(int r, int c, int margin);

    imaging::GrayImage img_;
    std::mt19937_64 rng_;
    static constexpr int kCell = 4;
    int cells_w_;
    int cells_h_;
    std::vector<std::uint8_t> occupied_;
};

// Sprite builders. Gray levels are drawn around a base value and clamped to [lo, hi].
Sprite disk_sprite(double radius, double gray, Canvas& cv, Range clamp);
Sprite blob_sprite(int area, double gray, Canvas& cv, Range clamp);
Sprite capsule_path_sprite(const std::vector<std::pair<double, double>>& path, double width, double gray, Canvas& cv,
                           Range clamp);
Sprite needle_sprite(double length, double width, double angle, double gray, Canvas& cv, Range clamp);
Sprite clip_sprite(double leg, double width, double angle, double gray, Canvas& cv, Range clamp);

/// Smooth random curve of `length` unit steps starting at (0, 0).
std::vector<std::pair<double, double>> random_curve(double length, double curvature, Canvas& cv);

/// The sprite pixel closest to the sprite centroid.
Offset nearest_to_centroid(const Sprite& s);

struct Cloud {
    Sprite sprite;
    double radius;
};
Cloud cloud_sprite(const ArtefactSpec& a, Canvas& cv);

Sprite button_sprite(const ButtonSpec& b, Canvas& cv);

struct Drawstring {
    Sprite sprite;
    std::vector<Offset> knots;
};
Drawstring drawstring_sprite(const DrawstringSpec& d, Canvas& cv, std::optional<Range> string_gray = std::nullopt,
                             int min_knots = 0);

struct Seam {
    Sprite sprite;
    Offset end_a;
    Offset end_b;
};
Seam seam_sprite(const SeamSpec& s, Canvas& cv);

struct Zip {
    Sprite sprite;
    std::vector<Offset> teeth;
};
Zip zip_sprite(const ZipSpec& z, Canvas& cv);

/// A contaminant sprite of the given spec, gray levels clamped to the spec's range.
Sprite contaminant_sprite(const ContaminantSpec& c, Canvas& cv);

}  // namespace contam::synth::detail
