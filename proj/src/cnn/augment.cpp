#include "contam/cnn.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace contam::cnn {

imaging::GrayImage apply_affine(const imaging::GrayImage& img, const AffineParams& t) {
    if (!(t.zoom > 0.0)) throw UsageError("zoom factor must be positive");
    imaging::GrayImage out(img.width, img.height);
    if (img.width == 0 || img.height == 0) return out;
    const double cr = (img.height - 1) / 2.0;
    const double cc = (img.width - 1) / 2.0;
    const double th = t.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    // Forward map: out = R * zoom * (in - c) + c + shift; sample through its inverse.
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double dr = r - cr - t.shift_row;
            const double dc = c - cc - t.shift_col;
            const double sr = (cs * dr - sn * dc) / t.zoom + cr;
            const double sc = (sn * dr + cs * dc) / t.zoom + cc;
            const double yr = std::clamp(sr, 0.0, static_cast<double>(img.height - 1));
            const double xc = std::clamp(sc, 0.0, static_cast<double>(img.width - 1));
            const int r0 = static_cast<int>(std::floor(yr));
            const int c0 = static_cast<int>(std::floor(xc));
            const int r1 = std::min(r0 + 1, img.height - 1);
            const int c1 = std::min(c0 + 1, img.width - 1);
            const double fr = yr - r0, fc = xc - c0;
            const double v = (1 - fr) * ((1 - fc) * img.at(r0, c0) + fc * img.at(r0, c1)) +
                             fr * ((1 - fc) * img.at(r1, c0) + fc * img.at(r1, c1));
            out.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return out;
}

imaging::GrayImage augment(const imaging::GrayImage& img, std::mt19937_64& rng, const AugmentRanges& ranges) {
    std::uniform_real_distribution<double> rot(-ranges.max_rotation_deg, ranges.max_rotation_deg);
    std::uniform_real_distribution<double> shift(-ranges.max_shift, ranges.max_shift);
    std::uniform_real_distribution<double> zoom(ranges.zoom_min, ranges.zoom_max);
    AffineParams t;
    t.rotation_deg = rot(rng);
    t.shift_row = shift(rng);
    t.shift_col = shift(rng);
    t.zoom = zoom(rng);
    return apply_affine(img, t);
}

}  // namespace contam::cnn
