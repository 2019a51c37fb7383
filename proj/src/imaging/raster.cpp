#include "contam/imaging.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace contam::imaging {

double distance(const Point2& a, const Point2& b) {
    return std::hypot(a.row - b.row, a.col - b.col);
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw UsageError("image dimensions must be non-negative");
}

BinaryImage::BinaryImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw UsageError("image dimensions must be non-negative");
}

std::size_t BinaryImage::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryImage complement(const BinaryImage& bin) {
    BinaryImage out = bin;
    for (auto& b : out.bits) b = b ? 0 : 1;
    return out;
}

int StructuringElement::half_width(int dy) const {
    if (dy < -radius || dy > radius) return -1;
    if (shape == SeShape::square) return radius;
    // Disk: integer offsets with dx^2 + dy^2 <= r^2.
    const int rem = radius * radius - dy * dy;
    int w = static_cast<int>(std::sqrt(static_cast<double>(rem)));
    while ((w + 1) * (w + 1) <= rem) ++w;
    while (w * w > rem) --w;
    return w;
}

std::vector<PixelCoord> StructuringElement::offsets() const {
    std::vector<PixelCoord> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        const int w = half_width(dy);
        for (int dx = -w; dx <= w; ++dx) out.push_back({dy, dx});
    }
    return out;
}

std::string to_string(SeShape shape) {
    return shape == SeShape::disk ? "disk" : "square";
}

SeShape se_shape_from_string(const std::string& name) {
    if (name == "disk") return SeShape::disk;
    if (name == "square") return SeShape::square;
    throw DataError("unknown structuring element shape: " + name);
}

BinaryImage binarize(const GrayImage& img, double th) {
    BinaryImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.bits[i] = static_cast<double>(img.pixels[i]) < th ? 1 : 0;
    }
    return out;
}

GrayImage crop(const GrayImage& img, PixelCoord center, int size) {
    if (!img.contains(center.row, center.col)) {
        throw std::out_of_range("crop centre (" + std::to_string(center.row) + ", " +
                                std::to_string(center.col) + ") lies outside the image");
    }
    if (size < 1) throw UsageError("crop size must be positive");
    GrayImage out(size, size);
    const int r0 = center.row - size / 2;
    const int c0 = center.col - size / 2;
    for (int r = 0; r < size; ++r) {
        const int sr = std::clamp(r0 + r, 0, img.height - 1);
        for (int c = 0; c < size; ++c) {
            const int sc = std::clamp(c0 + c, 0, img.width - 1);
            out.at(r, c) = img.at(sr, sc);
        }
    }
    return out;
}

PixelCoord round_to_pixel(const Point2& p) {
    return {static_cast<int>(std::lround(p.row)), static_cast<int>(std::lround(p.col))};
}

}  // namespace contam::imaging
