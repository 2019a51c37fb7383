#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace contam::imaging {

struct PixelCoord {
    int row = 0;
    int col = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
    friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

struct Point2 {
    double row = 0.0;
    double col = 0.0;
};

double distance(const Point2& a, const Point2& b);

/// 8-bit grayscale raster, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    bool contains(int row, int col) const { return row >= 0 && row < height && col >= 0 && col < width; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary raster; 1 is white (foreground), 0 is black.
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryImage() = default;
    BinaryImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t& at(int row, int col) { return bits[static_cast<std::size_t>(row) * width + col]; }
    bool contains(int row, int col) const { return row >= 0 && row < height && col >= 0 && col < width; }
    std::size_t count() const;

    friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

BinaryImage complement(const BinaryImage& bin);

/// Inclusive pixel rectangle.
struct BBox {
    int row0 = 0;
    int col0 = 0;
    int row1 = -1;
    int col1 = -1;

    bool contains(const Point2& p) const {
        return p.row >= row0 && p.row <= row1 && p.col >= col0 && p.col <= col1;
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct ShapeStats {
    int area = 0;
    Point2 centroid;
    double major_axis_len = 0.0;
    double minor_axis_len = 0.0;
    double aspect_ratio = 1.0;
    double solidity = 1.0;
};

struct Blob {
    int label = 0;
    int area = 0;
    Point2 centroid;
    double major_axis_len = 0.0;
    double minor_axis_len = 0.0;
    double aspect_ratio = 1.0;
    double solidity = 1.0;
    BBox bbox;
    std::vector<PixelCoord> pixels;
};

/// Minor axis floor keeping the aspect ratio finite for degenerate blobs.
inline constexpr double kMinorAxisFloor = 0.28867513459481287;  // 1/sqrt(12)

/// Area, centroid, equal-moment ellipse axes and solidity of a pixel set.
/// Each pixel is a unit square, so 1/12 is added to the diagonal second moments.
/// Solidity uses the number of pixel centres inside or on the convex hull of the
/// member pixel centres as the hull area.
ShapeStats shape_stats(std::span<const PixelCoord> pixels);

/// Builds a fully populated blob from its member pixels.
Blob make_blob(int label, std::vector<PixelCoord> pixels);

/// Vertices of the convex hull of the pixel centres, counter-clockwise, no collinear points.
std::vector<PixelCoord> convex_hull(std::span<const PixelCoord> pixels);

/// Lattice points inside or on the convex polygon (as returned by convex_hull).
long long hull_pixel_count(std::span<const PixelCoord> hull);

enum class SeShape { disk, square };

struct StructuringElement {
    SeShape shape = SeShape::disk;
    int radius = 1;

    /// Half-width of the element row at vertical offset dy, or -1 if the row is empty.
    int half_width(int dy) const;
    std::vector<PixelCoord> offsets() const;
    friend bool operator==(const StructuringElement&, const StructuringElement&) = default;
};

std::string to_string(SeShape shape);
SeShape se_shape_from_string(const std::string& name);

/// White where the gray level is strictly below th.
BinaryImage binarize(const GrayImage& img, double th);

/// 8-connected components, labelled 1.. in raster order of their first pixel.
std::vector<Blob> connected_components(const BinaryImage& bin);

// Pixels outside the raster count as black.
BinaryImage dilate(const BinaryImage& bin, const StructuringElement& se);
BinaryImage erode(const BinaryImage& bin, const StructuringElement& se);
BinaryImage closing(const BinaryImage& bin, const StructuringElement& se);
BinaryImage opening(const BinaryImage& bin, const StructuringElement& se);

/// size x size window whose centre pixel (index size/2) is `center`; borders replicate edge pixels.
/// Throws std::out_of_range if `center` lies outside the image.
GrayImage crop(const GrayImage& img, PixelCoord center, int size = 120);

PixelCoord round_to_pixel(const Point2& p);

}  // namespace contam::imaging
