#pragma once

#include "contam/imaging.hpp"

#include <filesystem>

namespace contam::imaging {

// 8-bit grayscale PGM (binary P5) and PNG. Errors raise contam::DataError.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

GrayImage read_png(const std::filesystem::path& path);
void write_png(const GrayImage& img, const std::filesystem::path& path);

/// Dispatches on the file signature.
GrayImage read_image(const std::filesystem::path& path);
/// Dispatches on the extension (.png, otherwise PGM).
void write_image(const GrayImage& img, const std::filesystem::path& path);

/// 8-bit RGB PNG, used for annotated detection overlays.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // r,g,b interleaved

    explicit RgbImage(const GrayImage& gray);
    void set(int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void write_png(const RgbImage& img, const std::filesystem::path& path);

/// Draws a circle outline of the given radius, clipped to the image.
void draw_circle(RgbImage& img, Point2 center, double radius, std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace contam::imaging
