#include "contam/image_io.hpp"

#include "contam/error.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace contam::imaging {

namespace fs = std::filesystem;

namespace {

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_int(const std::string& tok, const fs::path& path) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw DataError("malformed PGM header in " + path.string());
    }
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    if (next_token(in) != "P5") throw DataError(path.string() + " is not a binary (P5) PGM");
    const int w = parse_int(next_token(in), path);
    const int h = parse_int(next_token(in), path);
    const int maxval = parse_int(next_token(in), path);
    if (w <= 0 || h <= 0) throw DataError("invalid PGM dimensions in " + path.string());
    if (maxval != 255) throw DataError("only 8-bit PGM (maxval 255) is supported: " + path.string());
    GrayImage img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw DataError("truncated PGM pixel data in " + path.string());
    }
    return img;
}

void write_pgm(const GrayImage& img, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

GrayImage read_png(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw DataError("cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return img;
}

namespace {

void write_png_raw(const fs::path& path, int w, int h, png_uint_32 format, const std::uint8_t* data) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = format;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, data, 0, nullptr)) {
        throw DataError("cannot write PNG " + path.string() + ": " + image.message);
    }
}

}  // namespace

void write_png(const GrayImage& img, const fs::path& path) {
    write_png_raw(path, img.width, img.height, PNG_FORMAT_GRAY, img.pixels.data());
}

GrayImage read_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
    if (in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    throw DataError("unrecognized image format: " + path.string());
}

void write_image(const GrayImage& img, const fs::path& path) {
    if (path.extension() == ".png") {
        write_png(img, path);
    } else {
        write_pgm(img, path);
    }
}

RgbImage::RgbImage(const GrayImage& gray)
    : width(gray.width), height(gray.height), pixels(gray.pixels.size() * 3) {
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        pixels[3 * i] = pixels[3 * i + 1] = pixels[3 * i + 2] = gray.pixels[i];
    }
}

void RgbImage::set(int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (row < 0 || row >= height || col < 0 || col >= width) return;
    const std::size_t i = 3 * (static_cast<std::size_t>(row) * width + col);
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
}

void write_png(const RgbImage& img, const fs::path& path) {
    write_png_raw(path, img.width, img.height, PNG_FORMAT_RGB, img.pixels.data());
}

void draw_circle(RgbImage& img, Point2 center, double radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int steps = std::max(16, static_cast<int>(2.0 * M_PI * radius * 2.0));
    for (int i = 0; i < steps; ++i) {
        const double a = 2.0 * M_PI * i / steps;
        img.set(static_cast<int>(std::lround(center.row + radius * std::sin(a))),
                static_cast<int>(std::lround(center.col + radius * std::cos(a))), r, g, b);
    }
}

}  // namespace contam::imaging
