#include "contam/imaging.hpp"

#include "contam/error.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>

namespace contam::imaging {

namespace {

long long cross(const PixelCoord& o, const PixelCoord& a, const PixelCoord& b) {
    return static_cast<long long>(a.col - o.col) * (b.row - o.row) -
           static_cast<long long>(a.row - o.row) * (b.col - o.col);
}

long long floor_div(long long num, long long den) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    long long q = num / den;
    if (num % den != 0 && num < 0) --q;
    return q;
}

long long ceil_div(long long num, long long den) {
    return -floor_div(-num, den);
}

}  // namespace

std::vector<PixelCoord> convex_hull(std::span<const PixelCoord> pixels) {
    std::vector<PixelCoord> pts(pixels.begin(), pixels.end());
    std::sort(pts.begin(), pts.end(), [](const PixelCoord& a, const PixelCoord& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;

    // Andrew's monotone chain; strict turns drop collinear points.
    std::vector<PixelCoord> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

long long hull_pixel_count(std::span<const PixelCoord> hull) {
    if (hull.empty()) return 0;
    if (hull.size() == 1) return 1;
    if (hull.size() == 2) {
        const long long dr = std::llabs(hull[1].row - hull[0].row);
        const long long dc = std::llabs(hull[1].col - hull[0].col);
        return std::gcd(dr, dc) + 1;
    }
    int rmin = INT_MAX, rmax = INT_MIN;
    for (const auto& p : hull) {
        rmin = std::min(rmin, p.row);
        rmax = std::max(rmax, p.row);
    }
    long long total = 0;
    const std::size_t n = hull.size();
    for (int y = rmin; y <= rmax; ++y) {
        long long left = LLONG_MAX, right = LLONG_MIN;
        for (std::size_t i = 0; i < n; ++i) {
            const PixelCoord& a = hull[i];
            const PixelCoord& b = hull[(i + 1) % n];
            if (y < std::min(a.row, b.row) || y > std::max(a.row, b.row)) continue;
            if (a.row == b.row) {
                left = std::min<long long>(left, std::min(a.col, b.col));
                right = std::max<long long>(right, std::max(a.col, b.col));
                continue;
            }
            // x = a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row), exactly.
            const long long den = b.row - a.row;
            const long long num = static_cast<long long>(a.col) * den +
                                  static_cast<long long>(y - a.row) * (b.col - a.col);
            left = std::min(left, ceil_div(num, den));
            right = std::max(right, floor_div(num, den));
        }
        if (right >= left) total += right - left + 1;
    }
    return total;
}

ShapeStats shape_stats(std::span<const PixelCoord> pixels) {
    if (pixels.empty()) throw UsageError("shape_stats requires a non-empty pixel list");
    ShapeStats s;
    s.area = static_cast<int>(pixels.size());
    const double n = static_cast<double>(pixels.size());

    double sr = 0.0, sc = 0.0;
    for (const auto& p : pixels) {
        sr += p.row;
        sc += p.col;
    }
    s.centroid = {sr / n, sc / n};

    double urr = 0.0, ucc = 0.0, urc = 0.0;
    for (const auto& p : pixels) {
        const double dr = p.row - s.centroid.row;
        const double dc = p.col - s.centroid.col;
        urr += dr * dr;
        ucc += dc * dc;
        urc += dr * dc;
    }
    urr = urr / n + 1.0 / 12.0;
    ucc = ucc / n + 1.0 / 12.0;
    urc /= n;

    const double common = std::sqrt((ucc - urr) * (ucc - urr) + 4.0 * urc * urc);
    const double k = 2.0 * std::sqrt(2.0);
    s.major_axis_len = k * std::sqrt(ucc + urr + common);
    s.minor_axis_len = std::max(k * std::sqrt(std::max(0.0, ucc + urr - common)), kMinorAxisFloor);
    s.aspect_ratio = std::max(1.0, s.major_axis_len / s.minor_axis_len);

    const auto hull = convex_hull(pixels);
    const long long hull_area = hull_pixel_count(hull);
    s.solidity = static_cast<double>(s.area) / static_cast<double>(std::max<long long>(hull_area, s.area));
    return s;
}

Blob make_blob(int label, std::vector<PixelCoord> pixels) {
    const ShapeStats s = shape_stats(pixels);
    Blob b;
    b.label = label;
    b.area = s.area;
    b.centroid = s.centroid;
    b.major_axis_len = s.major_axis_len;
    b.minor_axis_len = s.minor_axis_len;
    b.aspect_ratio = s.aspect_ratio;
    b.solidity = s.solidity;
    b.bbox = {INT_MAX, INT_MAX, INT_MIN, INT_MIN};
    for (const auto& p : pixels) {
        b.bbox.row0 = std::min(b.bbox.row0, p.row);
        b.bbox.col0 = std::min(b.bbox.col0, p.col);
        b.bbox.row1 = std::max(b.bbox.row1, p.row);
        b.bbox.col1 = std::max(b.bbox.col1, p.col);
    }
    b.pixels = std::move(pixels);
    return b;
}

}  // namespace contam::imaging
