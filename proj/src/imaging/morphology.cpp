#include "contam/imaging.hpp"

#include <algorithm>

namespace contam::imaging {

namespace {

// Horizontal prefix counts let each structuring-element row be tested in O(1).
std::vector<int> row_prefix(const BinaryImage& bin, int r) {
    std::vector<int> pre(static_cast<std::size_t>(bin.width) + 1, 0);
    for (int c = 0; c < bin.width; ++c) pre[c + 1] = pre[c] + bin.at(r, c);
    return pre;
}

int window_sum(const std::vector<int>& pre, int width, int c0, int c1) {
    c0 = std::max(c0, 0);
    c1 = std::min(c1, width - 1);
    if (c1 < c0) return 0;
    return pre[c1 + 1] - pre[c0];
}

}  // namespace

BinaryImage dilate(const BinaryImage& bin, const StructuringElement& se) {
    BinaryImage out(bin.width, bin.height);
    std::vector<std::vector<int>> prefix(bin.height);
    for (int r = 0; r < bin.height; ++r) prefix[r] = row_prefix(bin, r);
    for (int r = 0; r < bin.height; ++r) {
        for (int c = 0; c < bin.width; ++c) {
            bool hit = false;
            for (int dy = -se.radius; dy <= se.radius && !hit; ++dy) {
                const int sr = r + dy;
                if (sr < 0 || sr >= bin.height) continue;
                const int w = se.half_width(dy);
                hit = window_sum(prefix[sr], bin.width, c - w, c + w) > 0;
            }
            out.at(r, c) = hit ? 1 : 0;
        }
    }
    return out;
}

BinaryImage erode(const BinaryImage& bin, const StructuringElement& se) {
    BinaryImage out(bin.width, bin.height);
    std::vector<std::vector<int>> prefix(bin.height);
    for (int r = 0; r < bin.height; ++r) prefix[r] = row_prefix(bin, r);
    for (int r = 0; r < bin.height; ++r) {
        for (int c = 0; c < bin.width; ++c) {
            bool keep = true;
            for (int dy = -se.radius; dy <= se.radius && keep; ++dy) {
                const int sr = r + dy;
                const int w = se.half_width(dy);
                if (sr < 0 || sr >= bin.height || c - w < 0 || c + w >= bin.width) {
                    keep = false;
                    break;
                }
                keep = window_sum(prefix[sr], bin.width, c - w, c + w) == 2 * w + 1;
            }
            out.at(r, c) = keep ? 1 : 0;
        }
    }
    return out;
}

BinaryImage closing(const BinaryImage& bin, const StructuringElement& se) {
    return erode(dilate(bin, se), se);
}

BinaryImage opening(const BinaryImage& bin, const StructuringElement& se) {
    return dilate(erode(bin, se), se);
}

}  // namespace contam::imaging
