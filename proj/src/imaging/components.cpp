#include "contam/imaging.hpp"

#include <vector>

namespace contam::imaging {

std::vector<Blob> connected_components(const BinaryImage& bin) {
    std::vector<Blob> blobs;
    std::vector<int> label(bin.bits.size(), 0);
    std::vector<PixelCoord> stack;
    int next = 0;
    for (int r = 0; r < bin.height; ++r) {
        for (int c = 0; c < bin.width; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * bin.width + c;
            if (!bin.bits[idx] || label[idx]) continue;
            ++next;
            std::vector<PixelCoord> members;
            label[idx] = next;
            stack.push_back({r, c});
            while (!stack.empty()) {
                const PixelCoord p = stack.back();
                stack.pop_back();
                members.push_back(p);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = p.row + dr, nc = p.col + dc;
                        if (!bin.contains(nr, nc)) continue;
                        const std::size_t nidx = static_cast<std::size_t>(nr) * bin.width + nc;
                        if (bin.bits[nidx] && !label[nidx]) {
                            label[nidx] = next;
                            stack.push_back({nr, nc});
                        }
                    }
                }
            }
            blobs.push_back(make_blob(next, std::move(members)));
        }
    }
    return blobs;
}

}  // namespace contam::imaging
