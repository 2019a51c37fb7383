#include "contam/runs.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

namespace contam::imaging {

namespace {

// Sorts and merges overlapping or touching runs in place.
void normalize(std::vector<Run>& row) {
    if (row.size() < 2) return;
    std::sort(row.begin(), row.end(), [](const Run& a, const Run& b) { return a.col0 < b.col0; });
    std::size_t k = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i].col0 <= row[k].col1 + 1) {
            row[k].col1 = std::max(row[k].col1, row[i].col1);
        } else {
            row[++k] = row[i];
        }
    }
    row.resize(k + 1);
}

std::vector<Run> intersect(const std::vector<Run>& a, const std::vector<Run>& b) {
    std::vector<Run> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const int lo = std::max(a[i].col0, b[j].col0);
        const int hi = std::min(a[i].col1, b[j].col1);
        if (lo <= hi) out.push_back({lo, hi});
        if (a[i].col1 < b[j].col1) ++i; else ++j;
    }
    return out;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Keep the smaller index as root so labels follow raster order.
        if (a < b) parent[b] = a; else parent[a] = b;
    }
};

}  // namespace

long long RunImage::count() const {
    long long n = 0;
    for (const auto& row : rows)
        for (const auto& r : row) n += r.col1 - r.col0 + 1;
    return n;
}

RunImage to_runs(const BinaryImage& bin) {
    RunImage out(bin.width, bin.height);
    for (int r = 0; r < bin.height; ++r) {
        int c = 0;
        while (c < bin.width) {
            if (!bin.at(r, c)) {
                ++c;
                continue;
            }
            const int start = c;
            while (c < bin.width && bin.at(r, c)) ++c;
            out.rows[r].push_back({start, c - 1});
        }
    }
    return out;
}

BinaryImage to_dense(const RunImage& runs) {
    BinaryImage out(runs.width, runs.height);
    for (int r = 0; r < runs.height; ++r)
        for (const auto& run : runs.rows[r])
            for (int c = run.col0; c <= run.col1; ++c) out.at(r, c) = 1;
    return out;
}

RunImage binarize_runs(const GrayImage& img, double th) {
    RunImage out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        const std::uint8_t* px = img.pixels.data() + static_cast<std::size_t>(r) * img.width;
        int c = 0;
        while (c < img.width) {
            if (!(px[c] < th)) {
                ++c;
                continue;
            }
            const int start = c;
            while (c < img.width && px[c] < th) ++c;
            out.rows[r].push_back({start, c - 1});
        }
    }
    return out;
}

RunImage dilate(const RunImage& img, const StructuringElement& se) {
    RunImage out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        if (img.rows[r].empty()) continue;
        for (int dy = -se.radius; dy <= se.radius; ++dy) {
            const int tr = r + dy;
            if (tr < 0 || tr >= img.height) continue;
            const int w = se.half_width(dy);
            auto& dst = out.rows[tr];
            for (const auto& run : img.rows[r]) {
                dst.push_back({std::max(run.col0 - w, 0), std::min(run.col1 + w, img.width - 1)});
            }
        }
    }
    for (auto& row : out.rows) normalize(row);
    return out;
}

RunImage erode(const RunImage& img, const StructuringElement& se) {
    RunImage out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        if (img.rows[r].empty()) continue;
        std::vector<Run> acc;
        bool first = true;
        for (int dy = -se.radius; dy <= se.radius; ++dy) {
            const int sr = r + dy;
            if (sr < 0 || sr >= img.height) {
                acc.clear();
                break;
            }
            const int w = se.half_width(dy);
            std::vector<Run> shrunk;
            for (const auto& run : img.rows[sr]) {
                // The whole element row must fit inside the frame.
                const int lo = std::max(run.col0 + w, w);
                const int hi = std::min(run.col1 - w, img.width - 1 - w);
                if (lo <= hi) shrunk.push_back({lo, hi});
            }
            acc = first ? std::move(shrunk) : intersect(acc, shrunk);
            first = false;
            if (acc.empty()) break;
        }
        out.rows[r] = std::move(acc);
    }
    return out;
}

RunImage closing(const RunImage& img, const StructuringElement& se) {
    return erode(dilate(img, se), se);
}

std::vector<PixelCoord> RunComponent::pixels() const {
    std::vector<PixelCoord> out;
    out.reserve(static_cast<std::size_t>(area));
    for (const auto& [row, run] : runs)
        for (int c = run.col0; c <= run.col1; ++c) out.push_back({row, c});
    return out;
}

std::vector<RunComponent> run_components(const RunImage& img) {
    // Index every run, union runs that touch 8-connected across adjacent rows.
    std::vector<std::size_t> row_start(static_cast<std::size_t>(img.height) + 1, 0);
    for (int r = 0; r < img.height; ++r) row_start[r + 1] = row_start[r] + img.rows[r].size();
    const std::size_t total = row_start.back();
    DisjointSet ds(total);

    for (int r = 1; r < img.height; ++r) {
        const auto& prev = img.rows[r - 1];
        const auto& cur = img.rows[r];
        std::size_t j = 0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            while (j < prev.size() && prev[j].col1 < cur[i].col0 - 1) ++j;
            for (std::size_t k = j; k < prev.size() && prev[k].col0 <= cur[i].col1 + 1; ++k) {
                ds.unite(static_cast<int>(row_start[r] + i), static_cast<int>(row_start[r - 1] + k));
            }
        }
    }

    std::vector<int> comp_of_root(total, -1);
    std::vector<RunComponent> comps;
    for (int r = 0; r < img.height; ++r) {
        for (std::size_t i = 0; i < img.rows[r].size(); ++i) {
            const int root = ds.find(static_cast<int>(row_start[r] + i));
            if (comp_of_root[root] < 0) {
                comp_of_root[root] = static_cast<int>(comps.size());
                RunComponent rc;
                rc.label = static_cast<int>(comps.size()) + 1;
                rc.bbox = {INT_MAX, INT_MAX, INT_MIN, INT_MIN};
                comps.push_back(std::move(rc));
            }
            auto& comp = comps[comp_of_root[root]];
            const Run& run = img.rows[r][i];
            comp.runs.push_back({r, run});
            comp.area += run.col1 - run.col0 + 1;
            comp.bbox.row0 = std::min(comp.bbox.row0, r);
            comp.bbox.row1 = std::max(comp.bbox.row1, r);
            comp.bbox.col0 = std::min(comp.bbox.col0, run.col0);
            comp.bbox.col1 = std::max(comp.bbox.col1, run.col1);
        }
    }
    return comps;
}

}  // namespace contam::imaging
