#include "canvas.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace contam::synth::detail {

namespace {

using PixelMap = std::map<std::pair<int, int>, std::uint8_t>;

std::uint8_t shade(double base, double noise, Range clamp) {
    const double lo = std::max(0.0, clamp.lo), hi = std::min(255.0, clamp.hi);
    return static_cast<std::uint8_t>(std::lround(std::clamp(base + noise, lo, hi)));
}

Sprite from_map(const PixelMap& m) {
    Sprite s;
    s.px.reserve(m.size());
    s.gray.reserve(m.size());
    for (const auto& [p, g] : m) {
        s.px.push_back({p.first, p.second});
        s.gray.push_back(g);
    }
    return s;
}

void paint_path(PixelMap& m, const std::vector<std::pair<double, double>>& path, double width, double gray, Canvas& cv,
                Range clamp) {
    const double r = width / 2.0;
    const int reach = static_cast<int>(std::ceil(r)) + 1;
    for (const auto& [y, x] : path) {
        const int ry = static_cast<int>(std::lround(y)), rx = static_cast<int>(std::lround(x));
        for (int dy = -reach; dy <= reach; ++dy) {
            for (int dx = -reach; dx <= reach; ++dx) {
                const int py = ry + dy, px = rx + dx;
                const double d2 = (py - y) * (py - y) + (px - x) * (px - x);
                if (d2 <= r * r || (dy == 0 && dx == 0)) {
                    if (!m.contains({py, px})) m[{py, px}] = shade(gray, cv.normal(1.5), clamp);
                }
            }
        }
    }
}

void paint_disk(PixelMap& m, double cy, double cx, double radius, double gray, Canvas& cv, Range clamp) {
    const int reach = static_cast<int>(std::ceil(radius)) + 1;
    const int ry = static_cast<int>(std::lround(cy)), rx = static_cast<int>(std::lround(cx));
    for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
            const int py = ry + dy, px = rx + dx;
            if ((py - cy) * (py - cy) + (px - cx) * (px - cx) <= radius * radius) {
                m[{py, px}] = shade(gray, cv.normal(1.5), clamp);
            }
        }
    }
}

constexpr Range kFullRange{0, 255};

}  // namespace

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::mt19937_64 g(seq);
    return g();
}

Canvas::Canvas(int width, int height, std::uint64_t seed)
    : img_(width, height), rng_(seed), cells_w_((width + kCell - 1) / kCell), cells_h_((height + kCell - 1) / kCell),
      occupied_(static_cast<std::size_t>(cells_w_) * cells_h_, 0) {}

double Canvas::uniform(double lo, double hi) {
    if (hi <= lo) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
}

int Canvas::uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
}

double Canvas::normal(double sigma) {
    if (sigma <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng_);
}

void Canvas::paint_background(const BackgroundSpec& bg) {
    const int W = img_.width, H = img_.height;
    const int scale = std::max(1, bg.variation_scale);
    const int gw = W / scale + 2, gh = H / scale + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (double& g : grid) g = uniform(-bg.variation, bg.variation);
    std::normal_distribution<double> noise(0.0, std::max(bg.sigma, 1e-12));
    const bool noisy = bg.sigma > 0.0;
    for (int r = 0; r < H; ++r) {
        const double fy = static_cast<double>(r) / scale;
        const int gy = static_cast<int>(fy);
        const double ty = fy - gy;
        std::uint8_t* row = img_.pixels.data() + static_cast<std::size_t>(r) * W;
        for (int c = 0; c < W; ++c) {
            const double fx = static_cast<double>(c) / scale;
            const int gx = static_cast<int>(fx);
            const double tx = fx - gx;
            const double* g0 = grid.data() + static_cast<std::size_t>(gy) * gw + gx;
            const double* g1 = g0 + gw;
            const double shade_v = (1 - ty) * ((1 - tx) * g0[0] + tx * g0[1]) + ty * ((1 - tx) * g1[0] + tx * g1[1]);
            const double v = bg.mean + shade_v + (noisy ? noise(rng_) : 0.0);
            row[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
}

void Canvas::paint_sporadic(const ArtefactSpec& a) {
    const double area = static_cast<double>(img_.width) * img_.height;
    const auto n = static_cast<long long>(std::llround(a.sporadic_density * area));
    for (long long i = 0; i < n; ++i) {
        const int r = uniform_int(0, img_.height - 1), c = uniform_int(0, img_.width - 1);
        const auto g = static_cast<std::uint8_t>(std::lround(uniform(a.sporadic_gray)));
        img_.at(r, c) = g;
        if (uniform_int(0, 1) == 1 && c + 1 < img_.width) img_.at(r, c + 1) = g;
    }
}

bool Canvas::cell_free(int r, int c) const {
    return occupied_[static_cast<std::size_t>(r / kCell) * cells_w_ + c / kCell] == 0;
}

void Canvas::mark(int r, int c, int margin) {
    const int r0 = std::max(0, (r - margin) / kCell), r1 = std::min(cells_h_ - 1, (r + margin) / kCell);
    const int c0 = std::max(0, (c - margin) / kCell), c1 = std::min(cells_w_ - 1, (c + margin) / kCell);
    for (int y = r0; y <= r1; ++y) {
        std::fill(occupied_.begin() + static_cast<std::ptrdiff_t>(y) * cells_w_ + c0,
                  occupied_.begin() + static_cast<std::ptrdiff_t>(y) * cells_w_ + c1 + 1, 1);
    }
}

bool Canvas::fits(const Sprite& s, int row, int col, int border) const {
    for (const auto& o : s.px) {
        const int r = row + o.row, c = col + o.col;
        if (r < border || c < border || r >= img_.height - border || c >= img_.width - border) return false;
        if (!cell_free(r, c)) return false;
    }
    return true;
}

void Canvas::stamp(const Sprite& s, int row, int col, int margin) {
    std::set<std::pair<int, int>> cells;
    for (std::size_t i = 0; i < s.px.size(); ++i) {
        const int r = row + s.px[i].row, c = col + s.px[i].col;
        if (!img_.contains(r, c)) continue;
        img_.at(r, c) = s.gray[i];
        cells.insert({r / kCell, c / kCell});
    }
    for (const auto& [cr, cc] : cells) mark(cr * kCell + kCell / 2, cc * kCell + kCell / 2, margin + kCell / 2);
}

void Canvas::reserve_disk(int row, int col, double radius) {
    const int reach = static_cast<int>(std::ceil(radius));
    for (int r = row - reach; r <= row + reach; r += kCell) {
        for (int c = col - reach; c <= col + reach; c += kCell) {
            if ((r - row) * (r - row) + (c - col) * (c - col) <= radius * radius && img_.contains(r, c)) mark(r, c, 0);
        }
    }
}

bool Canvas::place_random(const Sprite& s, int margin, int attempts, int& row, int& col) {
    for (int i = 0; i < attempts; ++i) {
        const int r = uniform_int(0, img_.height - 1), c = uniform_int(0, img_.width - 1);
        if (fits(s, r, c, margin)) {
            row = r;
            col = c;
            return true;
        }
    }
    return false;
}

Sprite disk_sprite(double radius, double gray, Canvas& cv, Range clamp) {
    PixelMap m;
    paint_disk(m, 0, 0, radius, gray, cv, clamp);
    return from_map(m);
}

Sprite blob_sprite(int area, double gray, Canvas& cv, Range clamp) {
    // Eden growth: repeatedly attach a random 4-neighbour of the current set.
    std::set<std::pair<int, int>> in{{0, 0}};
    std::vector<std::pair<int, int>> order{{0, 0}};
    std::vector<std::pair<int, int>> frontier{{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    while (static_cast<int>(in.size()) < std::max(1, area)) {
        const std::size_t i = static_cast<std::size_t>(cv.uniform_int(0, static_cast<int>(frontier.size()) - 1));
        const auto p = frontier[i];
        frontier[i] = frontier.back();
        frontier.pop_back();
        if (!in.insert(p).second) continue;
        order.push_back(p);
        for (auto [dy, dx] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}}) {
            const std::pair<int, int> q{p.first + dy, p.second + dx};
            if (!in.contains(q)) frontier.push_back(q);
        }
    }
    PixelMap m;
    for (const auto& p : order) m[p] = shade(gray, cv.normal(1.5), clamp);
    return from_map(m);
}

Sprite capsule_path_sprite(const std::vector<std::pair<double, double>>& path, double width, double gray, Canvas& cv,
                           Range clamp) {
    PixelMap m;
    paint_path(m, path, width, gray, cv, clamp);
    return from_map(m);
}

namespace {

std::vector<std::pair<double, double>> segment(double y0, double x0, double y1, double x1) {
    const double len = std::hypot(y1 - y0, x1 - x0);
    const int n = std::max(1, static_cast<int>(std::ceil(len * 2)));
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        out.push_back({y0 + t * (y1 - y0), x0 + t * (x1 - x0)});
    }
    return out;
}

}  // namespace

Sprite needle_sprite(double length, double width, double angle, double gray, Canvas& cv, Range clamp) {
    const double dy = std::sin(angle) * length / 2, dx = std::cos(angle) * length / 2;
    return capsule_path_sprite(segment(-dy, -dx, dy, dx), width, gray, cv, clamp);
}

Sprite clip_sprite(double leg, double width, double angle, double gray, Canvas& cv, Range clamp) {
    const double half_gap = std::max(1.5, width * 1.25);
    // U opening towards -row, bend at +row, in local coordinates; then rotated.
    std::vector<std::pair<double, double>> local;
    for (auto& p : segment(-leg / 2, -half_gap, leg / 2, -half_gap)) local.push_back(p);
    for (int i = 0; i <= 16; ++i) {
        const double t = std::numbers::pi * (1.0 - i / 16.0);
        local.push_back({leg / 2 + half_gap * std::sin(t), half_gap * std::cos(t)});
    }
    for (auto& p : segment(leg / 2, half_gap, -leg / 4, half_gap)) local.push_back(p);
    const double cs = std::cos(angle), sn = std::sin(angle);
    std::vector<std::pair<double, double>> path;
    for (const auto& [y, x] : local) path.push_back({cs * y - sn * x, sn * y + cs * x});
    return capsule_path_sprite(path, width, gray, cv, clamp);
}

std::vector<std::pair<double, double>> random_curve(double length, double curvature, Canvas& cv) {
    std::vector<std::pair<double, double>> out;
    double y = 0, x = 0, th = cv.uniform(0, 2 * std::numbers::pi), turn = 0;
    const int n = std::max(2, static_cast<int>(length));
    for (int i = 0; i < n; ++i) {
        out.push_back({y, x});
        turn = 0.9 * turn + cv.normal(curvature);
        th += turn;
        y += std::sin(th);
        x += std::cos(th);
    }
    return out;
}

Offset nearest_to_centroid(const Sprite& s) {
    double sy = 0, sx = 0;
    for (const auto& o : s.px) {
        sy += o.row;
        sx += o.col;
    }
    sy /= static_cast<double>(s.px.size());
    sx /= static_cast<double>(s.px.size());
    Offset best = s.px.front();
    double bd = 1e300;
    for (const auto& o : s.px) {
        const double d = (o.row - sy) * (o.row - sy) + (o.col - sx) * (o.col - sx);
        if (d < bd) {
            bd = d;
            best = o;
        }
    }
    return best;
}

Cloud cloud_sprite(const ArtefactSpec& a, Canvas& cv) {
    const double radius = cv.uniform(a.cloud_radius);
    const int n = cv.uniform_int(a.specks_per_cloud);
    const double base = cv.uniform(a.speck_gray);
    PixelMap m;
    for (int i = 0; i < n; ++i) {
        const double rr = radius * std::sqrt(cv.uniform(0.0, 1.0)), th = cv.uniform(0.0, 2 * std::numbers::pi);
        int y = static_cast<int>(std::lround(rr * std::sin(th))), x = static_cast<int>(std::lround(rr * std::cos(th)));
        const auto g = shade(base, cv.normal(a.speck_spread), kFullRange);
        const int size = cv.uniform_int(a.speck_size);
        for (int j = 0; j < size; ++j) {
            m[{y, x}] = g;
            switch (cv.uniform_int(0, 3)) {
                case 0: ++y; break;
                case 1: --y; break;
                case 2: ++x; break;
                default: --x; break;
            }
        }
    }
    return {from_map(m), radius};
}

Sprite button_sprite(const ButtonSpec& b, Canvas& cv) {
    const double r = cv.uniform(b.radius);
    const double g = cv.uniform(b.gray);
    PixelMap m;
    paint_disk(m, 0, 0, r, g, cv, kFullRange);
    const double hr = std::max(1.0, r / 6.0), off = r / 3.0;
    std::vector<std::pair<double, double>> holes;
    if (r >= 10) {
        holes = {{-off, -off}, {-off, off}, {off, -off}, {off, off}};
    } else {
        holes = {{0, -off}, {0, off}};
    }
    for (const auto& [hy, hx] : holes) paint_disk(m, hy, hx, hr, 200, cv, kFullRange);
    return from_map(m);
}

Drawstring drawstring_sprite(const DrawstringSpec& d, Canvas& cv, std::optional<Range> string_gray, int min_knots) {
    const double length = cv.uniform(d.length);
    const auto path = random_curve(length, 0.02, cv);
    const double width = cv.uniform(d.width);
    const Range sg = string_gray.value_or(d.gray);
    PixelMap m;
    paint_path(m, path, width, cv.uniform(sg), cv, kFullRange);
    Drawstring out;
    const int knots = std::max(min_knots, cv.uniform_int(d.knots));
    const int n = static_cast<int>(path.size());
    for (int i = 0; i < knots; ++i) {
        const int lo = std::min(n - 1, 20), hi = std::max(lo, n - 21);
        const auto& [ky, kx] = path[static_cast<std::size_t>(cv.uniform_int(lo, hi))];
        paint_disk(m, ky, kx, cv.uniform(d.knot_radius), cv.uniform(d.knot_gray), cv, kFullRange);
        out.knots.push_back({static_cast<int>(std::lround(ky)), static_cast<int>(std::lround(kx))});
    }
    out.sprite = from_map(m);
    return out;
}

Seam seam_sprite(const SeamSpec& s, Canvas& cv) {
    const auto path = random_curve(cv.uniform(s.length), 0.004, cv);
    PixelMap m;
    paint_path(m, path, cv.uniform(s.width), cv.uniform(s.gray), cv, kFullRange);
    auto pt = [](const std::pair<double, double>& p) {
        return Offset{static_cast<int>(std::lround(p.first)), static_cast<int>(std::lround(p.second))};
    };
    return {from_map(m), pt(path.front()), pt(path.back())};
}

Zip zip_sprite(const ZipSpec& z, Canvas& cv) {
    const int length = static_cast<int>(cv.uniform(z.length));
    const bool vertical = cv.uniform_int(0, 1) == 1;
    auto at = [vertical](int along, int across) {
        return vertical ? std::pair<int, int>{along, across} : std::pair<int, int>{across, along};
    };
    PixelMap m;
    const double tape = cv.uniform(z.tape_gray), tooth = cv.uniform(z.tooth_gray), puller = cv.uniform(z.puller_gray);
    for (int a = 0; a < length; ++a)
        for (int x = -7; x <= 6; ++x) m[at(a, x)] = shade(tape, cv.normal(1.5), kFullRange);
    Zip out;
    for (int a = 0, i = 0; a + 3 <= length; a += 5, ++i) {
        const int x0 = (i % 2 == 0) ? -5 : 0;
        for (int da = 0; da < 3; ++da)
            for (int x = x0; x < x0 + 5; ++x) m[at(a + da, x)] = shade(tooth, cv.normal(1.5), kFullRange);
        const auto c = at(a + 1, x0 + 2);
        out.teeth.push_back({c.first, c.second});
    }
    for (int a = -24; a < 0; ++a)
        for (int x = -6; x <= 5; ++x) m[at(a, x)] = shade(puller, cv.normal(1.5), kFullRange);
    out.sprite = from_map(m);
    return out;
}

Sprite contaminant_sprite(const ContaminantSpec& c, Canvas& cv) {
    const double gray = cv.uniform(c.gray);
    switch (c.kind) {
        case mtfilter::Kind::needle: {
            Sprite best;
            for (int attempt = 0; attempt < 50; ++attempt) {
                Sprite s = needle_sprite(cv.uniform(c.size), cv.uniform(c.width), cv.uniform(0, std::numbers::pi), gray,
                                         cv, c.gray);
                std::vector<imaging::PixelCoord> px;
                for (const auto& o : s.px) px.push_back({o.row, o.col});
                if (imaging::shape_stats(px).aspect_ratio >= c.min_aspect) return s;
                best = std::move(s);
            }
            return best;
        }
        case mtfilter::Kind::clip:
            return clip_sprite(cv.uniform(c.size), cv.uniform(c.width), cv.uniform(0, 2 * std::numbers::pi), gray, cv,
                               c.gray);
        default:
            return blob_sprite(static_cast<int>(std::lround(cv.uniform(c.size))), gray, cv, c.gray);
    }
}

}  // namespace contam::synth::detail
