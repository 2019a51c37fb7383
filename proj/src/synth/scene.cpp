#include "contam/synth.hpp"

#include "canvas.hpp"
#include "contam/error.hpp"
#include "contam/image_io.hpp"
#include "contam/mtfilter_io.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace contam::synth {

using detail::Canvas;
using detail::mix;
using mtfilter::Kind;

namespace {

void check(bool ok, const std::string& what) {
    if (!ok) throw UsageError("invalid scene spec: " + what);
}

void check_gray(const Range& r, const std::string& what) {
    check(r.valid() && r.lo >= 0.0 && r.hi <= 255.0, what + " gray range must lie within [0, 255]");
}

void check_count(const IntRange& r, const std::string& what) {
    check(r.valid() && r.lo >= 0, what + " count range must be non-negative and ordered");
}

}  // namespace

void ContaminantSpec::validate() const {
    check_count(count, to_string(kind));
    check_gray(gray, to_string(kind));
    check(size.valid() && size.lo > 0.0, to_string(kind) + " size range must be positive");
    check(width.valid() && width.lo > 0.0, to_string(kind) + " width range must be positive");
    check(weight >= 0.0, to_string(kind) + " weight must be non-negative");
    check(min_aspect >= 1.0, "minimum aspect ratio must be >= 1");
}

ContaminantSpec default_contaminant(Kind kind) {
    ContaminantSpec c;
    c.kind = kind;
    switch (kind) {
        case Kind::pebble:
            c.gray = {150, 175};
            c.size = {5, 30};
            break;
        case Kind::needle:
            c.gray = {20, 70};
            c.size = {10, 24};
            c.width = {2, 3};
            c.min_aspect = 4.0;
            break;
        case Kind::clip:
            c.gray = {30, 70};
            c.size = {8, 16};
            c.width = {2, 2.5};
            break;
        case Kind::plastic:
        case Kind::other:
            c.gray = {95, 130};
            c.size = {20, 80};
            break;
    }
    return c;
}

std::vector<ContaminantSpec> default_contaminants() {
    return {default_contaminant(Kind::pebble), default_contaminant(Kind::needle), default_contaminant(Kind::clip),
            default_contaminant(Kind::plastic)};
}

void SceneSpec::validate() const {
    check(width >= 16 && height >= 16, "image must be at least 16x16");
    check(background.mean >= 0.0 && background.mean <= 255.0, "background mean must lie within [0, 255]");
    check(background.sigma >= 0.0 && background.variation >= 0.0, "background spreads must be non-negative");
    check(background.variation_scale >= 1, "variation scale must be >= 1");
    check_count(artefacts.clouds, "cloud");
    check_count(artefacts.specks_per_cloud, "speck");
    check(artefacts.speck_size.valid() && artefacts.speck_size.lo >= 1, "speck size must be >= 1");
    check(artefacts.cloud_radius.valid() && artefacts.cloud_radius.lo >= 0.0, "cloud radius must be non-negative");
    check_gray(artefacts.speck_gray, "speck");
    check(artefacts.speck_spread >= 0.0, "speck spread must be non-negative");
    check_gray(artefacts.sporadic_gray, "sporadic speck");
    check(artefacts.sporadic_density >= 0.0 && artefacts.sporadic_density < 1.0, "sporadic density must lie in [0, 1)");
    check_count(decoys.buttons.count, "button");
    check_gray(decoys.buttons.gray, "button");
    check(decoys.buttons.radius.valid() && decoys.buttons.radius.lo >= 1.0, "button radius must be >= 1");
    check_count(decoys.drawstrings.count, "drawstring");
    check_count(decoys.drawstrings.knots, "knot");
    check_gray(decoys.drawstrings.gray, "drawstring");
    check_gray(decoys.drawstrings.knot_gray, "knot");
    check(decoys.drawstrings.length.valid() && decoys.drawstrings.length.lo >= 2, "drawstring length must be >= 2");
    check_count(decoys.seams.count, "seam");
    check_gray(decoys.seams.gray, "seam");
    check(decoys.seams.length.valid() && decoys.seams.length.lo >= 2, "seam length must be >= 2");
    check_count(decoys.zips.count, "zip");
    check_gray(decoys.zips.tooth_gray, "zip tooth");
    check_gray(decoys.zips.tape_gray, "zip tape");
    check_gray(decoys.zips.puller_gray, "zip puller");
    check(decoys.zips.length.valid() && decoys.zips.length.lo >= 3, "zip length must be >= 3");
    for (const auto& c : contaminants) c.validate();
    check(margin >= 0 && max_attempts >= 1, "placement margin and attempts must be positive");
}

SceneSpec SceneSpec::without_clutter() const {
    SceneSpec s = *this;
    s.artefacts.clouds = {0, 0};
    s.artefacts.sporadic_density = 0.0;
    s.decoys.buttons.count = {0, 0};
    s.decoys.drawstrings.count = {0, 0};
    s.decoys.seams.count = {0, 0};
    s.decoys.zips.count = {0, 0};
    return s;
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Canvas cv(spec.width, spec.height, spec.seed);
    Scene scene;
    cv.paint_background(spec.background);
    cv.paint_sporadic(spec.artefacts);

    const int clouds = cv.uniform_int(spec.artefacts.clouds);
    for (int i = 0; i < clouds; ++i) {
        auto cloud = detail::cloud_sprite(spec.artefacts, cv);
        const int r = cv.uniform_int(0, spec.height - 1), c = cv.uniform_int(0, spec.width - 1);
        cv.stamp(cloud.sprite, r, c, spec.margin);
        cv.reserve_disk(r, c, cloud.radius + spec.margin);
        scene.decoys.push_back({"cloud", {r, c}});
    }

    std::vector<std::string> unplaced;
    auto place = [&](const detail::Sprite& s, const std::string& name, int& r, int& c) {
        if (cv.place_random(s, spec.margin, spec.max_attempts, r, c)) {
            cv.stamp(s, r, c, spec.margin);
            return true;
        }
        unplaced.push_back(name);
        return false;
    };

    int r = 0, c = 0;
    const auto& d = spec.decoys;
    const int buttons = cv.uniform_int(d.buttons.count);
    for (int i = 0; i < buttons; ++i) {
        if (place(detail::button_sprite(d.buttons, cv), "button", r, c)) scene.decoys.push_back({"button", {r, c}});
    }
    const int strings = cv.uniform_int(d.drawstrings.count);
    for (int i = 0; i < strings; ++i) {
        const auto ds = detail::drawstring_sprite(d.drawstrings, cv);
        if (place(ds.sprite, "drawstring", r, c)) {
            for (const auto& k : ds.knots) scene.decoys.push_back({"knot", {r + k.row, c + k.col}});
        }
    }
    const int seams = cv.uniform_int(d.seams.count);
    for (int i = 0; i < seams; ++i) {
        const auto sm = detail::seam_sprite(d.seams, cv);
        if (place(sm.sprite, "seam", r, c)) {
            scene.decoys.push_back({"seam_end", {r + sm.end_a.row, c + sm.end_a.col}});
            scene.decoys.push_back({"seam_end", {r + sm.end_b.row, c + sm.end_b.col}});
        }
    }
    const int zips = cv.uniform_int(d.zips.count);
    for (int i = 0; i < zips; ++i) {
        const auto z = detail::zip_sprite(d.zips, cv);
        if (place(z.sprite, "zip", r, c)) {
            for (const auto& t : z.teeth) scene.decoys.push_back({"zip_tooth", {r + t.row, c + t.col}});
        }
    }

    scene.annotation.image = "";
    for (const auto& cs : spec.contaminants) {
        const int n = cv.uniform_int(cs.count);
        for (int i = 0; i < n; ++i) {
            const auto sprite = detail::contaminant_sprite(cs, cv);
            if (!place(sprite, to_string(cs.kind), r, c)) continue;
            const auto anchor = detail::nearest_to_centroid(sprite);
            scene.annotation.contaminations.push_back({{r + anchor.row, c + anchor.col}, cs.kind});
        }
    }
    if (!unplaced.empty()) {
        std::string list;
        for (const auto& u : unplaced) list += (list.empty() ? "" : ", ") + u;
        throw DataError("could not place without overlap after " + std::to_string(spec.max_attempts) +
                        " attempts: " + list);
    }
    scene.image = std::move(cv.image());
    return scene;
}

void DatasetSpec::validate() const {
    scene.validate();
    if (images < 1) throw UsageError("dataset needs at least one image");
    if (contaminated < 0 || contaminated > images) throw UsageError("contaminated count must lie in [0, images]");
    if (!contaminants_per_image.valid() || contaminants_per_image.lo < 1) {
        throw UsageError("contaminants per image must be >= 1");
    }
    if (contaminated > 0) {
        double total = 0.0;
        for (const auto& c : scene.contaminants) total += c.weight;
        if (scene.contaminants.empty() || !(total > 0.0)) {
            throw UsageError("contaminated images need at least one contaminant kind with positive weight");
        }
    }
    if (image_format != "png" && image_format != "pgm") throw UsageError("image format must be png or pgm");
}

std::vector<bool> contaminated_mask(const DatasetSpec& spec) {
    std::vector<int> idx(spec.images);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(mix(spec.seed, 0xC0FFEE));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> mask(spec.images, false);
    for (int i = 0; i < spec.contaminated; ++i) mask[idx[i]] = true;
    return mask;
}

SceneSpec dataset_scene(const DatasetSpec& spec, int index, bool contaminated) {
    SceneSpec s = spec.scene;
    s.seed = mix(spec.seed, 1, static_cast<std::uint64_t>(index));
    for (auto& c : s.contaminants) c.count = {0, 0};
    if (!contaminated) return s;
    std::mt19937_64 rng(mix(spec.seed, 2, static_cast<std::uint64_t>(index)));
    const int n = std::uniform_int_distribution<int>(spec.contaminants_per_image.lo, spec.contaminants_per_image.hi)(rng);
    std::vector<double> w;
    for (const auto& c : s.contaminants) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    for (int i = 0; i < n; ++i) {
        auto& c = s.contaminants[pick(rng)];
        ++c.count.lo;
        ++c.count.hi;
    }
    return s;
}

std::vector<std::filesystem::path> write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) {
    spec.validate();
    std::filesystem::create_directories(dir);
    const auto mask = contaminated_mask(spec);
    std::vector<std::filesystem::path> out;
    for (int i = 0; i < spec.images; ++i) {
        Scene scene = generate_scene(dataset_scene(spec, i, mask[i]));
        char stem[32];
        std::snprintf(stem, sizeof stem, "img_%04d", i);
        const std::string image_name = std::string(stem) + "." + spec.image_format;
        imaging::write_image(scene.image, dir / image_name);
        scene.annotation.image = image_name;
        const auto ann = dir / (std::string(stem) + ".json");
        mtfilter::save_annotation(scene.annotation, ann);
        out.push_back(ann);
    }
    mtfilter::write_json_file(dataset_metadata(to_json(spec)), dir / "metadata.json");
    return out;
}

}  // namespace contam::synth
