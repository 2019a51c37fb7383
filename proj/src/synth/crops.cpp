#include "contam/synth.hpp"

#include "canvas.hpp"
#include "contam/cnn_io.hpp"
#include "contam/error.hpp"
#include "contam/image_io.hpp"

#include <cstdio>

namespace contam::synth {

using detail::Canvas;
using detail::mix;
using detail::Offset;

namespace {

constexpr int kJitter = 2;

// Clutter around the central object. Placement failures are not errors here: a crowded patch is fine.
void add_clutter(Canvas& cv, const SceneSpec& s) {
    int r = 0, c = 0;
    const int clouds = cv.uniform_int(s.artefacts.clouds);
    for (int i = 0; i < clouds; ++i) {
        auto cloud = detail::cloud_sprite(s.artefacts, cv);
        if (!cloud.sprite.px.empty() && cv.place_random(cloud.sprite, 0, s.max_attempts, r, c)) {
            cv.stamp(cloud.sprite, r, c, s.margin);
        }
    }
    const auto& d = s.decoys;
    const int buttons = cv.uniform_int(d.buttons.count);
    for (int i = 0; i < buttons; ++i) {
        auto b = detail::button_sprite(d.buttons, cv);
        if (cv.place_random(b, s.margin, s.max_attempts, r, c)) cv.stamp(b, r, c, s.margin);
    }
    const int seams = cv.uniform_int(d.seams.count);
    for (int i = 0; i < seams; ++i) {
        auto sm = detail::seam_sprite(d.seams, cv);
        if (cv.place_random(sm.sprite, 0, s.max_attempts, r, c)) cv.stamp(sm.sprite, r, c, s.margin);
    }
    const int strings = cv.uniform_int(d.drawstrings.count);
    for (int i = 0; i < strings; ++i) {
        auto ds = detail::drawstring_sprite(d.drawstrings, cv);
        if (cv.place_random(ds.sprite, 0, s.max_attempts, r, c)) cv.stamp(ds.sprite, r, c, s.margin);
    }
}

// Stamps `s` so that its pixel `anchor` lands near the patch centre, then returns the jittered centre.
imaging::PixelCoord stamp_centred(Canvas& cv, const detail::Sprite& s, Offset anchor, int patch, int margin) {
    const int mid = patch / 2;
    cv.stamp(s, mid - anchor.row, mid - anchor.col, margin);
    return {mid + cv.uniform_int(-kJitter, kJitter), mid + cv.uniform_int(-kJitter, kJitter)};
}

Canvas patch_canvas(const CropSpec& spec, std::uint64_t seed) {
    const int patch = 2 * spec.crop_size;
    Canvas cv(patch, patch, seed);
    cv.paint_background(spec.scene.background);
    cv.paint_sporadic(spec.scene.artefacts);
    return cv;
}

cnn::LabeledCrop tc_crop(const CropSpec& spec, int index) {
    Canvas cv = patch_canvas(spec, mix(spec.seed, 3, static_cast<std::uint64_t>(index)));
    const auto kinds = spec.scene.contaminants.empty() ? default_contaminants() : spec.scene.contaminants;
    std::vector<double> w;
    for (const auto& k : kinds) w.push_back(k.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const auto& kind = kinds[pick(cv.rng())];
    const auto sprite = detail::contaminant_sprite(kind, cv);
    const auto centre = stamp_centred(cv, sprite, detail::nearest_to_centroid(sprite), 2 * spec.crop_size,
                                      spec.scene.margin);
    add_clutter(cv, spec.scene);
    char id[32];
    std::snprintf(id, sizeof id, "tc_%05d", index);
    return {imaging::crop(cv.image(), centre, spec.crop_size), cnn::Label::tc, id};
}

cnn::LabeledCrop fc_crop(const CropSpec& spec, int index) {
    Canvas cv = patch_canvas(spec, mix(spec.seed, 4, static_cast<std::uint64_t>(index)));
    const auto& d = spec.scene.decoys;
    const int patch = 2 * spec.crop_size, margin = spec.scene.margin;
    std::discrete_distribution<int> pick(
        {spec.knot_weight, spec.button_weight, spec.zip_weight, spec.seam_weight, spec.cloud_weight});
    imaging::PixelCoord centre;
    switch (pick(cv.rng())) {
        case 0: {
            std::optional<Range> gray;
            if (cv.uniform(0.0, 1.0) < spec.faint_string_fraction) gray = spec.faint_string_gray;
            const auto ds = detail::drawstring_sprite(d.drawstrings, cv, gray, 1);
            const auto& knot = ds.knots[static_cast<std::size_t>(cv.uniform_int(0, static_cast<int>(ds.knots.size()) - 1))];
            centre = stamp_centred(cv, ds.sprite, knot, patch, margin);
            break;
        }
        case 1: {
            const auto b = detail::button_sprite(d.buttons, cv);
            centre = stamp_centred(cv, b, {0, 0}, patch, margin);
            break;
        }
        case 2: {
            const auto z = detail::zip_sprite(d.zips, cv);
            const auto& tooth = z.teeth[static_cast<std::size_t>(cv.uniform_int(0, static_cast<int>(z.teeth.size()) - 1))];
            centre = stamp_centred(cv, z.sprite, tooth, patch, margin);
            break;
        }
        case 3: {
            const auto sm = detail::seam_sprite(d.seams, cv);
            centre = stamp_centred(cv, sm.sprite, cv.uniform_int(0, 1) == 0 ? sm.end_a : sm.end_b, patch, margin);
            break;
        }
        default: {
            auto cloud = detail::cloud_sprite(spec.scene.artefacts, cv);
            while (cloud.sprite.px.empty()) cloud = detail::cloud_sprite(spec.scene.artefacts, cv);
            const auto& speck =
                cloud.sprite.px[static_cast<std::size_t>(cv.uniform_int(0, static_cast<int>(cloud.sprite.px.size()) - 1))];
            centre = stamp_centred(cv, cloud.sprite, speck, patch, margin);
            break;
        }
    }
    add_clutter(cv, spec.scene);
    char id[32];
    std::snprintf(id, sizeof id, "fc_%05d", index);
    return {imaging::crop(cv.image(), centre, spec.crop_size), cnn::Label::fc, id};
}

}  // namespace

void CropSpec::validate() const {
    if (crop_size < 8) throw UsageError("crop size must be at least 8");
    scene.validate();
    for (double w : {knot_weight, button_weight, zip_weight, seam_weight, cloud_weight}) {
        if (!(w >= 0.0)) throw UsageError("crop source weights must be non-negative");
    }
    if (!(knot_weight + button_weight + zip_weight + seam_weight + cloud_weight > 0.0)) {
        throw UsageError("at least one crop source weight must be positive");
    }
    if (faint_string_fraction < 0.0 || faint_string_fraction > 1.0) {
        throw UsageError("faint string fraction must lie in [0, 1]");
    }
    if (!faint_string_gray.valid() || faint_string_gray.lo < 0 || faint_string_gray.hi > 255) {
        throw UsageError("faint string gray range must lie within [0, 255]");
    }
    if (zip_weight > 0.0 && scene.decoys.zips.length.lo < 3) throw UsageError("zip crops need zips of length >= 3");
}

CropSpec default_crop_spec() {
    CropSpec s;
    s.scene.contaminants = default_contaminants();
    s.scene.artefacts.clouds = {0, 2};
    s.scene.decoys.buttons.count = {0, 1};
    s.scene.decoys.seams.count = {0, 1};
    s.scene.decoys.drawstrings.count = {0, 0};
    s.scene.decoys.zips.count = {0, 0};
    s.scene.margin = 4;
    s.scene.max_attempts = 50;
    return s;
}

std::vector<cnn::LabeledCrop> generate_crop_dataset(int n_tc, int n_fc, const CropSpec& spec) {
    spec.validate();
    if (n_tc < 1 || n_fc < 1) throw UsageError("crop datasets need at least one crop of each class");
    std::vector<cnn::LabeledCrop> out;
    out.reserve(static_cast<std::size_t>(n_tc + n_fc));
    for (int i = 0; i < n_tc; ++i) out.push_back(tc_crop(spec, i));
    for (int i = 0; i < n_fc; ++i) out.push_back(fc_crop(spec, i));
    return out;
}

void write_crop_dataset(const std::vector<cnn::LabeledCrop>& crops, const std::filesystem::path& dir,
                        const std::string& format) {
    if (format != "png" && format != "pgm") throw UsageError("crop format must be png or pgm");
    std::filesystem::create_directories(dir);
    std::vector<cnn::ManifestEntry> entries;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "crop_%05zu.%s", i, format.c_str());
        imaging::write_image(crops[i].image, dir / name);
        entries.push_back({name, crops[i].label});
    }
    cnn::write_manifest(entries, dir / "manifest.csv");
}

}  // namespace contam::synth
