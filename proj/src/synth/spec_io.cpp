#include "contam/synth.hpp"

#include "contam/error.hpp"

namespace contam::synth {

using nlohmann::json;

namespace {

json arr(const Range& r) { return json::array({r.lo, r.hi}); }
json arr(const IntRange& r) { return json::array({r.lo, r.hi}); }

template <class R>
void read_range(const json& j, const char* key, R& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw DataError(std::string("'") + key + "' must be a [lo, hi] pair");
    out.lo = v[0].get<decltype(out.lo)>();
    out.hi = v[1].get<decltype(out.hi)>();
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json to_json(const ContaminantSpec& c) {
    return {{"kind", mtfilter::to_string(c.kind)}, {"count", arr(c.count)}, {"weight", c.weight},
            {"gray", arr(c.gray)},                 {"size", arr(c.size)},   {"width", arr(c.width)},
            {"min_aspect", c.min_aspect}};
}

ContaminantSpec contaminant_from_json(const json& j) {
    ContaminantSpec c = default_contaminant(mtfilter::kind_from_string(j.at("kind").get<std::string>()));
    read_range(j, "count", c.count);
    read(j, "weight", c.weight);
    read_range(j, "gray", c.gray);
    read_range(j, "size", c.size);
    read_range(j, "width", c.width);
    read(j, "min_aspect", c.min_aspect);
    return c;
}

template <class F>
auto parse(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

json to_json(const SceneSpec& s) {
    const auto& a = s.artefacts;
    const auto& d = s.decoys;
    json contaminants = json::array();
    for (const auto& c : s.contaminants) contaminants.push_back(to_json(c));
    return {
        {"width", s.width},
        {"height", s.height},
        {"background",
         {{"mean", s.background.mean},
          {"sigma", s.background.sigma},
          {"variation", s.background.variation},
          {"variation_scale", s.background.variation_scale}}},
        {"artefacts",
         {{"clouds", arr(a.clouds)},
          {"cloud_radius", arr(a.cloud_radius)},
          {"specks_per_cloud", arr(a.specks_per_cloud)},
          {"speck_size", arr(a.speck_size)},
          {"speck_gray", arr(a.speck_gray)},
          {"speck_spread", a.speck_spread},
          {"sporadic_density", a.sporadic_density},
          {"sporadic_gray", arr(a.sporadic_gray)}}},
        {"decoys",
         {{"buttons", {{"count", arr(d.buttons.count)}, {"radius", arr(d.buttons.radius)}, {"gray", arr(d.buttons.gray)}}},
          {"drawstrings",
           {{"count", arr(d.drawstrings.count)},
            {"length", arr(d.drawstrings.length)},
            {"width", arr(d.drawstrings.width)},
            {"gray", arr(d.drawstrings.gray)},
            {"knots", arr(d.drawstrings.knots)},
            {"knot_radius", arr(d.drawstrings.knot_radius)},
            {"knot_gray", arr(d.drawstrings.knot_gray)}}},
          {"seams",
           {{"count", arr(d.seams.count)},
            {"length", arr(d.seams.length)},
            {"width", arr(d.seams.width)},
            {"gray", arr(d.seams.gray)}}},
          {"zips",
           {{"count", arr(d.zips.count)},
            {"length", arr(d.zips.length)},
            {"tooth_gray", arr(d.zips.tooth_gray)},
            {"tape_gray", arr(d.zips.tape_gray)},
            {"puller_gray", arr(d.zips.puller_gray)}}}}},
        {"contaminants", contaminants},
        {"margin", s.margin},
        {"max_attempts", s.max_attempts},
        {"seed", s.seed},
    };
}

SceneSpec scene_spec_from_json(const json& j) {
    return parse("scene spec", [&] {
        SceneSpec s;
        read(j, "width", s.width);
        read(j, "height", s.height);
        if (j.contains("background")) {
            const auto& b = j.at("background");
            read(b, "mean", s.background.mean);
            read(b, "sigma", s.background.sigma);
            read(b, "variation", s.background.variation);
            read(b, "variation_scale", s.background.variation_scale);
        }
        if (j.contains("artefacts")) {
            const auto& a = j.at("artefacts");
            auto& o = s.artefacts;
            read_range(a, "clouds", o.clouds);
            read_range(a, "cloud_radius", o.cloud_radius);
            read_range(a, "specks_per_cloud", o.specks_per_cloud);
            read_range(a, "speck_size", o.speck_size);
            read_range(a, "speck_gray", o.speck_gray);
            read(a, "speck_spread", o.speck_spread);
            read(a, "sporadic_density", o.sporadic_density);
            read_range(a, "sporadic_gray", o.sporadic_gray);
        }
        if (j.contains("decoys")) {
            const auto& d = j.at("decoys");
            auto& o = s.decoys;
            if (d.contains("buttons")) {
                const auto& b = d.at("buttons");
                read_range(b, "count", o.buttons.count);
                read_range(b, "radius", o.buttons.radius);
                read_range(b, "gray", o.buttons.gray);
            }
            if (d.contains("drawstrings")) {
                const auto& b = d.at("drawstrings");
                read_range(b, "count", o.drawstrings.count);
                read_range(b, "length", o.drawstrings.length);
                read_range(b, "width", o.drawstrings.width);
                read_range(b, "gray", o.drawstrings.gray);
                read_range(b, "knots", o.drawstrings.knots);
                read_range(b, "knot_radius", o.drawstrings.knot_radius);
                read_range(b, "knot_gray", o.drawstrings.knot_gray);
            }
            if (d.contains("seams")) {
                const auto& b = d.at("seams");
                read_range(b, "count", o.seams.count);
                read_range(b, "length", o.seams.length);
                read_range(b, "width", o.seams.width);
                read_range(b, "gray", o.seams.gray);
            }
            if (d.contains("zips")) {
                const auto& b = d.at("zips");
                read_range(b, "count", o.zips.count);
                read_range(b, "length", o.zips.length);
                read_range(b, "tooth_gray", o.zips.tooth_gray);
                read_range(b, "tape_gray", o.zips.tape_gray);
                read_range(b, "puller_gray", o.zips.puller_gray);
            }
        }
        if (j.contains("contaminants")) {
            for (const auto& c : j.at("contaminants")) s.contaminants.push_back(contaminant_from_json(c));
        }
        read(j, "margin", s.margin);
        read(j, "max_attempts", s.max_attempts);
        read(j, "seed", s.seed);
        s.validate();
        return s;
    });
}

json to_json(const DatasetSpec& s) {
    return {{"scene", to_json(s.scene)},
            {"images", s.images},
            {"contaminated", s.contaminated},
            {"contaminants_per_image", arr(s.contaminants_per_image)},
            {"image_format", s.image_format},
            {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    return parse("dataset spec", [&] {
        DatasetSpec s;
        s.scene.contaminants = default_contaminants();
        if (j.contains("scene")) s.scene = scene_spec_from_json(j.at("scene"));
        if (s.scene.contaminants.empty()) s.scene.contaminants = default_contaminants();
        read(j, "images", s.images);
        read(j, "contaminated", s.contaminated);
        read_range(j, "contaminants_per_image", s.contaminants_per_image);
        read(j, "image_format", s.image_format);
        read(j, "seed", s.seed);
        s.validate();
        return s;
    });
}

json to_json(const CropSpec& s) {
    return {{"crop_size", s.crop_size},
            {"scene", to_json(s.scene)},
            {"knot_weight", s.knot_weight},
            {"button_weight", s.button_weight},
            {"zip_weight", s.zip_weight},
            {"seam_weight", s.seam_weight},
            {"cloud_weight", s.cloud_weight},
            {"faint_string_fraction", s.faint_string_fraction},
            {"faint_string_gray", arr(s.faint_string_gray)},
            {"seed", s.seed}};
}

CropSpec crop_spec_from_json(const json& j) {
    return parse("crop spec", [&] {
        CropSpec s = default_crop_spec();
        read(j, "crop_size", s.crop_size);
        if (j.contains("scene")) s.scene = scene_spec_from_json(j.at("scene"));
        if (s.scene.contaminants.empty()) s.scene.contaminants = default_contaminants();
        read(j, "knot_weight", s.knot_weight);
        read(j, "button_weight", s.button_weight);
        read(j, "zip_weight", s.zip_weight);
        read(j, "seam_weight", s.seam_weight);
        read(j, "cloud_weight", s.cloud_weight);
        read(j, "faint_string_fraction", s.faint_string_fraction);
        read_range(j, "faint_string_gray", s.faint_string_gray);
        read(j, "seed", s.seed);
        s.validate();
        return s;
    });
}

json dataset_metadata(const json& spec_json) {
    return {{"generator", "contamdet synth"},
            {"synthetic", true},
            {"note",
             "Scanner artefacts (speck clouds, sporadic specks, shading) and decoy garment parts are an invented "
             "model; their statistics are not measured from real scans."},
            {"spec", spec_json}};
}

}  // namespace contam::synth
