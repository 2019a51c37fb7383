#include "contam/mtfilter_io.hpp"

#include "contam/error.hpp"
#include "contam/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace contam::mtfilter {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json interval_json(const ShapeInterval& iv) {
    return {{"mean", iv.mean}, {"std", iv.std}, {"lo", iv.lo}, {"hi", iv.hi}};
}

ShapeInterval interval_from(const json& j) {
    ShapeInterval iv;
    iv.mean = j.at("mean").get<double>();
    iv.std = j.at("std").get<double>();
    iv.lo = j.at("lo").get<double>();
    iv.hi = j.at("hi").get<double>();
    return iv;
}

// JSON has no infinity; null stands in for it.
json finite_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

json to_json(const CalibrationProfile& p) {
    json bands = json::array();
    for (const auto& b : p.bands) {
        bands.push_back({{"kind", to_string(b.kind)},
                         {"k_lo", b.k_lo},
                         {"k_hi", b.k_hi},
                         {"area", interval_json(b.area)},
                         {"ratio", interval_json(b.ratio)},
                         {"solidity", interval_json(b.solidity)}});
    }
    return {{"schema", kProfileSchema},
            {"ladder", {{"k_lo", p.ladder.k_lo}, {"k_hi", p.ladder.k_hi}, {"delta", p.ladder.delta()}}},
            {"area", interval_json(p.area_iv)},
            {"ratio", interval_json(p.ratio_iv)},
            {"solidity", interval_json(p.solidity_iv)},
            {"per_band", p.per_band},
            {"bands", bands},
            {"structuring_element", {{"shape", imaging::to_string(p.se.shape)}, {"radius", p.se.radius}}},
            {"d0", p.d0},
            {"area_growth_max", p.area_growth_max},
            {"axis_growth_max", p.axis_growth_max},
            {"neighborhood_size", p.neighborhood_size},
            {"merge_radius", p.merge_radius}};
}

CalibrationProfile profile_from_json(const json& j) {
    try {
        if (j.value("schema", std::string{}) != kProfileSchema) {
            throw DataError("calibration profile schema mismatch (expected " + std::string(kProfileSchema) + ")");
        }
        CalibrationProfile p;
        p.ladder.k_lo = j.at("ladder").at("k_lo").get<int>();
        p.ladder.k_hi = j.at("ladder").at("k_hi").get<int>();
        p.area_iv = interval_from(j.at("area"));
        p.ratio_iv = interval_from(j.at("ratio"));
        p.solidity_iv = interval_from(j.at("solidity"));
        p.per_band = j.value("per_band", false);
        for (const auto& b : j.value("bands", json::array())) {
            ShapeBand band;
            band.kind = kind_from_string(b.at("kind").get<std::string>());
            band.k_lo = b.at("k_lo").get<int>();
            band.k_hi = b.at("k_hi").get<int>();
            band.area = interval_from(b.at("area"));
            band.ratio = interval_from(b.at("ratio"));
            band.solidity = interval_from(b.at("solidity"));
            p.bands.push_back(band);
        }
        const auto& se = j.at("structuring_element");
        p.se.shape = imaging::se_shape_from_string(se.at("shape").get<std::string>());
        p.se.radius = se.at("radius").get<int>();
        p.d0 = j.at("d0").get<double>();
        p.area_growth_max = j.at("area_growth_max").get<double>();
        p.axis_growth_max = j.at("axis_growth_max").get<double>();
        p.neighborhood_size = j.value("neighborhood_size", 120);
        p.merge_radius = j.value("merge_radius", 10.0);
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed calibration profile: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("invalid calibration profile: ") + e.what());
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void save_profile(const CalibrationProfile& p, const fs::path& path) {
    write_json_file(to_json(p), path);
}

CalibrationProfile load_profile(const fs::path& path) {
    return profile_from_json(read_json_file(path));
}

json to_json(const GroundTruthAnnotation& a) {
    json list = json::array();
    for (const auto& c : a.contaminations) {
        list.push_back({{"row", c.position.row}, {"col", c.position.col}, {"kind", to_string(c.kind)}});
    }
    return {{"image", a.image}, {"contaminations", list}};
}

GroundTruthAnnotation annotation_from_json(const json& j) {
    try {
        GroundTruthAnnotation a;
        a.image = j.at("image").get<std::string>();
        for (const auto& c : j.at("contaminations")) {
            a.contaminations.push_back(
                {{c.at("row").get<int>(), c.at("col").get<int>()}, kind_from_string(c.at("kind").get<std::string>())});
        }
        return a;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed annotation: ") + e.what());
    }
}

void save_annotation(const GroundTruthAnnotation& a, const fs::path& path) {
    write_json_file(to_json(a), path);
}

GroundTruthAnnotation load_annotation(const fs::path& path) {
    return annotation_from_json(read_json_file(path));
}

json to_json(const Detection& d, bool include_pixels) {
    json j = {{"row", d.centroid.row},
              {"col", d.centroid.col},
              {"threshold_index", d.threshold_index},
              {"kind_hint", d.kind_hint ? json(to_string(*d.kind_hint)) : json(nullptr)},
              {"verdict", to_string(d.verdict)},
              {"probability", d.probability ? json(*d.probability) : json(nullptr)},
              {"area", d.blob.area},
              {"aspect_ratio", d.blob.aspect_ratio},
              {"solidity", d.blob.solidity},
              {"major_axis_len", d.blob.major_axis_len},
              {"minor_axis_len", d.blob.minor_axis_len},
              {"bbox", {d.blob.bbox.row0, d.blob.bbox.col0, d.blob.bbox.row1, d.blob.bbox.col1}},
              {"neighbour_distance", finite_or_null(d.neighbour_distance)},
              {"area_growth", d.area_growth},
              {"axis_growth", d.axis_growth}};
    if (include_pixels) {
        json px = json::array();
        for (const auto& p : d.blob.pixels) px.push_back({p.row, p.col});
        j["pixels"] = px;
    }
    return j;
}

std::vector<AnnotatedImage> load_annotated_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<AnnotatedImage> out;
    for (const auto& f : files) {
        const json j = read_json_file(f);
        if (!j.is_object() || !j.contains("contaminations") || !j.contains("image")) continue;
        AnnotatedImage ai;
        ai.annotation = annotation_from_json(j);
        fs::path img = ai.annotation.image;
        if (img.is_relative()) img = dir / img;
        ai.image = imaging::read_image(img);
        ai.annotation.validate(ai.image.width, ai.image.height);
        out.push_back(std::move(ai));
    }
    return out;
}

}  // namespace contam::mtfilter
