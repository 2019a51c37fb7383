#pragma once

#include "contam/mtfilter.hpp"

#include <json.hpp>

#include <filesystem>

namespace contam::mtfilter {

inline constexpr const char* kProfileSchema = "contamdet.calibration_profile/1";

nlohmann::json to_json(const CalibrationProfile& p);
CalibrationProfile profile_from_json(const nlohmann::json& j);

void save_profile(const CalibrationProfile& p, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

/// {image: path, contaminations: [{row, col, kind}]}
nlohmann::json to_json(const GroundTruthAnnotation& a);
GroundTruthAnnotation annotation_from_json(const nlohmann::json& j);

void save_annotation(const GroundTruthAnnotation& a, const std::filesystem::path& path);
GroundTruthAnnotation load_annotation(const std::filesystem::path& path);

nlohmann::json to_json(const Detection& d, bool include_pixels = false);

/// Reads every *.json annotation in `dir` together with the image it names (relative paths resolve against `dir`).
std::vector<AnnotatedImage> load_annotated_dir(const std::filesystem::path& dir);

/// Reads a JSON file, raising DataError on I/O or parse failures.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace contam::mtfilter
