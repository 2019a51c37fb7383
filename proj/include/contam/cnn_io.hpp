#pragma once

#include "contam/cnn.hpp"

#include <json.hpp>

#include <filesystem>

namespace contam::cnn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const nlohmann::json& j);
nlohmann::json architecture_to_json(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Hyperparams& hp);
/// Missing keys keep their defaults; the result is validated.
Hyperparams hyperparams_from_json(const nlohmann::json& j);

/// Binary container: "CDNN", u32 format version, u32 header length, JSON header, little-endian f64 parameters.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;
    Label label = Label::fc;
};

/// CSV with header "path,label"; relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<LabeledCrop> load_crops(const std::filesystem::path& manifest);

void write_loss_trace(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace contam::cnn
