#pragma once

#include "contam/cnn.hpp"
#include "contam/mtfilter.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace contam::synth {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool valid() const { return lo <= hi; }
};

struct IntRange {
    int lo = 0;
    int hi = 0;
    bool valid() const { return lo <= hi; }
};

struct BackgroundSpec {
    double mean = 230.0;
    double sigma = 3.0;      // per-pixel noise
    double variation = 5.0;  // amplitude of the slow shading field
    int variation_scale = 128;
};

/// Scanner artefacts. All values here are invented: real artefact statistics are unknown.
struct ArtefactSpec {
    IntRange clouds{15, 30};
    Range cloud_radius{15, 35};
    IntRange specks_per_cloud{80, 200};
    IntRange speck_size{1, 4};
    Range speck_gray{160, 205};  // range of the per-cloud gray level
    double speck_spread = 0.0;   // per-speck deviation from the cloud's gray level
    double sporadic_density = 2e-5;  // isolated specks per pixel
    Range sporadic_gray{205, 212};
};

struct ButtonSpec {
    IntRange count{3, 6};
    Range radius{8, 20};
    Range gray{30, 60};
};

struct DrawstringSpec {
    IntRange count{0, 1};
    Range length{150, 400};
    Range width{4, 6};
    Range gray{120, 140};
    IntRange knots{1, 3};
    Range knot_radius{3, 5};
    Range knot_gray{85, 105};
};

struct SeamSpec {
    IntRange count{3, 6};
    Range length{200, 800};
    Range width{1, 2};
    Range gray{125, 150};
};

struct ZipSpec {
    IntRange count{0, 1};
    Range length{100, 300};
    Range tooth_gray{60, 90};
    Range tape_gray{185, 195};
    Range puller_gray{30, 50};
};

struct DecoySpec {
    ButtonSpec buttons;
    DrawstringSpec drawstrings;
    SeamSpec seams;
    ZipSpec zips;
};

/// One contaminant kind. `size` is the pixel area for pebbles and plastic bits, the length for
/// needle bits and the leg length for clips.
struct ContaminantSpec {
    mtfilter::Kind kind = mtfilter::Kind::pebble;
    IntRange count{0, 0};
    double weight = 1.0;  // relative frequency when a dataset assigns kinds
    Range gray{150, 175};
    Range size{5, 30};
    Range width{2, 3};
    double min_aspect = 1.0;

    void validate() const;
};

/// Defaults for each kind: pebble 150-175 gray / 5-30 px, needle bit 20-70 gray / 10-24 px long / aspect >= 4,
/// clip 30-70 gray, plastic 95-130 gray.
ContaminantSpec default_contaminant(mtfilter::Kind kind);

struct SceneSpec {
    int width = 4080;
    int height = 1664;
    BackgroundSpec background;
    ArtefactSpec artefacts;
    DecoySpec decoys;
    std::vector<ContaminantSpec> contaminants;
    int margin = 12;        // clearance kept around every placed object
    int max_attempts = 500; // placement retries per object
    std::uint64_t seed = 1;

    void validate() const;
    /// Same spec with every decoy and artefact count set to zero.
    SceneSpec without_clutter() const;
};

/// Contaminant kinds of the default specs: pebble, needle bit, clip, plastic.
std::vector<ContaminantSpec> default_contaminants();

/// Where each decoy element was drawn; used to centre false-contamination crops.
struct DecoyMark {
    std::string kind;  // knot, button, zip_tooth, seam_end, cloud, string
    imaging::PixelCoord position;
};

struct Scene {
    imaging::GrayImage image;
    mtfilter::GroundTruthAnnotation annotation;
    std::vector<DecoyMark> decoys;
};

/// Background, artefact clouds, decoys, then contaminants at non-overlapping positions.
/// Throws DataError listing the objects that could not be placed.
Scene generate_scene(const SceneSpec& spec);

// ---- datasets ---------------------------------------------------------------

struct DatasetSpec {
    SceneSpec scene;  // decoys and artefacts; contaminant counts are ignored
    int images = 200;
    int contaminated = 60;
    IntRange contaminants_per_image{1, 2};
    std::string image_format = "png";
    std::uint64_t seed = 1;

    void validate() const;
};

/// Scene spec of image `index`: per-image seed and contaminant counts drawn from the dataset spec.
SceneSpec dataset_scene(const DatasetSpec& spec, int index, bool contaminated);

/// Indices of contaminated images (seeded).
std::vector<bool> contaminated_mask(const DatasetSpec& spec);

/// Writes img_NNNN.<fmt> + img_NNNN.json per image and metadata.json. Returns the annotation paths.
std::vector<std::filesystem::path> write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

// ---- crop datasets ----------------------------------------------------------

struct CropSpec {
    int crop_size = 120;
    SceneSpec scene;  // background, artefacts and decoys of the patch around each crop
    /// Relative frequencies of FC crop sources.
    double knot_weight = 0.5;
    double button_weight = 0.15;
    double zip_weight = 0.15;
    double seam_weight = 0.1;
    double cloud_weight = 0.1;
    /// Fraction of knot crops whose string is drawn nearly as light as the background.
    double faint_string_fraction = 0.0;
    Range faint_string_gray{205, 222};
    std::uint64_t seed = 1;

    void validate() const;
};

/// Small-patch defaults for crop generation.
CropSpec default_crop_spec();

/// TC crops centred on planted contaminants, FC crops centred on decoy elements. TC crops come first.
std::vector<cnn::LabeledCrop> generate_crop_dataset(int n_tc, int n_fc, const CropSpec& spec);

/// Writes crop_NNNNN.<fmt> files and manifest.csv into `dir`.
void write_crop_dataset(const std::vector<cnn::LabeledCrop>& crops, const std::filesystem::path& dir,
                        const std::string& format = "png");

// ---- configuration files ----------------------------------------------------

nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CropSpec& spec);
CropSpec crop_spec_from_json(const nlohmann::json& j);

/// Provenance block written next to generated data; flags the invented artefact model.
nlohmann::json dataset_metadata(const nlohmann::json& spec_json);

}  // namespace contam::synth
