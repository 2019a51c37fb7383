#include "contam/cnn_io.hpp"

#include "contam/error.hpp"
#include "contam/image_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace contam::cnn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'D', 'N', 'N'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated model file");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, const std::vector<double>& values) {
    for (double d : values) {
        auto bits = std::bit_cast<std::uint64_t>(d);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void get_f64(std::istream& in, std::vector<double>& values) {
    for (double& d : values) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated model parameters");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        d = std::bit_cast<double>(bits);
    }
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

}  // namespace

json to_json(const LayerSpec& spec) {
    json j = {{"kind", to_string(spec.kind)}};
    switch (spec.kind) {
        case LayerKind::conv: j["filters"] = spec.units; j["kernel"] = spec.size; break;
        case LayerKind::maxpool: j["window"] = spec.size; break;
        case LayerKind::dense: j["units"] = spec.units; break;
        case LayerKind::dropout: j["rate"] = spec.rate; break;
        default: break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::conv: return LayerSpec::conv(j.at("filters").get<int>(), j.at("kernel").get<int>());
        case LayerKind::maxpool: return LayerSpec::maxpool(j.at("window").get<int>());
        case LayerKind::dense: return LayerSpec::dense(j.at("units").get<int>());
        case LayerKind::dropout: return LayerSpec::dropout(j.at("rate").get<double>());
        case LayerKind::relu: return LayerSpec::relu();
        case LayerKind::sigmoid: return LayerSpec::sigmoid();
    }
    return LayerSpec::relu();
}

json architecture_to_json(const std::vector<LayerSpec>& layers) {
    json a = json::array();
    for (const auto& l : layers) a.push_back(to_json(l));
    return a;
}

std::vector<LayerSpec> architecture_from_json(const json& j) {
    std::vector<LayerSpec> out;
    for (const auto& l : j) out.push_back(layer_from_json(l));
    return out;
}

json to_json(const Hyperparams& hp) {
    const auto& r = hp.augmentation.ranges;
    return {{"architecture", architecture_to_json(hp.architecture)},
            {"alpha", hp.alpha},
            {"mu", hp.mu},
            {"batch_size", hp.batch_size},
            {"epochs", hp.epochs},
            {"class_weights", {hp.class_weights.fc, hp.class_weights.tc}},
            {"augmentation",
             {{"copies", hp.augmentation.copies},
              {"max_rotation_deg", r.max_rotation_deg},
              {"max_shift", r.max_shift},
              {"zoom_min", r.zoom_min},
              {"zoom_max", r.zoom_max}}},
            {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams hp;
    try {
        if (j.contains("architecture")) hp.architecture = architecture_from_json(j.at("architecture"));
        hp.alpha = j.value("alpha", hp.alpha);
        hp.mu = j.value("mu", hp.mu);
        hp.batch_size = j.value("batch_size", hp.batch_size);
        hp.epochs = j.value("epochs", hp.epochs);
        if (j.contains("class_weights")) {
            const auto& w = j.at("class_weights");
            if (w.is_array()) {
                if (w.size() != 2) throw DataError("class_weights must be [w_FC, w_TC]");
                hp.class_weights = {w[0].get<double>(), w[1].get<double>()};
            } else {
                hp.class_weights = {w.at("fc").get<double>(), w.at("tc").get<double>()};
            }
        }
        if (j.contains("augmentation")) {
            const auto& a = j.at("augmentation");
            auto& r = hp.augmentation.ranges;
            hp.augmentation.copies = a.value("copies", hp.augmentation.copies);
            r.max_rotation_deg = a.value("max_rotation_deg", r.max_rotation_deg);
            r.max_shift = a.value("max_shift", r.max_shift);
            r.zoom_min = a.value("zoom_min", r.zoom_min);
            r.zoom_max = a.value("zoom_max", r.zoom_max);
        }
        hp.seed = j.value("seed", hp.seed);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed hyper-parameters: ") + e.what());
    }
    hp.validate();
    return hp;
}

void save_model(const Model& model, const fs::path& path) {
    json params = json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const auto& p = model.params()[i];
        if (p.weight.data.empty() && p.bias.data.empty()) continue;
        params.push_back({{"layer", i}, {"weights", p.weight.data.size()}, {"biases", p.bias.data.size()}, {"offset", offset}});
        offset += p.weight.data.size() + p.bias.data.size();
    }
    json shapes = json::array();
    for (const auto& s : model.shapes()) shapes.push_back({s.c, s.h, s.w});
    const auto& in = model.input_shape();
    const json header = {{"input", {in.c, in.h, in.w}},
                         {"layers", architecture_to_json(model.layers())},
                         {"shapes", shapes},
                         {"params", params},
                         {"parameter_count", offset},
                         {"encoding", "f64le"}};
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kModelFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params()) {
        put_f64(out, p.weight.data);
        put_f64(out, p.bias.data);
    }
    if (!out) throw DataError("failed writing " + path.string());
}

Model load_model(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + " is not a model file");
    const std::uint32_t version = get_u32(in);
    if (version != kModelFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }
    const std::uint32_t len = get_u32(in);
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw DataError("truncated model header");
    try {
        const json header = json::parse(text);
        const auto& is = header.at("input");
        Model model(architecture_from_json(header.at("layers")), {is[0].get<int>(), is[1].get<int>(), is[2].get<int>()});
        std::uint64_t expected = header.at("parameter_count").get<std::uint64_t>();
        if (expected != model.parameter_count()) throw DataError("model header parameter count mismatch");
        for (auto& p : model.params()) {
            get_f64(in, p.weight.data);
            get_f64(in, p.bias.data);
        }
        char extra;
        if (in.read(&extra, 1)) throw DataError("trailing bytes in model file");
        model.touch();
        return model;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model header: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("invalid model architecture: ") + e.what());
    }
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    std::vector<ManifestEntry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected path,label");
        const std::string p = trim(line.substr(0, comma)), l = trim(line.substr(comma + 1));
        if (line_no == 1 && p == "path" && l == "label") continue;
        out.push_back({p, label_from_string(l)});
    }
    return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "path,label\n";
    for (const auto& e : entries) out << e.path << ',' << to_string(e.label) << '\n';
}

std::vector<LabeledCrop> load_crops(const fs::path& manifest) {
    const fs::path dir = manifest.parent_path();
    std::vector<LabeledCrop> out;
    for (const auto& e : read_manifest(manifest)) {
        fs::path p = e.path;
        if (p.is_relative()) p = dir / p;
        out.push_back({imaging::read_image(p), e.label, e.path});
    }
    return out;
}

void write_loss_trace(const std::vector<double>& trace, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
}

}  // namespace contam::cnn
