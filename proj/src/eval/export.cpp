#include "contam/eval.hpp"

#include "contam/cnn_io.hpp"
#include "contam/error.hpp"

#include <fstream>
#include <sstream>

namespace contam::eval {

using nlohmann::json;

json to_json(const ConfusionMatrix& cm) {
    return {{"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}};
}

json metrics_json(const ConfusionMatrix& cm) {
    const auto row = make_row(cm);
    return {{"confusion_matrix", to_json(cm)},
            {"f2", row.f2},
            {"f1", row.f1},
            {"accuracy", row.accuracy},
            {"precision", row.precision},
            {"recall", row.recall},
            {"fp_rate", fp_rate(cm).value},
            {"fn_rate", fn_rate(cm).value},
            {"degenerate", row.degenerate}};
}

json to_json(const MetricsRow& row) {
    json j = {{"index", row.index},
              {"hyperparams", cnn::to_json(row.hyperparams)},
              {"diverged", row.diverged},
              {"degenerate", row.degenerate}};
    if (!row.diverged) {
        j["f2"] = row.f2;
        j["f1"] = row.f1;
        j["accuracy"] = row.accuracy;
        j["precision"] = row.precision;
        j["recall"] = row.recall;
        j["confusion_matrix"] = to_json(row.cm);
    }
    if (!row.note.empty()) j["note"] = row.note;
    return j;
}

std::string architecture_label(const std::vector<cnn::LayerSpec>& layers) {
    std::string s;
    for (const auto& l : layers) {
        if (!s.empty()) s += '-';
        switch (l.kind) {
            case cnn::LayerKind::conv: s += "conv" + std::to_string(l.units) + "k" + std::to_string(l.size); break;
            case cnn::LayerKind::maxpool: s += "pool" + std::to_string(l.size); break;
            case cnn::LayerKind::dense: s += "dense" + std::to_string(l.units); break;
            case cnn::LayerKind::dropout: {
                std::ostringstream r;
                r << "drop" << l.rate;
                s += r.str();
                break;
            }
            default: s += cnn::to_string(l.kind); break;
        }
    }
    return s;
}

void write_search_csv(std::span<const MetricsRow> table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out.precision(17);
    out << "index,architecture,alpha,mu,batch_size,epochs,w_fc,w_tc,augmentation_copies,seed,"
           "f2,f1,accuracy,precision,recall,tn,fp,fn,tp,degenerate,diverged\n";
    for (const auto& r : table) {
        const auto& hp = r.hyperparams;
        out << r.index << ',' << architecture_label(hp.architecture) << ',' << hp.alpha << ',' << hp.mu << ','
            << hp.batch_size << ',' << hp.epochs << ',' << hp.class_weights.fc << ',' << hp.class_weights.tc << ','
            << hp.augmentation.copies << ',' << hp.seed << ',';
        if (r.diverged) {
            out << ",,,,,,,,," << r.degenerate << ",1\n";
            continue;
        }
        out << r.f2 << ',' << r.f1 << ',' << r.accuracy << ',' << r.precision << ',' << r.recall << ',' << r.cm.tn << ','
            << r.cm.fp << ',' << r.cm.fn << ',' << r.cm.tp << ',' << r.degenerate << ",0\n";
    }
}

void write_search_json(const SearchResult& result, const std::string& path) {
    json rows = json::array();
    for (const auto& r : result.table) rows.push_back(to_json(r));
    json j = {{"rows", rows}, {"best", result.best ? json(*result.best) : json(nullptr)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

SearchSpace search_space_from_json(const json& j) {
    SearchSpace s;
    try {
        auto ints = [&](const char* key, std::vector<int>& v) {
            if (j.contains(key)) v = j.at(key).get<std::vector<int>>();
        };
        ints("conv_layers", s.conv_layers);
        ints("pool_layers", s.pool_layers);
        ints("filters", s.filters);
        ints("kernels", s.kernels);
        ints("pool_windows", s.pool_windows);
        ints("dense_layers", s.dense_layers);
        ints("dense_units", s.dense_units);
        ints("batch_sizes", s.batch_sizes);
        ints("epochs", s.epochs);
        ints("augmentation_copies", s.augmentation_copies);
        if (j.contains("dropout")) s.dropout = j.at("dropout").get<std::vector<double>>();
        if (j.contains("alpha")) {
            s.alpha_min = j.at("alpha").at(0).get<double>();
            s.alpha_max = j.at("alpha").at(1).get<double>();
        }
        if (j.contains("mu")) {
            s.mu_min = j.at("mu").at(0).get<double>();
            s.mu_max = j.at("mu").at(1).get<double>();
        }
        if (j.contains("class_weights")) {
            s.class_weights.clear();
            for (const auto& w : j.at("class_weights")) s.class_weights.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
        }
        if (j.contains("augmentation_ranges")) {
            const auto& a = j.at("augmentation_ranges");
            auto& r = s.augmentation_ranges;
            r.max_rotation_deg = a.value("max_rotation_deg", r.max_rotation_deg);
            r.max_shift = a.value("max_shift", r.max_shift);
            r.zoom_min = a.value("zoom_min", r.zoom_min);
            r.zoom_max = a.value("zoom_max", r.zoom_max);
        }
        s.train_seed = j.value("train_seed", s.train_seed);
        s.input_size = j.value("input_size", s.input_size);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed search space: ") + e.what());
    }
    s.validate();
    return s;
}

json to_json(const SearchSpace& s) {
    json weights = json::array();
    for (const auto& w : s.class_weights) weights.push_back({w.fc, w.tc});
    return {{"conv_layers", s.conv_layers},
            {"pool_layers", s.pool_layers},
            {"filters", s.filters},
            {"kernels", s.kernels},
            {"pool_windows", s.pool_windows},
            {"dense_layers", s.dense_layers},
            {"dense_units", s.dense_units},
            {"dropout", s.dropout},
            {"alpha", {s.alpha_min, s.alpha_max}},
            {"mu", {s.mu_min, s.mu_max}},
            {"batch_sizes", s.batch_sizes},
            {"epochs", s.epochs},
            {"class_weights", weights},
            {"augmentation_copies", s.augmentation_copies},
            {"train_seed", s.train_seed},
            {"input_size", s.input_size}};
}

}  // namespace contam::eval
