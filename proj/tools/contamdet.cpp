#include "contam/cnn_io.hpp"
#include "contam/error.hpp"
#include "contam/eval.hpp"
#include "contam/image_io.hpp"
#include "contam/mtfilter_io.hpp"
#include "contam/pipeline.hpp"
#include "contam/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace contam;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    fs::path spec;
    fs::path out;
    bool crops = false;
    int n_tc = 100;
    int n_fc = 100;
    std::string format = "png";
};

int run_synth(const SynthArgs& a, const Globals& g) {
    if (a.crops) {
        auto spec = a.spec.empty() ? synth::default_crop_spec() : synth::crop_spec_from_json(mtfilter::read_json_file(a.spec));
        if (g.seed) spec.seed = *g.seed;
        const auto crops = synth::generate_crop_dataset(a.n_tc, a.n_fc, spec);
        synth::write_crop_dataset(crops, a.out, a.format);
        mtfilter::write_json_file(synth::dataset_metadata(synth::to_json(spec)), a.out / "metadata.json");
        std::cout << "wrote " << crops.size() << " crops to " << a.out.string() << '\n';
        return kOk;
    }
    synth::DatasetSpec spec;
    spec.scene.contaminants = synth::default_contaminants();
    if (!a.spec.empty()) spec = synth::dataset_spec_from_json(mtfilter::read_json_file(a.spec));
    if (g.seed) spec.seed = *g.seed;
    spec.image_format = a.format;
    const auto files = synth::write_dataset(spec, a.out);
    std::cout << "wrote " << files.size() << " images (" << spec.contaminated << " contaminated) to " << a.out.string()
              << '\n';
    return kOk;
}

// ---- calibrate --------------------------------------------------------------

struct CalibrateArgs {
    fs::path data;
    fs::path out;
    fs::path report;
    bool per_band = false;
};

int run_calibrate(const CalibrateArgs& a, const Globals&) {
    const auto annotated = mtfilter::load_annotated_dir(a.data);
    if (annotated.empty()) throw DataError("no annotated images in " + a.data.string());
    mtfilter::CalibrationSearch search;
    search.per_band = a.per_band;
    const auto rep = mtfilter::calibrate(annotated, search);
    mtfilter::save_profile(rep.profile, a.out);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    json kinds = json::array();
    for (auto k : rep.uncalibratable) kinds.push_back(mtfilter::to_string(k));
    const json summary = {{"images", annotated.size()},
                          {"contaminations_used", rep.contaminations_used},
                          {"recall", rep.recall},
                          {"false_positives", rep.false_positives},
                          {"uncalibratable", kinds},
                          {"warnings", rep.warnings}};
    if (!a.report.empty()) mtfilter::write_json_file(summary, a.report);
    std::cout << "profile written to " << a.out.string() << " (recall " << rep.recall << ", "
              << rep.false_positives << " false positives on the calibration set)\n";
    return kOk;
}

// ---- detect -----------------------------------------------------------------

struct DetectArgs {
    fs::path image;
    fs::path profile;
    fs::path model;
    fs::path out;
    fs::path overlay;
    int crop_size = 120;
    double threshold = 0.5;
    double budget = 5.0;
};

int run_detect(const DetectArgs& a, const Globals&) {
    const auto img = imaging::read_image(a.image);
    const auto profile = mtfilter::load_profile(a.profile);
    pipeline::PipelineConfig cfg;
    cfg.crop_size = a.crop_size;
    cfg.threshold = a.threshold;
    cfg.budget_seconds = a.budget;
    cfg.validate();

    pipeline::ImageReport report;
    report.image = a.image.filename().string();
    if (!a.model.empty()) {
        const auto model = cnn::load_model(a.model);
        report = pipeline::run_pipeline(img, profile, model, cfg, report.image);
    } else {
        const auto t0 = std::chrono::steady_clock::now();
        report.detections = mtfilter::detect(img, profile);
        report.detect_seconds = report.seconds = seconds_since(t0);
        report.over_budget = report.seconds > cfg.budget_seconds;
    }
    const json j = pipeline::to_json(report);
    if (!a.out.empty()) {
        mtfilter::write_json_file(j, a.out);
    } else {
        print_json(j);
    }
    if (!a.overlay.empty()) {
        imaging::RgbImage rgb(img);
        for (const auto& d : report.detections) {
            switch (d.verdict) {
                case mtfilter::Verdict::true_contamination: imaging::draw_circle(rgb, d.centroid, 25, 255, 0, 0); break;
                case mtfilter::Verdict::false_alarm: imaging::draw_circle(rgb, d.centroid, 25, 0, 160, 255); break;
                case mtfilter::Verdict::candidate: imaging::draw_circle(rgb, d.centroid, 25, 255, 200, 0); break;
            }
        }
        imaging::write_png(rgb, a.overlay);
    }
    std::cerr << report.detections.size() << " candidates, " << report.count(mtfilter::Verdict::true_contamination)
              << " classified as contamination; " << report.seconds << " s"
              << (report.over_budget ? " (over the time budget)" : "") << '\n';
    return kOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    fs::path manifest;
    fs::path hyperparams;
    fs::path out;
    fs::path loss;
};

int run_train(const TrainArgs& a, const Globals& g) {
    const auto crops = cnn::load_crops(a.manifest);
    cnn::Hyperparams hp;
    if (!a.hyperparams.empty()) hp = cnn::hyperparams_from_json(mtfilter::read_json_file(a.hyperparams));
    if (g.seed) hp.seed = *g.seed;
    cnn::TrainOptions opt;
    opt.threads = g.threads;
    opt.on_epoch = [](int epoch, double loss) { std::cerr << "epoch " << epoch << "  loss " << loss << '\n'; };
    const auto res = cnn::train(crops, hp, opt);
    cnn::save_model(res.model, a.out);
    if (!a.loss.empty()) cnn::write_loss_trace(res.loss_trace, a.loss);
    std::cout << "model written to " << a.out.string() << " (" << res.model.parameter_count() << " parameters)\n";
    return kOk;
}

// ---- search -----------------------------------------------------------------

struct SearchArgs {
    fs::path manifest;
    fs::path space;
    int trials = 10;
    int folds = 5;
    double test_fraction = 0.2;
    fs::path out_csv;
    fs::path out_json;
    fs::path out_best;
    fs::path out_model;
};

template <class T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

int run_search(const SearchArgs& a, const Globals& g) {
    const auto crops = cnn::load_crops(a.manifest);
    eval::SearchSpace space;
    if (!a.space.empty()) space = eval::search_space_from_json(mtfilter::read_json_file(a.space));
    const std::uint64_t seed = g.seed.value_or(1);
    const auto labels = eval::labels_of(crops);
    const auto split = eval::holdout_split(labels, a.test_fraction, seed);
    const auto train_set = pick(crops, split.train);
    const auto test_set = pick(crops, split.test);

    const auto runner = eval::cnn_fold_runner(g.threads);
    const auto result = eval::random_search(space, a.trials, a.folds, train_set, seed, runner);
    if (!a.out_csv.empty()) eval::write_search_csv(result.table, a.out_csv.string());
    if (!a.out_json.empty()) eval::write_search_json(result, a.out_json.string());
    if (!result.best) {
        std::cerr << "every combination diverged; no best hyper-parameters\n";
        return kInternal;
    }
    const auto& best = result.table[*result.best];
    if (!a.out_best.empty()) mtfilter::write_json_file(cnn::to_json(best.hyperparams), a.out_best);

    // Retrain the winner on the training part only and score it on the held-out test part.
    cnn::TrainOptions opt;
    opt.threads = g.threads;
    const auto final_model = cnn::train(train_set, best.hyperparams, opt).model;
    eval::ConfusionMatrix cm;
    for (const auto& c : test_set) {
        eval::tally(cm, c.label == cnn::Label::tc, cnn::predict(final_model, c.image).label == cnn::Label::tc);
    }
    if (!a.out_model.empty()) cnn::save_model(final_model, a.out_model);
    print_json({{"best_index", best.index},
                {"validation", eval::to_json(best)},
                {"test", eval::metrics_json(cm)},
                {"train_items", train_set.size()},
                {"test_items", test_set.size()}});
    return kOk;
}

// ---- evaluate / pipeline ----------------------------------------------------

struct EvaluateArgs {
    fs::path data;
    fs::path manifest;
    fs::path profile;
    fs::path model;
    fs::path out;
    fs::path out_csv;
    double threshold = 0.5;
};

void write_metrics_csv(const std::vector<std::pair<std::string, eval::ConfusionMatrix>>& rows, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(10);
    out << "stage,tn,fp,fn,tp,precision,recall,accuracy,f1,f2,fp_rate,fn_rate\n";
    for (const auto& [name, cm] : rows) {
        const auto r = eval::make_row(cm);
        out << name << ',' << cm.tn << ',' << cm.fp << ',' << cm.fn << ',' << cm.tp << ',' << r.precision << ','
            << r.recall << ',' << r.accuracy << ',' << r.f1 << ',' << r.f2 << ',' << eval::fp_rate(cm).value << ','
            << eval::fn_rate(cm).value << '\n';
    }
}

int run_evaluate(const EvaluateArgs& a, const Globals& g) {
    const auto model = cnn::load_model(a.model);
    json result;
    std::vector<std::pair<std::string, eval::ConfusionMatrix>> rows;
    if (!a.manifest.empty()) {
        eval::ConfusionMatrix cm;
        for (const auto& c : cnn::load_crops(a.manifest)) {
            const double p = cnn::predict_probability(model, cnn::to_tensor(c.image));
            eval::tally(cm, c.label == cnn::Label::tc, p >= a.threshold);
        }
        result = eval::metrics_json(cm);
        rows.push_back({"classifier", cm});
    } else {
        if (a.data.empty() || a.profile.empty()) throw UsageError("evaluate needs --manifest, or --data with --profile");
        const auto profile = mtfilter::load_profile(a.profile);
        pipeline::PipelineConfig cfg;
        cfg.threshold = a.threshold;
        const auto files = pipeline::annotation_files(a.data);
        const auto ev = pipeline::evaluate_pipeline(files, profile, model, cfg, g.threads);
        result = pipeline::to_json(ev);
        rows.push_back({"filter", ev.filter_cm});
        rows.push_back({"pipeline", ev.pipeline_cm});
    }
    if (!a.out.empty()) {
        mtfilter::write_json_file(result, a.out);
    } else {
        print_json(result);
    }
    if (!a.out_csv.empty()) write_metrics_csv(rows, a.out_csv);
    return kOk;
}

struct PipelineArgs {
    fs::path data;
    fs::path profile;
    fs::path model;
    fs::path out;
    int crop_size = 120;
    double threshold = 0.5;
    double budget = 5.0;
};

int run_pipeline_cmd(const PipelineArgs& a, const Globals& g) {
    pipeline::PipelineConfig cfg;
    cfg.profile_path = a.profile;
    cfg.model_path = a.model;
    cfg.crop_size = a.crop_size;
    cfg.threshold = a.threshold;
    cfg.budget_seconds = a.budget;
    cfg.report_path = a.out;
    cfg.validate();
    const auto profile = mtfilter::load_profile(cfg.profile_path);
    const auto model = cnn::load_model(cfg.model_path);
    const auto files = pipeline::annotation_files(a.data);
    const auto ev = pipeline::evaluate_pipeline(files, profile, model, cfg, g.threads);

    fs::create_directories(a.out);
    json timing = json::array();
    for (std::size_t i = 0; i < ev.reports.size(); ++i) {
        const auto& r = ev.reports[i];
        const std::string stem = files[i].stem().string();
        mtfilter::write_json_file(pipeline::to_json(r, false), a.out / (stem + ".report.json"));
        timing.push_back({{"image", r.image},
                          {"seconds", r.seconds},
                          {"detect_seconds", r.detect_seconds},
                          {"classify_seconds", r.classify_seconds},
                          {"over_budget", r.over_budget}});
        if (r.over_budget) std::cerr << "warning: " << r.image << " took " << r.seconds << " s\n";
    }
    mtfilter::write_json_file(pipeline::to_json(ev, false), a.out / "summary.json");
    mtfilter::write_json_file({{"budget_seconds", cfg.budget_seconds},
                               {"mean_seconds", ev.mean_seconds},
                               {"max_seconds", ev.max_seconds},
                               {"over_budget", ev.over_budget},
                               {"images", timing}},
                              a.out / "timing.json");
    std::cout << "images " << ev.reports.size() << "\n"
              << "filter:   FN rate " << eval::fn_rate(ev.filter_cm).value << "  FP rate "
              << eval::fp_rate(ev.filter_cm).value << "\n"
              << "pipeline: FN rate " << eval::fn_rate(ev.pipeline_cm).value << "  FP rate "
              << eval::fp_rate(ev.pipeline_cm).value << "\n"
              << "mean time " << ev.mean_seconds << " s, max " << ev.max_seconds << " s\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contamdet: contamination detection in X-ray images of garments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML file with option values");

    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed overriding the one in spec/hyper-parameter files");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset (or a crop dataset with --crops)");
    synth_cmd->add_option("--spec", sa.spec, "Dataset (or crop) spec JSON")->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", sa.out, "Output directory")->required();
    synth_cmd->add_flag("--crops", sa.crops, "Generate labelled 120x120 crops instead of full images");
    synth_cmd->add_option("--tc", sa.n_tc, "Number of TC crops")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--fc", sa.n_fc, "Number of FC crops")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--format", sa.format, "png or pgm")->check(CLI::IsMember({"png", "pgm"}));

    CalibrateArgs ca;
    auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate the MT-Filter on an annotated directory");
    cal_cmd->add_option("--data", ca.data, "Directory of images and annotation JSON")->required();
    cal_cmd->add_option("--out", ca.out, "Profile JSON to write")->required();
    cal_cmd->add_option("--report", ca.report, "Calibration summary JSON");
    cal_cmd->add_flag("--per-band", ca.per_band, "Keep per-kind shape intervals instead of global ones");

    DetectArgs da;
    auto* det_cmd = app.add_subcommand("detect", "Run the filter (and the classifier with --model) on one image");
    det_cmd->add_option("--image", da.image, "Input image")->required();
    det_cmd->add_option("--profile", da.profile, "Calibration profile")->required();
    det_cmd->add_option("--model", da.model, "Classifier model; without it detections stay candidates");
    det_cmd->add_option("--out", da.out, "Report JSON (stdout if omitted)");
    det_cmd->add_option("--overlay", da.overlay, "PNG with circled detections");
    det_cmd->add_option("--crop-size", da.crop_size);
    det_cmd->add_option("--threshold", da.threshold);
    det_cmd->add_option("--budget", da.budget, "Time budget in seconds");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train the classifier on a crop manifest");
    train_cmd->add_option("--manifest", ta.manifest, "manifest.csv with path,label rows")->required();
    train_cmd->add_option("--hyperparams", ta.hyperparams, "Hyper-parameter JSON");
    train_cmd->add_option("--out", ta.out, "Model file to write")->required();
    train_cmd->add_option("--loss", ta.loss, "Loss trace CSV");

    SearchArgs ra;
    auto* search_cmd = app.add_subcommand("search", "Random hyper-parameter search with K-fold cross-validation");
    search_cmd->add_option("--manifest", ra.manifest, "Crop manifest")->required();
    search_cmd->add_option("--space", ra.space, "Search ranges JSON");
    search_cmd->add_option("--trials", ra.trials, "Number of sampled combinations")->check(CLI::PositiveNumber);
    search_cmd->add_option("--folds", ra.folds, "K")->check(CLI::Range(2, 100));
    search_cmd->add_option("--test-fraction", ra.test_fraction, "Held-out test fraction");
    search_cmd->add_option("--out-csv", ra.out_csv, "Search table CSV");
    search_cmd->add_option("--out-json", ra.out_json, "Search table JSON");
    search_cmd->add_option("--out-best", ra.out_best, "Best hyper-parameters JSON");
    search_cmd->add_option("--out-model", ra.out_model, "Model retrained with the best hyper-parameters");

    EvaluateArgs ea;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on crops, or the full pipeline on a dataset");
    eval_cmd->add_option("--model", ea.model, "Classifier model")->required();
    eval_cmd->add_option("--manifest", ea.manifest, "Crop manifest (classifier-only evaluation)");
    eval_cmd->add_option("--data", ea.data, "Annotated image directory (pipeline evaluation)");
    eval_cmd->add_option("--profile", ea.profile, "Calibration profile");
    eval_cmd->add_option("--out", ea.out, "Metrics JSON (stdout if omitted)");
    eval_cmd->add_option("--out-csv", ea.out_csv, "Metrics CSV");
    eval_cmd->add_option("--threshold", ea.threshold);

    PipelineArgs pa;
    auto* pipe_cmd = app.add_subcommand("pipeline", "Batch run over an annotated directory");
    pipe_cmd->add_option("--data", pa.data, "Annotated image directory")->required();
    pipe_cmd->add_option("--profile", pa.profile, "Calibration profile")->required();
    pipe_cmd->add_option("--model", pa.model, "Classifier model")->required();
    pipe_cmd->add_option("--out", pa.out, "Report directory")->required();
    pipe_cmd->add_option("--crop-size", pa.crop_size);
    pipe_cmd->add_option("--threshold", pa.threshold);
    pipe_cmd->add_option("--budget", pa.budget, "Per-image time budget in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        if (*synth_cmd) return run_synth(sa, g);
        if (*cal_cmd) return run_calibrate(ca, g);
        if (*det_cmd) return run_detect(da, g);
        if (*train_cmd) return run_train(ta, g);
        if (*search_cmd) return run_search(ra, g);
        if (*eval_cmd) return run_evaluate(ea, g);
        if (*pipe_cmd) return run_pipeline_cmd(pa, g);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
