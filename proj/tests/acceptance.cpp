// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance --cli <contamdet> --configs <repo>/configs --work <scratch dir> [--only 1,2,6]

#include "contam/cnn_io.hpp"
#include "contam/eval.hpp"
#include "contam/image_io.hpp"
#include "contam/imaging.hpp"
#include "contam/mtfilter_io.hpp"
#include "contam/synth.hpp"
#include "support/gradcheck.hpp"
#include "support/imaging_oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace contam;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path cli;
    fs::path configs;
    fs::path work;
    int log_counter = 0;
};

// Runs the CLI with output captured in a numbered log; returns the exit code.
int run_cli(Context& ctx, const std::vector<std::string>& args, const std::string& tag) {
    fs::create_directories(ctx.work / "logs");
    std::ostringstream name;
    name << std::setw(2) << std::setfill('0') << ++ctx.log_counter << "_" << tag << ".log";
    const fs::path log = ctx.work / "logs" / name.str();
    std::string cmd = "'" + ctx.cli.string() + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

void require_cli(Context& ctx, const std::vector<std::string>& args, const std::string& tag) {
    const int code = run_cli(ctx, args, tag);
    if (code != 0) {
        throw std::runtime_error("contamdet " + args.front() + " (" + tag + ") exited with " + std::to_string(code) +
                                 "; see " + (ctx.work / "logs").string());
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> contents, for every regular file below `dir` except the excluded names.
std::map<std::string, std::string> snapshot(const fs::path& dir, const std::set<std::string>& exclude = {}) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || exclude.contains(e.path().filename().string())) continue;
        out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

std::string compare(const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
    if (a.size() != b.size()) return "file count " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end()) return name + " missing in second run";
        if (it->second != bytes) return name + " differs";
    }
    return "";
}

// ---- 1-3: metric oracles ------------------------------------------------------

bool near(double got, double want, double tol = 5e-4) {
    return std::abs(got - want) <= tol;
}

Outcome criterion1(Context&) {
    const eval::ConfusionMatrix cm{864, 163, 26, 972};
    const auto t0 = Clock::now();
    const auto row = eval::make_row(cm);
    const double ms = since(t0) * 1e3;
    const bool ok = near(row.precision, 0.856) && near(row.recall, 0.974) && near(row.accuracy, 0.907) &&
                    near(row.f1, 0.911) && near(row.f2, 0.948) && ms < 1.0;
    return {ok, "P " + fmt(row.precision) + " R " + fmt(row.recall) + " acc " + fmt(row.accuracy) + " F1 " +
                    fmt(row.f1) + " F2 " + fmt(row.f2) + " in " + fmt(ms, 3) + " ms"};
}

Outcome criterion2(Context&) {
    struct Row {
        const char* weights;
        eval::ConfusionMatrix cm;
        double f2, f1, acc, p, r;
    };
    const Row rows[] = {
        {"(1,1)", {740.6, 81, 36, 762}, 0.944, 0.929, 0.928, 0.904, 0.955},
        {"(1,2)", {687.4, 134.2, 15.4, 782.6}, 0.952, 0.913, 0.908, 0.854, 0.981},
        {"(1,5)", {638.4, 183.2, 7, 791}, 0.949, 0.893, 0.883, 0.812, 0.991},
        {"(1,10)", {593.8, 227.8, 6.4, 791.6}, 0.940, 0.871, 0.855, 0.777, 0.992},
    };
    bool ok = true;
    std::string detail;
    for (const auto& r : rows) {
        const auto m = eval::make_row(r.cm);
        const bool row_ok = near(m.f2, r.f2) && near(m.f1, r.f1) && near(m.accuracy, r.acc) &&
                            near(m.precision, r.p) && near(m.recall, r.r);
        ok = ok && row_ok;
        detail += std::string(detail.empty() ? "" : "; ") + r.weights + " F2 " + fmt(m.f2, 3) +
                  (row_ok ? "" : " (mismatch)");
    }
    return {ok, detail};
}

Outcome criterion3(Context&) {
    const eval::ConfusionMatrix a{9288, 1607, 3, 110};
    const eval::ConfusionMatrix b{4507, 6388, 2, 111};
    const double fp_a = eval::fp_rate(a), fn_a = eval::fn_rate(a);
    const double fp_b = eval::fp_rate(b), fn_b = eval::fn_rate(b);
    const bool ok = fp_a < 0.15 && near(fp_a, 0.1475) && fn_a < 0.03 && near(fn_a, 0.0265) && near(fn_b, 0.0177) &&
                    near(fp_b, 0.5863);
    return {ok, "FP " + fmt(100 * fp_a, 2) + "% FN " + fmt(100 * fn_a, 2) + "%; FN " + fmt(100 * fn_b, 2) + "% FP " +
                    fmt(100 * fp_b, 2) + "%"};
}

// ---- 4: gradients -------------------------------------------------------------

Outcome criterion4(Context&) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(4);
    double worst = 0.0;
    int configs = 0, unchecked = 0;
    std::set<cnn::LayerKind> kinds;
    for (; configs < 120; ++configs) {
        const auto cfg = testing::random_grad_config(rng);
        cnn::Model m(cfg.layers, cfg.input);
        const auto x = testing::randomize(m, rng);
        const auto r = testing::check_gradients(m, x, rng(), configs % 2 == 0);
        worst = std::max(worst, r.max_rel_error);
        kinds.insert(r.kinds.begin(), r.kinds.end());
        if (r.checked == 0) ++unchecked;
    }
    const double secs = since(t0);
    const bool ok = worst <= 1e-4 && unchecked == 0 && kinds.size() == 6 && secs <= 60.0;
    return {ok, std::to_string(configs) + " configurations, " + std::to_string(kinds.size()) +
                    " layer kinds, max relative error " + fmt(worst * 1e6, 3) + "e-6, " + fmt(secs, 1) + " s"};
}

// ---- 5: imaging properties ----------------------------------------------------

Outcome criterion5(Context&) {
    using namespace imaging;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(5);
    int nesting_bad = 0, duality_bad = 0, idempotence_bad = 0, blob_bad = 0, blobs = 0;

    for (int trial = 0; trial < 50; ++trial) {
        const auto img = testing::random_gray(rng, 64, 48);
        BinaryImage prev = binarize(img, 0.0);
        for (int k = 1; k <= 24; ++k) {
            const auto cur = binarize(img, k * 255.0 / 24.0);
            if (!testing::subset(prev, cur)) ++nesting_bad;
            prev = cur;
        }
    }
    for (int trial = 0; trial < 50; ++trial) {
        for (int radius = 1; radius <= 3; ++radius) {
            for (auto shape : {SeShape::disk, SeShape::square}) {
                const StructuringElement se{shape, radius};
                const auto bin = testing::random_binary(rng, 48, 40, 0.2 + 0.012 * trial);
                const auto lhs = erode(bin, se);
                const auto rhs = complement(dilate(complement(bin), se));
                for (int r = radius; r < bin.height - radius; ++r)
                    for (int c = radius; c < bin.width - radius; ++c)
                        if (lhs.at(r, c) != rhs.at(r, c)) ++duality_bad;

                const auto framed = testing::random_binary(rng, 48, 40, 0.2 + 0.012 * trial, 2 * radius + 1);
                const auto closed = closing(framed, se);
                const auto opened = opening(framed, se);
                if (closing(closed, se) != closed || opening(opened, se) != opened) ++idempotence_bad;
            }
        }
    }
    std::uniform_real_distribution<double> density(0.25, 0.55);
    while (blobs < 2000) {
        const auto bin = testing::random_binary(rng, 24, 24, density(rng));
        for (const auto& b : connected_components(bin)) {
            if (b.area > 64) continue;
            const auto o = testing::oracle_stats(b.pixels);
            const bool ok = b.area == static_cast<int>(o.area) && std::abs(b.centroid.row - o.cr) <= 1e-9 &&
                            std::abs(b.centroid.col - o.cc) <= 1e-9 && std::abs(b.major_axis_len - o.major) <= 1e-9 &&
                            std::abs(b.minor_axis_len - o.minor) <= 1e-9 &&
                            std::abs(b.solidity - o.solidity) <= 1e-12;
            if (!ok) ++blob_bad;
            ++blobs;
        }
    }
    const double secs = since(t0);
    const bool ok = nesting_bad == 0 && duality_bad == 0 && idempotence_bad == 0 && blob_bad == 0 && secs <= 60.0;
    return {ok, "nesting violations " + std::to_string(nesting_bad) + ", duality " + std::to_string(duality_bad) +
                    ", idempotence " + std::to_string(idempotence_bad) + ", blob mismatches " +
                    std::to_string(blob_bad) + "/" + std::to_string(blobs) + ", " + fmt(secs, 1) + " s"};
}

// ---- 6: synthetic benchmark ---------------------------------------------------

constexpr int kBenchmarkCropsPerClass = 1500;

Outcome criterion6(Context& ctx) {
    const auto t0 = Clock::now();
    const fs::path dir = ctx.work / "benchmark";
    fs::remove_all(dir);
    const fs::path cfg = ctx.configs / "benchmark";
    require_cli(ctx, {"synth", "--spec", (cfg / "calibration.json").string(), "--out", (dir / "calibration").string()},
                "synth_calibration");
    require_cli(ctx, {"synth", "--spec", (cfg / "test.json").string(), "--out", (dir / "test").string()}, "synth_test");
    require_cli(ctx, {"calibrate", "--data", (dir / "calibration").string(), "--out", (dir / "profile.json").string(),
                      "--report", (dir / "calibration_report.json").string()},
                "calibrate");
    const auto n = std::to_string(kBenchmarkCropsPerClass);
    require_cli(ctx, {"synth", "--crops", "--spec", (cfg / "crops.json").string(), "--tc", n, "--fc", n, "--out",
                      (dir / "crops").string()},
                "synth_crops");
    require_cli(ctx, {"train", "--manifest", (dir / "crops" / "manifest.csv").string(), "--hyperparams",
                      (cfg / "hyperparams.json").string(), "--out", (dir / "model.bin").string(), "--loss",
                      (dir / "loss.csv").string()},
                "train");
    require_cli(ctx, {"pipeline", "--data", (dir / "test").string(), "--profile", (dir / "profile.json").string(),
                      "--model", (dir / "model.bin").string(), "--out", (dir / "reports").string()},
                "pipeline");
    const double secs = since(t0);

    const auto summary = mtfilter::read_json_file(dir / "reports" / "summary.json");
    const auto& f = summary.at("filter");
    const auto& p = summary.at("pipeline");
    const double f_fn = f.at("fn_rate"), f_fp = f.at("fp_rate"), p_fn = p.at("fn_rate"), p_fp = p.at("fp_rate");
    const double f_fp_count = f.at("confusion_matrix").at("fp"), p_fp_count = p.at("confusion_matrix").at("fp");
    const bool ok = summary.at("images") == 200 && f_fn <= 0.02 && p_fn <= 0.03 && p_fp <= 0.15 &&
                    p_fp_count <= f_fp_count && secs <= 1800.0;
    return {ok, "filter FN " + fmt(100 * f_fn, 1) + "% FP " + fmt(100 * f_fp, 1) + "%; pipeline FN " +
                    fmt(100 * p_fn, 1) + "% FP " + fmt(100 * p_fp, 1) + "% (" + fmt(p_fp_count, 0) + " <= " +
                    fmt(f_fp_count, 0) + " false-positive images); " + fmt(secs / 60.0, 1) + " min"};
}

// ---- 7: class-weight trend ----------------------------------------------------

constexpr int kSweepCropsPerClass = 250;

Outcome criterion7(Context& ctx) {
    const auto t0 = Clock::now();
    const auto spec = synth::crop_spec_from_json(mtfilter::read_json_file(ctx.configs / "benchmark" / "sweep_crops.json"));
    auto hp = cnn::hyperparams_from_json(mtfilter::read_json_file(ctx.configs / "benchmark" / "sweep_hyperparams.json"));
    const auto crops = synth::generate_crop_dataset(kSweepCropsPerClass, kSweepCropsPerClass, spec);
    const auto runner = eval::cnn_fold_runner(1);
    std::vector<double> recall, precision;
    std::string detail;
    for (const cnn::ClassWeights w : {cnn::ClassWeights{1, 1}, {1, 2}, {1, 5}, {1, 10}}) {
        hp.class_weights = w;
        const auto cv = eval::cross_validate(crops, hp, 5, 3, runner);
        if (cv.diverged) return {false, "training diverged at weights (1, " + fmt(w.tc, 0) + "): " + cv.note};
        recall.push_back(eval::recall(cv.mean));
        precision.push_back(eval::precision(cv.mean));
        detail += std::string(detail.empty() ? "" : "; ") + "(1," + fmt(w.tc, 0) + ") R " + fmt(recall.back(), 3) +
                  " P " + fmt(precision.back(), 3);
    }
    bool ok = true;
    for (std::size_t i = 1; i < recall.size(); ++i) {
        ok = ok && recall[i] >= recall[i - 1] && precision[i] <= precision[i - 1];
    }
    return {ok, detail + "; " + fmt(since(t0), 0) + " s"};
}

// ---- 8: determinism -----------------------------------------------------------

Outcome criterion8(Context& ctx) {
    const fs::path dir = ctx.work / "determinism";
    fs::remove_all(dir);
    const fs::path cfg = ctx.configs / "smoke";
    std::string detail;
    bool ok = true;
    auto check = [&](const std::string& what, const fs::path& a, const fs::path& b,
                     const std::set<std::string>& exclude = {}) {
        const auto diff = compare(snapshot(a, exclude), snapshot(b, exclude));
        detail += std::string(detail.empty() ? "" : ", ") + what + (diff.empty() ? " identical" : " DIFFER (" + diff + ")");
        ok = ok && diff.empty();
    };
    for (const char* run : {"a", "b"}) {
        const fs::path d = dir / run;
        require_cli(ctx, {"synth", "--spec", (cfg / "dataset.json").string(), "--out", (d / "data").string()},
                    std::string("synth_") + run);
        require_cli(ctx, {"synth", "--crops", "--spec", (cfg / "crops.json").string(), "--tc", "24", "--fc", "24",
                          "--out", (d / "crops").string()},
                    std::string("crops_") + run);
        fs::create_directories(d / "calibration");
        require_cli(ctx, {"calibrate", "--data", (d / "data").string(), "--out", (d / "calibration" / "profile.json").string(),
                          "--report", (d / "calibration" / "report.json").string()},
                    std::string("calibrate_") + run);
        fs::create_directories(d / "model");
        require_cli(ctx, {"train", "--manifest", (d / "crops" / "manifest.csv").string(), "--hyperparams",
                          (cfg / "hyperparams.json").string(), "--out", (d / "model" / "model.bin").string(), "--loss",
                          (d / "model" / "loss.csv").string()},
                    std::string("train_") + run);
        require_cli(ctx, {"pipeline", "--data", (d / "data").string(), "--profile",
                          (d / "calibration" / "profile.json").string(), "--model", (d / "model" / "model.bin").string(),
                          "--out", (d / "reports").string()},
                    std::string("pipeline_") + run);
    }
    check("synth", dir / "a" / "data", dir / "b" / "data");
    check("crops", dir / "a" / "crops", dir / "b" / "crops");
    check("calibrate", dir / "a" / "calibration", dir / "b" / "calibration");
    check("train", dir / "a" / "model", dir / "b" / "model");
    check("pipeline", dir / "a" / "reports", dir / "b" / "reports", {"timing.json"});
    return {ok, detail};
}

// ---- 9: latency ---------------------------------------------------------------

Outcome criterion9(Context& ctx) {
    const fs::path bench = ctx.work / "benchmark";
    const fs::path image = bench / "test" / "img_0000.png";
    if (!fs::exists(bench / "model.bin") || !fs::exists(bench / "profile.json") || !fs::exists(image)) {
        return {false, "needs the artefacts of criterion 6 in " + bench.string()};
    }
    const fs::path out = ctx.work / "latency.json";
    const auto t0 = Clock::now();
    require_cli(ctx, {"detect", "--image", image.string(), "--profile", (bench / "profile.json").string(), "--model",
                      (bench / "model.bin").string(), "--out", out.string()},
                "detect");
    const double wall = since(t0);
    const auto report = mtfilter::read_json_file(out);
    const double secs = report.at("timing").at("seconds");
    const auto img = imaging::read_image(image);
    const bool ok = img.width == 4080 && img.height == 1664 && secs <= 5.0;
    return {ok, "detect + classify " + fmt(secs, 3) + " s (" + fmt(wall, 3) + " s including process start and I/O), " +
                    std::to_string(report.at("summary").at("candidates").get<int>()) + " candidates"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run for contamdet"};
    Context ctx;
    std::vector<int> only;
    app.add_option("--cli", ctx.cli, "contamdet executable")->required()->check(CLI::ExistingFile);
    app.add_option("--configs", ctx.configs, "Directory of committed benchmark configs")->required()->check(CLI::ExistingDirectory);
    app.add_option("--work", ctx.work, "Scratch directory")->required();
    app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    ctx.cli = fs::absolute(ctx.cli);
    fs::create_directories(ctx.work);

    const std::vector<std::function<Outcome(Context&)>> criteria{criterion1, criterion2, criterion3,
                                                                 criterion4, criterion5, criterion6,
                                                                 criterion7, criterion8, criterion9};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i](ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
