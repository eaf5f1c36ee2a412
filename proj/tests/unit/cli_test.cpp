#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "cfield/checkpoint.hpp"
#include "cfield/config_io.hpp"
#include "cfield/dataset.hpp"
#include "cfield/losses.hpp"
#include "cfield/metrics.hpp"
#include "cfield/renderer.hpp"
#include "cfield/trainer.hpp"

using namespace cfield;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cfield");
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// A few-second network and batch, shared by every training invocation.
// Flags already present in `args` are left alone.
std::vector<std::string> tiny(std::vector<std::string> args) {
    const std::vector<std::pair<std::string, std::string>> defaults{
        {"--width", "8"},      {"--layers", "2"},       {"--color-width", "8"}, {"--pos-freqs", "2"},
        {"--dir-freqs", "1"},  {"--samples", "8"},      {"--eval-samples", "8"}, {"--rays", "64"},
        {"--patches", "1"},    {"--patch-size", "4"},   {"--eval-every", "10"},  {"--log-every", "10"},
        {"--threads", "1"}};
    for (const auto& [flag, value] : defaults) {
        if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
        args.push_back(flag);
        args.push_back(value);
    }
    return args;
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = fs::temp_directory_path() / ("cfield_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        data_ = root_ / "data";
        ASSERT_EQ(run_cli({"gen-scene", "--preset", "spheres3", "--res", "16", "--out", data_.string()}).code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }

    static fs::path dir(const std::string& name) { return root_ / name; }

    static inline fs::path root_;
    static inline fs::path data_;
};

double mean_coverage(const fs::path& coverage_json) { return read_json(coverage_json)["mean_coverage"].get<double>(); }

}  // namespace

TEST_F(CliTest, GenSceneWritesDatasetAndSevenFrames) {
    const auto out = dir("gen64");
    const Result r = run_cli({"gen-scene", "--preset", "spheres3", "--train-views", "3", "--test-views", "4", "--res", "64",
                          "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_TRUE(fs::exists(out / "dataset.json"));
    const Dataset ds = load_dataset(out);
    EXPECT_EQ(ds.frames.size(), 7u);
    EXPECT_EQ(ds.split(Split::train).size(), 3u);
    EXPECT_EQ(ds.split(Split::test).size(), 4u);
    EXPECT_EQ(ds.width(), 64);
    const json m = read_json(out / "manifest.json");
    EXPECT_EQ(m["command"], "gen-scene");
    EXPECT_TRUE(m.contains("version"));
    EXPECT_TRUE(m.contains("seed"));
    EXPECT_FALSE(m["artifacts"].empty());
}

TEST_F(CliTest, GenSceneCorruptionKeepsOracleDepthAlongside) {
    const auto out = dir("corrupt");
    ASSERT_EQ(run_cli({"gen-scene", "--res", "16", "--depth-noise", "0.05", "--depth-scale", "2.0", "--seed", "4", "--out",
                   out.string()})
                  .code,
              0);
    const Dataset ds = load_dataset(out);
    for (const auto* f : ds.split(Split::train)) {
        ASSERT_TRUE(f->depth && f->oracle_depth);
        std::vector<double> corrupted, oracle;
        for (int y = 0; y < ds.height(); ++y) {
            for (int x = 0; x < ds.width(); ++x) {
                if (f->depth->valid(x, y) && f->oracle_depth->valid(x, y)) {
                    corrupted.push_back(f->depth->at(x, y));
                    oracle.push_back(f->oracle_depth->at(x, y));
                }
            }
        }
        ASSERT_GT(corrupted.size(), 4u);
        EXPECT_GT(scale_invariant_depth_loss(corrupted, oracle).value, 0.0) << f->name;
    }
}

TEST_F(CliTest, GenSceneIsByteIdenticalOnRerun) {
    const auto a = dir("rerun_a");
    const auto b = dir("rerun_b");
    for (const auto& out : {a, b}) {
        ASSERT_EQ(run_cli({"gen-scene", "--res", "16", "--depth-noise", "0.03", "--seed", "9", "--out", out.string()}).code,
                  0);
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (name == "manifest.json") continue;  // records the differing --out path
        EXPECT_EQ(slurp(e.path()), slurp(b / name)) << name;
        ++compared;
    }
    EXPECT_GT(compared, 7u);
}

TEST_F(CliTest, GenSceneRejectsInvalidFlags) {
    EXPECT_EQ(run_cli({"gen-scene", "--train-views", "0", "--out", dir("bad").string()}).code, 2);
    EXPECT_EQ(run_cli({"gen-scene", "--depth-scale", "-1", "--out", dir("bad").string()}).code, 2);
    EXPECT_EQ(run_cli({"gen-scene", "--preset", "teapot", "--out", dir("bad").string()}).code, 2);
    EXPECT_EQ(run_cli({"gen-scene"}).code, 2);
    EXPECT_FALSE(fs::exists(dir("bad")));
}

TEST_F(CliTest, DeriveMasksCoverageAndDegenerateThreshold) {
    const Result r = run_cli({"derive-masks", "--data", data_.string(), "--alpha", "0.1", "--out", dir("m01").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const double c01 = mean_coverage(dir("m01") / "coverage.json");
    EXPECT_GT(c01, 0.0);
    EXPECT_LE(c01, 1.0);
    const json report = read_json(dir("m01") / "coverage.json");
    for (const auto& f : report["frames"]) {
        EXPECT_TRUE(fs::exists(dir("m01") / (f["name"].get<std::string>() + "_mask.png")));
    }

    ASSERT_EQ(run_cli({"derive-masks", "--data", data_.string(), "--alpha", "0", "--out", dir("m0").string()}).code, 0);
    const double c0 = mean_coverage(dir("m0") / "coverage.json");
    EXPECT_LT(c0, 0.05);
    EXPECT_LT(c0, c01);
}

TEST_F(CliTest, DeriveMasksPortionScalesCounts) {
    ASSERT_EQ(run_cli({"derive-masks", "--data", data_.string(), "--out", dir("p10").string()}).code, 0);
    ASSERT_EQ(run_cli({"derive-masks", "--data", data_.string(), "--portion", "0.3", "--seed", "5", "--out",
                   dir("p03").string()})
                  .code,
              0);
    const json full = read_json(dir("p10") / "coverage.json");
    const json part = read_json(dir("p03") / "coverage.json");
    ASSERT_EQ(full["frames"].size(), part["frames"].size());
    for (std::size_t i = 0; i < full["frames"].size(); ++i) {
        const double n = full["frames"][i]["in_mask"].get<double>();
        EXPECT_EQ(part["frames"][i]["in_mask"].get<double>(), std::round(0.3 * n));
    }
}

TEST_F(CliTest, TrainAllFourModes) {
    for (const std::string mode : {"baseline", "multiview", "singleview", "full"}) {
        const auto out = dir("mode_" + mode);
        const Result r = run_cli(tiny({"train", "--data", data_.string(), "--mode", mode, "--iterations", "10", "--out",
                                   out.string()}));
        ASSERT_EQ(r.code, 0) << mode << ": " << r.err;
        EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
        EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
        const std::string log = slurp(out / "log.csv");
        EXPECT_EQ(log.substr(0, log.find('\n')),
                  "iteration,loss_photo,loss_mask_off,loss_depth,test_psnr,test_ssim,seconds");
        const json m = read_json(out / "manifest.json");
        EXPECT_EQ(m["command"], "train");
        EXPECT_EQ(m["config"]["mode"], to_string(parse_train_mode(mode)));
    }
}

TEST_F(CliTest, ZeroIterationsCheckpointEqualsInitialization) {
    const auto out = dir("init");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--iterations", "0", "--seed", "17", "--out", out.string()}))
                  .code,
              0);
    const Checkpoint ck = load_checkpoint(out / "checkpoint");
    const json m = read_json(out / "manifest.json");
    const FieldConfig fc = field_config_from_json(m["config"]["field"].dump(), FieldConfig{});
    const Eigen::VectorXd init = init_params(fc, 17).flatten();
    const Eigen::VectorXd saved = ck.params.flatten();
    ASSERT_EQ(init.size(), saved.size());
    for (Eigen::Index i = 0; i < init.size(); ++i) {
        ASSERT_EQ(saved[i], static_cast<double>(static_cast<float>(init[i]))) << i;
    }
}

TEST_F(CliTest, SeedSweepWritesPerSeedRunsAndMedian) {
    const auto out = dir("sweep");
    const Result r = run_cli(tiny({"train", "--data", data_.string(), "--mode", "full", "--seed", "1..3", "--iterations",
                               "10", "--out", out.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<double> finals;
    for (int k = 1; k <= 3; ++k) {
        const auto run = out / ("seed_" + std::to_string(k));
        ASSERT_TRUE(fs::exists(run / "log.csv"));
        EXPECT_EQ(read_json(run / "manifest.json")["seed"], k);
        // Last non-empty test_psnr cell of the log.
        std::istringstream log(slurp(run / "log.csv"));
        std::string line, last;
        std::getline(log, line);
        while (std::getline(log, line)) {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
            if (cells.size() > 4 && !cells[4].empty()) last = cells[4];
        }
        finals.push_back(std::stod(last));
    }
    std::sort(finals.begin(), finals.end());
    std::istringstream summary(slurp(out / "summary.csv"));
    std::string line, median_line;
    while (std::getline(summary, line)) {
        if (line.rfind("median,", 0) == 0) median_line = line;
    }
    ASSERT_FALSE(median_line.empty());
    const double reported = std::stod(median_line.substr(7, median_line.find(',', 7) - 7));
    EXPECT_NEAR(reported, finals[1], 1e-8);
    EXPECT_EQ(read_json(out / "manifest.json")["command"], "train");
}

TEST_F(CliTest, EveryOutputDirectoryHasOneManifest) {
    const auto out = dir("manifests");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--seed", "0..1", "--iterations", "2", "--out",
                        out.string()}))
                  .code,
              0);
    std::vector<fs::path> dirs{out};
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    EXPECT_EQ(dirs.size(), 3u);
    for (const auto& d : dirs) EXPECT_TRUE(fs::exists(d / "manifest.json")) << d;
}

TEST_F(CliTest, ConfigFileIsOverriddenByExplicitFlags) {
    const auto cfg = dir("override.json");
    std::ofstream(cfg) << R"({"iterations": 7, "learning_rate": 0.003, "mode": "singleview"})";
    const auto out = dir("override");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--config", cfg.string(), "--iterations", "3", "--out",
                        out.string()}))
                  .code,
              0);
    const json c = read_json(out / "manifest.json")["config"];
    EXPECT_EQ(c["iterations"], 3);
    EXPECT_DOUBLE_EQ(c["learning_rate"].get<double>(), 0.003);
    EXPECT_EQ(c["mode"], "singleview_only");
}

TEST_F(CliTest, EvalMatchesMetricsOnRenderedImages) {
    const auto run = dir("eval_run");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--iterations", "20", "--out", run.string()})).code, 0);
    const auto out = dir("eval_out");
    const Result r = run_cli({"eval", "--checkpoint", run.string(), "--data", data_.string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json metrics = read_json(out / "metrics.json");

    const Checkpoint ck = load_checkpoint(run / "checkpoint");
    const Dataset ds = load_dataset(data_);
    std::vector<Image> rendered, reference;
    std::vector<std::string> names;
    for (const auto* f : ds.split(Split::test)) {
        names.push_back(f->name);
        rendered.push_back(render_image(ck.params, f->camera, ck.info.bounds,
                                        SamplingConfig{ck.info.samples_per_ray, false, 0}, RenderOptions{}, 1)
                               .color);
        reference.push_back(f->image);
    }
    const MetricReport expected = evaluate_images(rendered, reference, names);
    EXPECT_NEAR(metrics["mean"]["psnr"].get<double>(), expected.mean_psnr, 1e-9);
    EXPECT_NEAR(metrics["mean"]["ssim"].get<double>(), expected.mean_ssim, 1e-9);
    EXPECT_EQ(metrics["images"].size(), 4u);
    EXPECT_TRUE(fs::exists(out / "metrics.csv"));
}

TEST_F(CliTest, RenderAtTrainingCameraBeatsTestAfterTraining) {
    const auto run = dir("overfit");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--iterations", "300", "--lr", "0.005", "--width", "32",
                        "--pos-freqs", "4", "--samples", "16", "--eval-samples", "16", "--eval-every", "300",
                        "--log-every", "100", "--out", run.string()}))
                  .code,
              0);
    const auto train_eval = dir("overfit_train");
    const auto test_eval = dir("overfit_test");
    ASSERT_EQ(run_cli({"eval", "--checkpoint", run.string(), "--data", data_.string(), "--split", "train", "--out",
                   train_eval.string()})
                  .code,
              0);
    ASSERT_EQ(run_cli({"eval", "--checkpoint", run.string(), "--data", data_.string(), "--split", "test", "--out",
                   test_eval.string()})
                  .code,
              0);
    const double train_psnr = read_json(train_eval / "metrics.json")["mean"]["psnr"].get<double>();
    const double test_psnr = read_json(test_eval / "metrics.json")["mean"]["psnr"].get<double>();
    EXPECT_GT(train_psnr, test_psnr);

    const auto renders = dir("overfit_render");
    ASSERT_EQ(run_cli({"render", "--checkpoint", run.string(), "--data", data_.string(), "--split", "train", "--out",
                   renders.string()})
                  .code,
              0);
    EXPECT_TRUE(fs::exists(renders / "train_0.png"));
    EXPECT_TRUE(fs::exists(renders / "train_0_depth.pfm"));
    EXPECT_TRUE(fs::exists(renders / "manifest.json"));
}

TEST_F(CliTest, EvalOnMismatchedResolutionIsACleanError) {
    const auto run = dir("res_run");
    ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--iterations", "0", "--out", run.string()})).code, 0);
    const auto other = dir("res24");
    ASSERT_EQ(run_cli({"gen-scene", "--res", "24", "--out", other.string()}).code, 0);
    const Result r = run_cli({"eval", "--checkpoint", run.string(), "--data", other.string(), "--out", dir("x").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("resolution mismatch"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("16x16"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--data", data_.string(), "--out", dir("u").string(), "--alpha", "-1"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--data", data_.string(), "--out", dir("u").string(), "--seed", "3..1"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--data", data_.string(), "--out", dir("u").string(), "--mode", "both"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--data", data_.string(), "--out", dir("u").string(), "--lambda", "2"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--data", (root_ / "missing").string(), "--out", dir("u").string()}).code, 2);
}

TEST_F(CliTest, RuntimeFailureExitsWithOne) {
    const Result r = run_cli({"eval", "--checkpoint", dir("no_such_run").string(), "--data", data_.string(), "--out",
                          dir("y").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, HelpAndVersionExitZero) {
    const Result h = run_cli({"--help"});
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("gen-scene"), std::string::npos);
    EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST_F(CliTest, CheckBoundsReportsBothPropositions) {
    const auto out = dir("bounds");
    const Result r = run_cli({"check-bounds", "--trials", "2000", "--seed", "3", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = read_json(out / "bounds.json");
    EXPECT_EQ(j["appearance"]["violations"], 0);
    EXPECT_EQ(j["geometry"]["violations"], 0);
}

TEST_F(CliTest, TrainIsDeterministic) {
    const auto a = dir("det_a");
    const auto b = dir("det_b");
    for (const auto& out : {a, b}) {
        ASSERT_EQ(run_cli(tiny({"train", "--data", data_.string(), "--mode", "full", "--iterations", "12", "--seed", "4",
                            "--out", out.string()}))
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(b / "checkpoint.bin"));
    EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
}
