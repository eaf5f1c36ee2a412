#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "cfield/checkpoint.hpp"
#include "cfield/error.hpp"
#include "cfield/random.hpp"
#include "cfield/scene.hpp"
#include "cfield/trainer.hpp"

using namespace cfield;
namespace fs = std::filesystem;

namespace {

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        SyntheticDatasetConfig c;
        c.resolution = 24;
        c.test_views = 2;
        return make_synthetic_dataset(c);
    }();
    return ds;
}

TrainConfig small_config(TrainMode mode) {
    TrainConfig c;
    c.mode = mode;
    c.iterations = 20;
    c.rays_per_batch = 64;
    c.patches_per_batch = 2;
    c.loss_weights.patch_size = 4;
    c.field.hidden_layers = 2;
    c.field.hidden_width = 16;
    c.field.color_width = 8;
    c.field.skip_connection_layer = 1;
    c.field.encoding.position_frequencies = 3;
    c.field.encoding.direction_frequencies = 1;
    c.sampling.samples_per_ray = 12;
    c.eval_every = 10;
    c.log_every = 5;
    c.threads = 1;
    return c;
}

Eigen::VectorXd batch_gradient(Trainer& t, const TrainBatch& b) {
    FieldGradients g = t.params().make_gradients();
    t.evaluate_batch(b, &g);
    return g.flatten();
}

}  // namespace

TEST(TrainMode, Parsing) {
    EXPECT_EQ(parse_train_mode("multiview"), TrainMode::multiview_only);
    EXPECT_EQ(parse_train_mode("singleview_only"), TrainMode::singleview_only);
    EXPECT_EQ(parse_train_mode(to_string(TrainMode::full)), TrainMode::full);
    EXPECT_THROW(parse_train_mode("both"), ConfigError);
    EXPECT_TRUE(uses_mask(TrainMode::full) && uses_depth(TrainMode::full));
    EXPECT_FALSE(uses_mask(TrainMode::singleview_only) || uses_depth(TrainMode::multiview_only));
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.rays_per_batch = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.loss_weights.lambda_offmask = 2;
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(PrecomputeMasks, SkippedForBaseline) {
    const auto frames = small_dataset().split(Split::train);
    EXPECT_TRUE(precompute_masks(frames, small_config(TrainMode::baseline)).empty());
    EXPECT_TRUE(precompute_masks(frames, small_config(TrainMode::singleview_only)).empty());
}

TEST(PrecomputeMasks, CoverageAndPortion) {
    const auto frames = small_dataset().split(Split::train);
    TrainConfig c = small_config(TrainMode::full);
    const auto full = precompute_masks(frames, c);
    ASSERT_EQ(full.size(), 3u);
    c.mask_config.portion = 0.3;
    const auto part = precompute_masks(frames, c);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GT(full[i].coverage(), 0.0);
        const double expected = std::round(0.3 * static_cast<double>(full[i].count()));
        EXPECT_EQ(static_cast<double>(part[i].count()), expected);
    }
}

TEST(PrecomputeMasks, MissingDepthIsConfigError) {
    Dataset ds = small_dataset();
    ds.frames[0].depth.reset();
    EXPECT_THROW(precompute_masks(ds.split(Split::train), small_config(TrainMode::multiview_only)), ConfigError);
    EXPECT_THROW(Trainer(ds, small_config(TrainMode::singleview_only)), ConfigError);
    EXPECT_NO_THROW(Trainer(ds, small_config(TrainMode::baseline)));
}

TEST(Trainer, NeedsBothSplits) {
    Dataset ds = small_dataset();
    for (auto& f : ds.frames) f.split = Split::train;
    EXPECT_THROW(Trainer(ds, small_config(TrainMode::baseline)), ConfigError);
}

TEST(Trainer, BaselineLossIsPhotometricOnBatch) {
    TrainConfig c = small_config(TrainMode::baseline);
    c.precision = Precision::float64;
    Trainer t(small_dataset(), c);
    const TrainBatch b = t.sample_batch(3);
    EXPECT_TRUE(b.patches.empty());
    std::vector<Vec3> pred;
    std::vector<Vec3> target;
    for (std::size_t i = 0; i < b.rays.size(); ++i) {
        const auto& r = b.rays[i];
        const PosedFrame& f = *t.train_frames()[static_cast<std::size_t>(r.frame)];
        const Ray ray = pixel_center_ray(f.camera, r.x, r.y, small_dataset().bounds);
        pred.push_back(render_ray(t.params(), ray, c.sampling, {}, hash_combine(b.seed, i)).color);
        target.push_back(f.image(r.x, r.y));
    }
    const StepRecord rec = t.evaluate_batch(b, nullptr);
    EXPECT_NEAR(rec.loss_photo, photometric_loss(pred, target).value, 1e-12);
    EXPECT_EQ(rec.loss_mask_off, 0.0);
    EXPECT_EQ(rec.loss_depth, 0.0);
}

TEST(Trainer, ModeIsolation) {
    const Dataset& ds = small_dataset();
    TrainConfig base = small_config(TrainMode::baseline);
    TrainConfig single = small_config(TrainMode::singleview_only);
    TrainConfig multi = small_config(TrainMode::multiview_only);
    TrainConfig full = small_config(TrainMode::full);

    Trainer tb(ds, base);
    Trainer ts(ds, single);
    Trainer tm(ds, multi);
    Trainer tf(ds, full);
    const TrainBatch bs = ts.sample_batch(1);
    ASSERT_FALSE(bs.patches.empty());
    EXPECT_TRUE(tm.sample_batch(1).patches.empty());

    // Single view: photometric part is the plain loss, no off-mask term.
    const StepRecord rs = ts.evaluate_batch(bs, nullptr);
    EXPECT_EQ(rs.loss_mask_off, 0.0);
    EXPECT_GT(rs.loss_depth, 0.0);
    TrainBatch rays_only = bs;
    rays_only.patches.clear();
    EXPECT_EQ(batch_gradient(ts, rays_only), batch_gradient(tb, rays_only));

    // Multiview: no depth term; gradient equals full mode without patches.
    const TrainBatch bm = tm.sample_batch(1);
    const StepRecord rm = tm.evaluate_batch(bm, nullptr);
    EXPECT_EQ(rm.loss_depth, 0.0);
    EXPECT_GT(rm.in_mask_rays, 0u);
    EXPECT_EQ(batch_gradient(tm, bm), batch_gradient(tf, bm));
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
    for (OptimizerKind k : {OptimizerKind::adam, OptimizerKind::sgd}) {
        TrainConfig c = small_config(TrainMode::full);
        c.learning_rate = 0.0;
        c.optimizer.kind = k;
        Trainer t(small_dataset(), c);
        const Eigen::VectorXd before = t.params().flatten();
        for (int i = 1; i <= 3; ++i) t.train_step(t.sample_batch(i));
        EXPECT_EQ(t.params().flatten(), before);
    }
}

TEST(Trainer, NonFiniteLossReportsIterationAndSeed) {
    Dataset ds = small_dataset();
    for (auto& f : ds.frames) {
        for (auto& c : f.image) c = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    }
    Trainer t(ds, small_config(TrainMode::baseline));
    const TrainBatch b = t.sample_batch(7);
    try {
        t.train_step(b);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("iteration 7"), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(b.seed)), std::string::npos) << msg;
    }
}

TEST(Trainer, LearningRateDecay) {
    TrainConfig c = small_config(TrainMode::baseline);
    c.iterations = 100;
    Trainer t(small_dataset(), c);
    EXPECT_DOUBLE_EQ(t.learning_rate_at(0), c.learning_rate);
    EXPECT_NEAR(t.learning_rate_at(100), c.learning_rate * c.lr_decay, 1e-18);
}

TEST(RunTraining, DeterministicLogsAndRecordsSchedule) {
    const TrainConfig c = small_config(TrainMode::full);
    const TrainResult a = run_training(c, small_dataset());
    const TrainResult b = run_training(c, small_dataset());
    EXPECT_EQ(a.log.to_csv(false), b.log.to_csv(false));
    EXPECT_EQ(a.params.flatten(), b.params.flatten());
    std::vector<int> its;
    for (const auto& r : a.log.records) its.push_back(r.iteration);
    EXPECT_EQ(its, (std::vector<int>{0, 5, 10, 15, 20}));
    EXPECT_TRUE(a.log.records[0].test_psnr && a.log.records[2].test_psnr && a.log.records[4].test_psnr);
    EXPECT_FALSE(a.log.records[1].test_psnr);
    EXPECT_EQ(a.mask_coverage.size(), 3u);
    EXPECT_EQ(a.log.to_csv().substr(0, a.log.to_csv().find('\n')),
              "iteration,loss_photo,loss_mask_off,loss_depth,test_psnr,test_ssim,seconds");
}

TEST(RunTraining, ImprovesTestPsnr) {
    TrainConfig c = small_config(TrainMode::full);
    c.iterations = 150;
    c.eval_every = 150;
    c.learning_rate = 3e-3;
    const TrainResult r = run_training(c, small_dataset());
    ASSERT_GE(r.log.records.size(), 2u);
    EXPECT_GT(*r.log.records.back().test_psnr, *r.log.records.front().test_psnr);
}

TEST(RunTraining, WritesCheckpointAndLog) {
    const fs::path dir = fs::temp_directory_path() / "cfield_run_training";
    fs::remove_all(dir);
    TrainConfig c = small_config(TrainMode::baseline);
    c.iterations = 0;
    RunOptions o;
    o.out_dir = dir;
    const TrainResult r = run_training(c, small_dataset(), o);
    ASSERT_EQ(r.log.records.size(), 1u);
    EXPECT_TRUE(fs::exists(dir / "log.csv"));
    const Checkpoint ck = load_checkpoint(dir / "checkpoint");
    const Eigen::VectorXd init = init_params(c.field, c.seed).flatten();
    EXPECT_EQ(ck.params.flatten(), init.cast<float>().cast<double>());
    EXPECT_EQ(ck.info.width, 24);
    fs::remove_all(dir);
}
