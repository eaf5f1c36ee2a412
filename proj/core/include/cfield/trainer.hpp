#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfield/correspondence.hpp"
#include "cfield/dataset.hpp"
#include "cfield/field.hpp"
#include "cfield/losses.hpp"
#include "cfield/metrics.hpp"
#include "cfield/optimizer.hpp"
#include "cfield/renderer.hpp"

namespace cfield {

// Which regularizers are active: the correspondence-weighted photometric
// term (multiview) and the scale-invariant patch depth term (singleview).
enum class TrainMode { baseline, multiview_only, singleview_only, full };

std::string to_string(TrainMode mode);
// Accepts baseline, multiview(_only), singleview(_only), full.
TrainMode parse_train_mode(const std::string& s);
bool uses_mask(TrainMode mode);
bool uses_depth(TrainMode mode);

struct TrainConfig {
    int iterations = 5000;
    int rays_per_batch = 1024;
    int patches_per_batch = 8;
    double learning_rate = 5e-4;
    // Learning rate decays exponentially to learning_rate * lr_decay.
    double lr_decay = 0.1;
    OptimizerConfig optimizer;
    MaskConfig mask_config;
    LossWeights loss_weights;
    TrainMode mode = TrainMode::full;
    std::uint64_t seed = 0;
    FieldConfig field;
    SamplingConfig sampling;
    // Samples per ray for test-set evaluation (unstratified); 0 = sampling.samples_per_ray.
    int eval_samples_per_ray = 0;
    int eval_every = 500;
    int log_every = 100;
    // Cap on evaluated test frames; 0 = all.
    int eval_max_frames = 0;
    int threads = 0;
    Precision precision = Precision::float32;
    // Composite the dataset background color behind the field.
    bool composite_background = false;

    void validate() const;
};

struct TrainRecord {
    int iteration = 0;
    double loss_photo = 0.0;
    double loss_mask_off = 0.0;
    double loss_depth = 0.0;
    std::optional<double> test_psnr;
    std::optional<double> test_ssim;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    // Columns: iteration, loss_photo, loss_mask_off, loss_depth, test_psnr,
    // test_ssim, seconds (omitted when include_seconds is false).
    std::string to_csv(bool include_seconds = true) const;
    void write_csv(const std::filesystem::path& path, bool include_seconds = true) const;

    // Last record carrying test metrics.
    std::optional<TrainRecord> last_evaluated() const;
};

struct RaySample {
    int frame = 0;  // index into the training frames
    int x = 0;
    int y = 0;
};

struct PatchSample {
    int frame = 0;
    int x0 = 0;
    int y0 = 0;
};

struct TrainBatch {
    int iteration = 0;
    std::uint64_t seed = 0;
    std::vector<RaySample> rays;
    std::vector<PatchSample> patches;
};

struct StepRecord {
    int iteration = 0;
    double loss_photo = 0.0;
    double loss_mask_off = 0.0;
    double loss_depth = 0.0;
    std::size_t in_mask_rays = 0;

    double total() const { return loss_photo + loss_mask_off + loss_depth; }
};

class TrainingError : public StateError {
public:
    using StateError::StateError;
};

// For every training frame, the correspondence mask against all other
// training frames, subsampled to config.mask_config.portion. Empty for
// baseline and singleview_only. Throws ConfigError if a frame lacks depth.
std::vector<CorrespondenceMask> precompute_masks(const std::vector<const PosedFrame*>& train_frames,
                                                 const TrainConfig& config);

struct TestMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
    std::vector<Image> renders;
};

class Trainer {
public:
    // Throws ConfigError when the dataset has no training or test frames,
    // or a depth-using mode meets frames without depth.
    Trainer(const Dataset& dataset, TrainConfig config);

    const TrainConfig& config() const { return config_; }
    const FieldParams& params() const { return params_; }
    FieldParams& params() { return params_; }
    int iteration() const { return iteration_; }
    const std::vector<const PosedFrame*>& train_frames() const { return train_; }
    const std::vector<const PosedFrame*>& test_frames() const { return test_; }

    const std::vector<CorrespondenceMask>& masks() const { return masks_; }
    void set_masks(std::vector<CorrespondenceMask> masks);

    // Reference depths used by the patch term; defaults to each frame's depth.
    void set_reference_depths(std::vector<DepthMap> depths);
    std::size_t patch_origin_count() const { return patch_origins_.size(); }

    TrainBatch sample_batch(int iteration) const;

    // Losses for `batch` at the current parameters; gradients are added to
    // `grads` when it is non-null. Off-mode terms are exactly zero.
    StepRecord evaluate_batch(const TrainBatch& batch, FieldGradients* grads);

    // One optimizer update. Throws TrainingError on a non-finite loss.
    StepRecord train_step(const TrainBatch& batch);

    TestMetrics evaluate_test(bool keep_renders = false) const;
    double learning_rate_at(int step) const;

private:
    void build_patch_origins();

    const Dataset* dataset_;
    TrainConfig config_;
    std::vector<const PosedFrame*> train_;
    std::vector<const PosedFrame*> test_;
    FieldParams params_;
    Optimizer optimizer_;
    std::vector<CorrespondenceMask> masks_;
    std::vector<DepthMap> reference_depths_;
    std::vector<PatchSample> patch_origins_;
    int workers_ = 1;
    int iteration_ = 0;
};

struct TrainResult {
    FieldParams params;
    TrainLog log;
    std::vector<double> mask_coverage;  // per training frame
};

struct RunOptions {
    // When set, checkpoint and log CSV are written here.
    std::optional<std::filesystem::path> out_dir;
    std::function<void(const TrainRecord&)> on_record;
};

TrainResult run_training(const TrainConfig& config, const Dataset& dataset, const RunOptions& options = {});

}  // namespace cfield
