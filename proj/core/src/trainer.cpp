#include "cfield/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "cfield/checkpoint.hpp"
#include "cfield/error.hpp"
#include "cfield/parallel.hpp"
#include "cfield/random.hpp"

namespace cfield {

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::baseline: return "baseline";
        case TrainMode::multiview_only: return "multiview_only";
        case TrainMode::singleview_only: return "singleview_only";
        case TrainMode::full: return "full";
    }
    return "unknown";
}

TrainMode parse_train_mode(const std::string& s) {
    if (s == "baseline") return TrainMode::baseline;
    if (s == "multiview" || s == "multiview_only") return TrainMode::multiview_only;
    if (s == "singleview" || s == "singleview_only") return TrainMode::singleview_only;
    if (s == "full") return TrainMode::full;
    throw ConfigError("unknown training mode '" + s + "' (expected baseline, multiview, singleview or full)");
}

bool uses_mask(TrainMode mode) { return mode == TrainMode::multiview_only || mode == TrainMode::full; }
bool uses_depth(TrainMode mode) { return mode == TrainMode::singleview_only || mode == TrainMode::full; }

void TrainConfig::validate() const {
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (rays_per_batch < 1) throw ConfigError("rays_per_batch must be >= 1");
    if (patches_per_batch < 0) throw ConfigError("patches_per_batch must be >= 0");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (!std::isfinite(lr_decay) || lr_decay <= 0.0) throw ConfigError("lr_decay must be > 0");
    if (eval_samples_per_ray == 1 || eval_samples_per_ray < 0) {
        throw ConfigError("eval_samples_per_ray must be 0 or >= 2");
    }
    if (eval_every < 1 || log_every < 1) throw ConfigError("eval_every and log_every must be >= 1");
    if (eval_max_frames < 0 || threads < 0) throw ConfigError("eval_max_frames and threads must be >= 0");
    mask_config.validate();
    loss_weights.validate();
    field.validate();
    sampling.validate();
}

namespace {

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string TrainLog::to_csv(bool include_seconds) const {
    std::string out = "iteration,loss_photo,loss_mask_off,loss_depth,test_psnr,test_ssim";
    out += include_seconds ? ",seconds\n" : "\n";
    for (const auto& r : records) {
        out += std::to_string(r.iteration) + "," + format_number(r.loss_photo) + "," +
               format_number(r.loss_mask_off) + "," + format_number(r.loss_depth) + ",";
        out += r.test_psnr ? format_number(*r.test_psnr) : "";
        out += ",";
        out += r.test_ssim ? format_number(*r.test_ssim) : "";
        if (include_seconds) {
            out += "," + format_number(r.seconds);
        }
        out += "\n";
    }
    return out;
}

void TrainLog::write_csv(const std::filesystem::path& path, bool include_seconds) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << to_csv(include_seconds);
    if (!f) throw IoError("failed writing " + path.string());
}

std::optional<TrainRecord> TrainLog::last_evaluated() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
        if (it->test_psnr) return *it;
    }
    return std::nullopt;
}

std::vector<CorrespondenceMask> precompute_masks(const std::vector<const PosedFrame*>& train_frames,
                                                 const TrainConfig& config) {
    std::vector<CorrespondenceMask> masks;
    if (!uses_mask(config.mode)) return masks;
    for (const auto* f : train_frames) {
        if (!f->depth) {
            throw ConfigError("mode " + to_string(config.mode) + " needs depth, but frame '" + f->name +
                              "' has none");
        }
    }
    const int threads = resolve_threads(config.threads);
    for (std::size_t i = 0; i < train_frames.size(); ++i) {
        std::vector<DepthView> targets;
        for (std::size_t j = 0; j < train_frames.size(); ++j) {
            if (j != i) targets.push_back({train_frames[j]->camera, *train_frames[j]->depth});
        }
        const DepthView source{train_frames[i]->camera, *train_frames[i]->depth};
        CorrespondenceMask mask = derive_mask(source, targets, config.mask_config, threads);
        if (config.mask_config.portion < 1.0) {
            mask = subsample_mask(mask, config.mask_config.portion, hash_combine(config.seed, i));
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config)
    : dataset_(&dataset),
      config_((config.validate(), std::move(config))),
      train_(dataset.split(Split::train)),
      test_(dataset.split(Split::test)),
      params_(init_params(config_.field, config_.seed)),
      optimizer_(config_.optimizer, static_cast<Eigen::Index>(params_.parameter_count())),
      workers_(resolve_threads(config_.threads)) {
    if (train_.empty()) throw ConfigError("dataset has no training frames");
    if (test_.empty()) throw ConfigError("dataset has no test frames");
    masks_ = precompute_masks(train_, config_);
    if (uses_depth(config_.mode)) {
        for (const auto* f : train_) {
            if (!f->depth) {
                throw ConfigError("mode " + to_string(config_.mode) + " needs depth, but frame '" + f->name +
                                  "' has none");
            }
            reference_depths_.push_back(*f->depth);
        }
        build_patch_origins();
    }
}

void Trainer::set_masks(std::vector<CorrespondenceMask> masks) {
    if (masks.size() != train_.size()) throw DomainError("one mask per training frame is required");
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].width() != train_[i]->image.width() || masks[i].height() != train_[i]->image.height()) {
            throw DomainError("mask size differs from frame '" + train_[i]->name + "'");
        }
    }
    masks_ = std::move(masks);
}

void Trainer::set_reference_depths(std::vector<DepthMap> depths) {
    if (depths.size() != train_.size()) throw DomainError("one depth map per training frame is required");
    for (std::size_t i = 0; i < depths.size(); ++i) {
        if (depths[i].width() != train_[i]->image.width() || depths[i].height() != train_[i]->image.height()) {
            throw DomainError("depth size differs from frame '" + train_[i]->name + "'");
        }
    }
    reference_depths_ = std::move(depths);
    build_patch_origins();
}

// Every patch origin whose P x P window has valid reference depth.
void Trainer::build_patch_origins() {
    patch_origins_.clear();
    const int p = config_.loss_weights.patch_size;
    for (std::size_t f = 0; f < reference_depths_.size(); ++f) {
        const DepthMap& d = reference_depths_[f];
        const int w = d.width();
        const int h = d.height();
        if (w < p || h < p) continue;
        // Summed-area table of validity.
        std::vector<int> sat(static_cast<std::size_t>((w + 1) * (h + 1)), 0);
        auto at = [&](int x, int y) -> int& { return sat[static_cast<std::size_t>(y * (w + 1) + x)]; };
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                at(x + 1, y + 1) = (d.valid(x, y) ? 1 : 0) + at(x, y + 1) + at(x + 1, y) - at(x, y);
            }
        }
        for (int y0 = 0; y0 + p <= h; ++y0) {
            for (int x0 = 0; x0 + p <= w; ++x0) {
                const int n = at(x0 + p, y0 + p) - at(x0, y0 + p) - at(x0 + p, y0) + at(x0, y0);
                if (n == p * p) patch_origins_.push_back({static_cast<int>(f), x0, y0});
            }
        }
    }
}

TrainBatch Trainer::sample_batch(int iteration) const {
    TrainBatch batch;
    batch.iteration = iteration;
    batch.seed = hash_combine(config_.seed, static_cast<std::uint64_t>(iteration));
    std::mt19937_64 rng(batch.seed);

    std::size_t total = 0;
    for (const auto* f : train_) total += f->image.size();
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    batch.rays.reserve(static_cast<std::size_t>(config_.rays_per_batch));
    for (int i = 0; i < config_.rays_per_batch; ++i) {
        std::size_t k = pick(rng);
        int frame = 0;
        while (k >= train_[frame]->image.size()) {
            k -= train_[frame]->image.size();
            ++frame;
        }
        const int w = train_[frame]->image.width();
        batch.rays.push_back({frame, static_cast<int>(k % w), static_cast<int>(k / w)});
    }

    if (uses_depth(config_.mode) && config_.loss_weights.beta_depth > 0.0 && !patch_origins_.empty()) {
        std::uniform_int_distribution<std::size_t> pick_patch(0, patch_origins_.size() - 1);
        for (int i = 0; i < config_.patches_per_batch; ++i) {
            batch.patches.push_back(patch_origins_[pick_patch(rng)]);
        }
    }
    return batch;
}

namespace {

template <typename Scalar>
StepRecord evaluate_batch_impl(const TrainConfig& config, const FieldParams& params,
                               const std::vector<const PosedFrame*>& frames,
                               const std::vector<CorrespondenceMask>& masks,
                               const std::vector<DepthMap>& reference_depths, const RayBounds& bounds,
                               const RenderOptions& options, int workers, const TrainBatch& batch,
                               FieldGradients* grads) {
    const int p = config.loss_weights.patch_size;
    const std::size_t n_patch_rays = batch.patches.size() * static_cast<std::size_t>(p * p);
    std::vector<Ray> rays;
    rays.reserve(batch.rays.size() + n_patch_rays);
    for (const auto& r : batch.rays) {
        rays.push_back(pixel_center_ray(frames[r.frame]->camera, r.x, r.y, bounds));
    }
    for (const auto& patch : batch.patches) {
        for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) {
                rays.push_back(pixel_center_ray(frames[patch.frame]->camera, patch.x0 + dx, patch.y0 + dy, bounds));
            }
        }
    }
    std::vector<std::uint64_t> streams(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) streams[i] = hash_combine(batch.seed, i);

    BatchRenderer<Scalar> renderer(params, config.sampling, options, workers);
    const auto& out = renderer.render(rays, streams);

    StepRecord rec;
    rec.iteration = batch.iteration;
    std::vector<RayGradient> upstream(rays.size());

    const std::size_t n = batch.rays.size();
    std::vector<Vec3> pred(n);
    std::vector<Vec3> target(n);
    for (std::size_t i = 0; i < n; ++i) {
        pred[i] = out[i].color;
        const auto& r = batch.rays[i];
        target[i] = frames[r.frame]->image(r.x, r.y);
    }
    if (uses_mask(config.mode)) {
        std::vector<std::uint8_t> in_mask(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = batch.rays[i];
            in_mask[i] = masks[r.frame].in_mask(r.x, r.y) ? 1 : 0;
        }
        const MaskedColorLoss loss = masked_photometric_loss(pred, target, in_mask, config.loss_weights);
        rec.loss_photo = loss.in_mask_term;
        rec.loss_mask_off = loss.off_mask_term;
        rec.in_mask_rays = loss.in_mask_count;
        for (std::size_t i = 0; i < n; ++i) upstream[i].color = loss.gradient[i];
    } else {
        const ColorLoss loss = photometric_loss(pred, target);
        rec.loss_photo = loss.value;
        for (std::size_t i = 0; i < n; ++i) upstream[i].color = loss.gradient[i];
    }

    if (!batch.patches.empty()) {
        constexpr double kMinDepth = 1e-6;
        const double scale = config.loss_weights.beta_depth / static_cast<double>(batch.patches.size());
        const std::size_t pp = static_cast<std::size_t>(p * p);
        std::vector<double> z(pp);
        std::vector<double> factor(pp);
        std::vector<double> ref(pp);
        std::vector<std::uint8_t> clamped(pp);
        double total = 0.0;
        for (std::size_t k = 0; k < batch.patches.size(); ++k) {
            const auto& patch = batch.patches[k];
            const Camera& cam = frames[patch.frame]->camera;
            const DepthMap& depth = reference_depths[patch.frame];
            for (std::size_t j = 0; j < pp; ++j) {
                const std::size_t ray = n + k * pp + j;
                const int x = patch.x0 + static_cast<int>(j) % p;
                const int y = patch.y0 + static_cast<int>(j) / p;
                factor[j] = depth_per_distance(cam, rays[ray].direction);
                const double raw = out[ray].expected_depth * factor[j];
                clamped[j] = raw < kMinDepth ? 1 : 0;
                z[j] = clamped[j] ? kMinDepth : raw;
                ref[j] = depth.at(x, y);
            }
            const DepthLoss loss = scale_invariant_depth_loss(z, ref);
            total += loss.value;
            for (std::size_t j = 0; j < pp; ++j) {
                upstream[n + k * pp + j].depth = clamped[j] ? 0.0 : scale * loss.gradient[j] * factor[j];
            }
        }
        rec.loss_depth = scale * total;
    }

    if (grads) renderer.backward(upstream, *grads);
    return rec;
}

RenderOptions render_options(const TrainConfig& config, const Dataset& dataset) {
    RenderOptions options;
    if (config.composite_background) {
        options.background = dataset.background.value_or(Vec3::Zero());
    }
    return options;
}

}  // namespace

StepRecord Trainer::evaluate_batch(const TrainBatch& batch, FieldGradients* grads) {
    const RenderOptions options = render_options(config_, *dataset_);
    if (config_.precision == Precision::float32) {
        return evaluate_batch_impl<float>(config_, params_, train_, masks_, reference_depths_, dataset_->bounds,
                                          options, workers_, batch, grads);
    }
    return evaluate_batch_impl<double>(config_, params_, train_, masks_, reference_depths_, dataset_->bounds,
                                       options, workers_, batch, grads);
}

double Trainer::learning_rate_at(int step) const {
    const double progress = config_.iterations > 0 ? static_cast<double>(step) / config_.iterations : 0.0;
    return config_.learning_rate * std::pow(config_.lr_decay, progress);
}

StepRecord Trainer::train_step(const TrainBatch& batch) {
    FieldGradients grads = params_.make_gradients();
    const StepRecord rec = evaluate_batch(batch, &grads);
    const Eigen::VectorXd g = grads.flatten();
    if (!std::isfinite(rec.total()) || !g.allFinite()) {
        throw TrainingError("non-finite loss at iteration " + std::to_string(batch.iteration) + " (batch seed " +
                            std::to_string(batch.seed) + ")");
    }
    Eigen::VectorXd flat = params_.flatten();
    optimizer_.step(flat, g, learning_rate_at(iteration_));
    params_.assign(flat);
    ++iteration_;
    return rec;
}

TestMetrics Trainer::evaluate_test(bool keep_renders) const {
    SamplingConfig sampling = config_.sampling;
    sampling.stratified = false;
    if (config_.eval_samples_per_ray > 0) sampling.samples_per_ray = config_.eval_samples_per_ray;
    const RenderOptions options = render_options(config_, *dataset_);

    std::size_t count = test_.size();
    if (config_.eval_max_frames > 0) count = std::min(count, static_cast<std::size_t>(config_.eval_max_frames));
    TestMetrics m;
    for (std::size_t i = 0; i < count; ++i) {
        const PosedFrame& f = *test_[i];
        RenderedImage r =
            render_image(params_, f.camera, dataset_->bounds, sampling, options, workers_, config_.precision);
        m.psnr += psnr(r.color, f.image);
        m.ssim += ssim(r.color, f.image);
        if (keep_renders) m.renders.push_back(std::move(r.color));
    }
    m.psnr /= static_cast<double>(count);
    m.ssim /= static_cast<double>(count);
    return m;
}

TrainResult run_training(const TrainConfig& config, const Dataset& dataset, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    Trainer trainer(dataset, config);
    TrainResult result;
    for (const auto& m : trainer.masks()) result.mask_coverage.push_back(m.coverage());

    auto emit = [&](TrainRecord rec) {
        rec.seconds = elapsed();
        result.log.records.push_back(rec);
        if (options.on_record) options.on_record(rec);
    };

    {
        const StepRecord s = trainer.evaluate_batch(trainer.sample_batch(0), nullptr);
        const TestMetrics m = trainer.evaluate_test();
        emit({0, s.loss_photo, s.loss_mask_off, s.loss_depth, m.psnr, m.ssim, 0.0});
    }

    double sum_photo = 0.0;
    double sum_off = 0.0;
    double sum_depth = 0.0;
    int steps = 0;
    const int iterations = trainer.config().iterations;
    for (int it = 1; it <= iterations; ++it) {
        const StepRecord s = trainer.train_step(trainer.sample_batch(it));
        sum_photo += s.loss_photo;
        sum_off += s.loss_mask_off;
        sum_depth += s.loss_depth;
        ++steps;
        const bool eval = it % config.eval_every == 0 || it == iterations;
        if (it % config.log_every == 0 || eval) {
            TrainRecord rec{it, sum_photo / steps, sum_off / steps, sum_depth / steps, std::nullopt, std::nullopt,
                            0.0};
            if (eval) {
                const TestMetrics m = trainer.evaluate_test();
                rec.test_psnr = m.psnr;
                rec.test_ssim = m.ssim;
            }
            emit(rec);
            sum_photo = sum_off = sum_depth = 0.0;
            steps = 0;
        }
    }

    result.params = trainer.params();
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        CheckpointInfo info;
        info.width = dataset.width();
        info.height = dataset.height();
        info.bounds = dataset.bounds;
        info.samples_per_ray = config.eval_samples_per_ray > 0 ? config.eval_samples_per_ray
                                                                : config.sampling.samples_per_ray;
        if (config.composite_background) info.background = dataset.background.value_or(Vec3::Zero());
        save_checkpoint(*options.out_dir / "checkpoint", result.params, info);
        result.log.write_csv(*options.out_dir / "log.csv");
    }
    return result;
}

}  // namespace cfield
