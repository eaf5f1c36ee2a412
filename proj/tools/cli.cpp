#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfield/checkpoint.hpp"
#include "cfield/config_io.hpp"
#include "cfield/correspondence.hpp"
#include "cfield/dataset.hpp"
#include "cfield/error.hpp"
#include "cfield/image_io.hpp"
#include "cfield/losses.hpp"
#include "cfield/metrics.hpp"
#include "cfield/parallel.hpp"
#include "cfield/renderer.hpp"
#include "cfield/scene.hpp"
#include "cfield/trainer.hpp"

namespace cfield::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kVersion = CFIELD_VERSION;

// Thrown for bad flag values or combinations; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("failed writing " + path.string());
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    ordered_json config = ordered_json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> artifacts;

    void write(const fs::path& dir) const {
        ordered_json j;
        j["command"] = command;
        j["version"] = kVersion;
        j["argv"] = argv;
        j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
        j["config"] = config;
        std::vector<std::string> sorted = artifacts;
        std::sort(sorted.begin(), sorted.end());
        j["artifacts"] = sorted;
        write_text(dir / "manifest.json", j.dump(2) + "\n");
    }
};

// Files under `dir` relative to it, excluding manifests.
std::vector<std::string> list_artifacts(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        files.push_back(fs::relative(e.path(), dir).generic_string());
    }
    return files;
}

// "N" or "A..B" (inclusive).
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    auto parse_one = [&](const std::string& t) -> std::uint64_t {
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            throw UsageError("--seed expects N or A..B, got '" + s + "'");
        }
        return std::stoull(t);
    };
    const auto dots = s.find("..");
    if (dots == std::string::npos) return {parse_one(s)};
    const std::uint64_t a = parse_one(s.substr(0, dots));
    const std::uint64_t b = parse_one(s.substr(dots + 2));
    if (b < a) throw UsageError("--seed range '" + s + "' is empty");
    if (b - a > 10000) throw UsageError("--seed range '" + s + "' is too large");
    std::vector<std::uint64_t> out;
    for (std::uint64_t k = a; k <= b; ++k) out.push_back(k);
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Split parse_split_flag(const std::string& s) {
    try {
        return parse_split(s);
    } catch (const ConfigError&) {
        throw UsageError("--split expects train, test or all, got '" + s + "'");
    }
}

// Training flags shared by `train` and `ablate`. Only flags that were given
// override the --config file, which overrides the defaults.
struct TrainFlags {
    std::string config_path;
    std::string mode;
    int iterations = 0;
    double alpha = 0, lambda = 0, beta_depth = 0, portion = 0, lr = 0, lr_decay = 0, position_scale = 0;
    int patch_size = 0, threads = 0, rays = 0, patches = 0, samples = 0, eval_samples = 0, eval_every = 0,
        log_every = 0, eval_frames = 0, layers = 0, width = 0, color_width = 0, pos_freqs = 0, dir_freqs = 0,
        skip = 0;
    std::string bias_init, density_activation, optimizer, precision;
    bool composite_background = false;
    std::vector<std::pair<std::string, CLI::Option*>> given;

    void add(CLI::App& app, bool with_mode) {
        auto reg = [&](const std::string& name, CLI::Option* o) { given.emplace_back(name, o); };
        app.add_option("--config", config_path, "JSON file with training config overrides")->check(CLI::ExistingFile);
        if (with_mode) reg("mode", app.add_option("--mode", mode, "baseline | multiview | singleview | full"));
        reg("iterations", app.add_option("--iterations", iterations, "optimizer steps")->check(CLI::NonNegativeNumber));
        reg("alpha", app.add_option("--alpha", alpha, "mask depth threshold")->check(CLI::NonNegativeNumber));
        reg("lambda", app.add_option("--lambda", lambda, "off-mask loss weight")->check(CLI::Range(0.0, 1.0)));
        reg("beta_depth", app.add_option("--beta-depth", beta_depth, "patch depth loss weight")->check(CLI::NonNegativeNumber));
        reg("patch_size", app.add_option("--patch-size", patch_size, "depth patch side P")->check(CLI::Range(2, 1 << 16)));
        reg("portion", app.add_option("--portion", portion, "kept fraction of mask pixels")->check(CLI::Range(0.0, 1.0)));
        reg("threads", app.add_option("--threads", threads, "worker threads (default $CFIELD_THREADS or 1)")->check(CLI::PositiveNumber));
        reg("lr", app.add_option("--lr", lr, "initial learning rate")->check(CLI::NonNegativeNumber));
        reg("lr_decay", app.add_option("--lr-decay", lr_decay, "final / initial learning rate")->check(CLI::PositiveNumber));
        reg("rays", app.add_option("--rays", rays, "rays per batch")->check(CLI::PositiveNumber));
        reg("patches", app.add_option("--patches", patches, "depth patches per batch")->check(CLI::NonNegativeNumber));
        reg("samples", app.add_option("--samples", samples, "samples per ray")->check(CLI::Range(2, 1 << 16)));
        reg("eval_samples", app.add_option("--eval-samples", eval_samples, "samples per ray for test evaluation")->check(CLI::Range(2, 1 << 16)));
        reg("eval_every", app.add_option("--eval-every", eval_every, "test evaluation interval")->check(CLI::PositiveNumber));
        reg("log_every", app.add_option("--log-every", log_every, "log interval")->check(CLI::PositiveNumber));
        reg("eval_frames", app.add_option("--eval-frames", eval_frames, "cap on evaluated test frames")->check(CLI::NonNegativeNumber));
        reg("layers", app.add_option("--layers", layers, "hidden layers")->check(CLI::PositiveNumber));
        reg("width", app.add_option("--width", width, "hidden width")->check(CLI::PositiveNumber));
        reg("color_width", app.add_option("--color-width", color_width, "color head width")->check(CLI::PositiveNumber));
        reg("pos_freqs", app.add_option("--pos-freqs", pos_freqs, "position encoding frequencies")->check(CLI::NonNegativeNumber));
        reg("dir_freqs", app.add_option("--dir-freqs", dir_freqs, "direction encoding frequencies")->check(CLI::NonNegativeNumber));
        reg("skip", app.add_option("--skip", skip, "skip connection layer (0 = none)")->check(CLI::NonNegativeNumber));
        reg("position_scale", app.add_option("--position-scale", position_scale, "position scale before encoding")->check(CLI::PositiveNumber));
        reg("bias_init", app.add_option("--bias-init", bias_init, "zeros | uniform01"));
        reg("density_activation", app.add_option("--density-activation", density_activation, "relu | softplus"));
        reg("optimizer", app.add_option("--optimizer", optimizer, "adam | sgd"));
        reg("precision", app.add_option("--precision", precision, "float32 | float64"));
        reg("composite_background", app.add_flag("--composite-background", composite_background,
                                                  "composite the dataset background behind the field"));
    }

    bool has(const std::string& name) const {
        for (const auto& [n, o] : given) {
            if (n == name) return o->count() > 0;
        }
        return false;
    }

    TrainConfig build() const {
        TrainConfig c;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            std::stringstream ss;
            ss << f.rdbuf();
            c = train_config_from_json(ss.str(), c);
        }
        if (has("mode")) c.mode = parse_train_mode(mode);
        if (has("iterations")) c.iterations = iterations;
        if (has("alpha")) c.mask_config.alpha = alpha;
        if (has("lambda")) c.loss_weights.lambda_offmask = lambda;
        if (has("beta_depth")) c.loss_weights.beta_depth = beta_depth;
        if (has("patch_size")) c.loss_weights.patch_size = patch_size;
        if (has("portion")) c.mask_config.portion = portion;
        if (has("threads")) c.threads = threads;
        if (has("lr")) c.learning_rate = lr;
        if (has("lr_decay")) c.lr_decay = lr_decay;
        if (has("rays")) c.rays_per_batch = rays;
        if (has("patches")) c.patches_per_batch = patches;
        if (has("samples")) c.sampling.samples_per_ray = samples;
        if (has("eval_samples")) c.eval_samples_per_ray = eval_samples;
        if (has("eval_every")) c.eval_every = eval_every;
        if (has("log_every")) c.log_every = log_every;
        if (has("eval_frames")) c.eval_max_frames = eval_frames;
        if (has("layers")) c.field.hidden_layers = layers;
        if (has("width")) c.field.hidden_width = width;
        if (has("color_width")) c.field.color_width = color_width;
        if (has("pos_freqs")) c.field.encoding.position_frequencies = pos_freqs;
        if (has("dir_freqs")) c.field.encoding.direction_frequencies = dir_freqs;
        if (has("skip")) c.field.skip_connection_layer = skip == 0 ? std::nullopt : std::optional<int>(skip);
        if (has("position_scale")) c.field.position_scale = position_scale;
        if (has("bias_init")) c.field.bias_init = parse_bias_init(bias_init);
        if (has("density_activation")) c.field.density_activation = parse_density_activation(density_activation);
        if (has("optimizer")) c.optimizer.kind = parse_optimizer(optimizer);
        if (has("precision")) c.precision = parse_precision(precision);
        if (has("composite_background")) c.composite_background = composite_background;
        // A skip layer past the trunk depth is dropped when only --layers changed.
        if (c.field.skip_connection_layer && *c.field.skip_connection_layer >= c.field.hidden_layers && !has("skip")) {
            c.field.skip_connection_layer.reset();
        }
        c.validate();
        return c;
    }
};

ordered_json config_json(const TrainConfig& c) { return ordered_json::parse(to_json(c)); }

struct RunSummary {
    std::uint64_t seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

RunSummary train_one(const TrainConfig& config, const Dataset& ds, const fs::path& dir,
                     const std::vector<std::string>& argv, std::ostream& out) {
    fs::create_directories(dir);
    RunOptions opts;
    opts.out_dir = dir;
    opts.on_record = [&](const TrainRecord& r) {
        out << "[seed " << config.seed << "] it " << r.iteration << " photo " << format_double(r.loss_photo)
            << " off " << format_double(r.loss_mask_off) << " depth " << format_double(r.loss_depth);
        if (r.test_psnr) out << " test_psnr " << format_double(*r.test_psnr) << " test_ssim " << format_double(*r.test_ssim);
        out << "\n" << std::flush;
    };
    const TrainResult res = run_training(config, ds, opts);
    // Mask coverage is part of the run record.
    ordered_json cov = ordered_json::array();
    const auto frames = ds.split(Split::train);
    for (std::size_t i = 0; i < res.mask_coverage.size(); ++i) {
        cov.push_back({{"frame", frames[i]->name}, {"coverage", res.mask_coverage[i]}});
    }
    write_text(dir / "mask_coverage.json", cov.dump(2) + "\n");

    Manifest m{"train", argv, config_json(config), config.seed, list_artifacts(dir)};
    m.write(dir);
    const auto last = res.log.last_evaluated();
    return {config.seed, last ? *last->test_psnr : std::nan(""), last ? *last->test_ssim : std::nan("")};
}

std::string summary_csv(const std::vector<RunSummary>& runs) {
    std::string s = "seed,test_psnr,test_ssim\n";
    std::vector<double> p, q;
    for (const auto& r : runs) {
        s += std::to_string(r.seed) + "," + format_double(r.psnr) + "," + format_double(r.ssim) + "\n";
        p.push_back(r.psnr);
        q.push_back(r.ssim);
    }
    s += "median," + format_double(median(p)) + "," + format_double(median(q)) + "\n";
    return s;
}

fs::path checkpoint_stem(const std::string& arg) {
    fs::path p(arg);
    if (fs::is_directory(p)) return p / "checkpoint";
    if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
    return p;
}

std::vector<const PosedFrame*> select_frames(const Dataset& ds, const std::string& split) {
    if (split == "all") {
        std::vector<const PosedFrame*> v;
        for (const auto& f : ds.frames) v.push_back(&f);
        return v;
    }
    return ds.split(parse_split_flag(split));
}

// Scales intrinsics to a new square-pixel resolution.
Camera rescaled(const Camera& cam, int width, int height) {
    Camera c = cam;
    const double sx = static_cast<double>(width) / cam.width();
    const double sy = static_cast<double>(height) / cam.height();
    c.intrinsics.fx *= sx;
    c.intrinsics.fy *= sy;
    c.intrinsics.cx *= sx;
    c.intrinsics.cy *= sy;
    c.intrinsics.width = width;
    c.intrinsics.height = height;
    return c;
}

RenderOptions checkpoint_options(const Checkpoint& ck) { return RenderOptions{ck.info.background}; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse-view radiance field toolkit with multi-view and single-view consistency losses", "cfield"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // gen-scene
    SyntheticDatasetConfig scene_cfg;
    std::string scene_out;
    double depth_noise = 0.0, depth_scale = 1.0;
    std::uint64_t scene_seed = 0;
    auto* gen = app.add_subcommand("gen-scene", "render a synthetic dataset with oracle depth");
    gen->add_option("--preset", scene_cfg.preset, "sphere | spheres3 | spheres3_studio")->check(CLI::IsMember({"sphere", "spheres3", "spheres3_studio"}));
    gen->add_option("--train-views", scene_cfg.train_views)->check(CLI::PositiveNumber);
    gen->add_option("--test-views", scene_cfg.test_views)->check(CLI::NonNegativeNumber);
    gen->add_option("--res", scene_cfg.resolution, "square image size")->check(CLI::Range(1, 8192));
    gen->add_option("--fov", scene_cfg.horizontal_fov, "horizontal fov in radians")->check(CLI::Range(0.01, 3.0));
    gen->add_option("--radius", scene_cfg.radius, "camera distance from the origin")->check(CLI::Range(2.5, 100.0));
    gen->add_option("--elevation", scene_cfg.elevation, "radians above the horizon");
    gen->add_option("--arc", scene_cfg.arc, "radians spanned by all views")->check(CLI::Range(0.0, 6.3));
    gen->add_option("--depth-noise", depth_noise, "std of multiplicative log-normal depth noise")->check(CLI::NonNegativeNumber);
    gen->add_option("--depth-scale", depth_scale, "global scale applied to training depth")->check(CLI::PositiveNumber);
    gen->add_option("--seed", scene_seed, "corruption seed");
    gen->add_option("--out", scene_out, "dataset directory")->required();

    // derive-masks
    std::string mask_data, mask_out;
    MaskConfig mask_cfg;
    std::uint64_t mask_seed = 0;
    int mask_threads = 0;
    auto* masks = app.add_subcommand("derive-masks", "derive correspondence masks for the training views");
    masks->add_option("--data", mask_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    masks->add_option("--alpha", mask_cfg.alpha, "depth agreement threshold")->check(CLI::NonNegativeNumber);
    masks->add_option("--portion", mask_cfg.portion, "kept fraction of mask pixels")->check(CLI::Range(0.0, 1.0));
    masks->add_option("--seed", mask_seed, "subsampling seed");
    masks->add_option("--threads", mask_threads)->check(CLI::PositiveNumber);
    masks->add_option("--out", mask_out)->required();

    // train
    std::string train_data, train_out, train_seed = "0";
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "train a field; --seed A..B runs a sweep");
    train->add_option("--data", train_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--seed", train_seed, "N or A..B");
    train->add_option("--out", train_out)->required();
    train_flags.add(*train, true);

    // render
    std::string render_ckpt, render_data, render_out, render_split = "test";
    int render_samples = 0, render_res = 0, render_threads = 0;
    auto* render = app.add_subcommand("render", "render a checkpoint at dataset cameras (PNG + depth PFM)");
    render->add_option("--checkpoint", render_ckpt, "checkpoint stem or run directory")->required();
    render->add_option("--data", render_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    render->add_option("--split", render_split, "train | test | all");
    render->add_option("--samples", render_samples)->check(CLI::Range(2, 1 << 16));
    render->add_option("--res", render_res, "output width (height keeps the aspect)")->check(CLI::PositiveNumber);
    render->add_option("--threads", render_threads)->check(CLI::PositiveNumber);
    render->add_option("--out", render_out)->required();

    // eval
    std::string eval_ckpt, eval_data, eval_out, eval_split = "test";
    int eval_samples = 0, eval_threads = 0, eval_res = 0;
    auto* eval = app.add_subcommand("eval", "PSNR / SSIM of a checkpoint against dataset images");
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint stem or run directory")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", eval_split, "train | test | all");
    eval->add_option("--samples", eval_samples)->check(CLI::Range(2, 1 << 16));
    eval->add_option("--res", eval_res, "expected image width; must match the checkpoint")->check(CLI::PositiveNumber);
    eval->add_option("--threads", eval_threads)->check(CLI::PositiveNumber);
    eval->add_option("--out", eval_out)->required();

    // ablate
    std::string ablate_data, ablate_out, ablate_seeds = "0..2";
    std::vector<std::string> ablate_modes{"baseline", "multiview", "singleview", "full"};
    std::vector<double> ablate_portions;
    TrainFlags ablate_flags;
    auto* ablate = app.add_subcommand("ablate", "train every mode (and optional mask portions) over seeds");
    ablate->add_option("--data", ablate_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    ablate->add_option("--seed", ablate_seeds, "N or A..B");
    ablate->add_option("--modes", ablate_modes, "modes to run");
    ablate->add_option("--portions", ablate_portions, "mask portions, each run in multiview mode")
        ->check(CLI::Range(0.0, 1.0));
    ablate->add_option("--out", ablate_out)->required();
    ablate_flags.add(*ablate, false);

    // check-bounds
    PropositionCheckConfig bound_cfg;
    std::uint64_t bound_seed = 0;
    std::string bound_out;
    auto* bounds = app.add_subcommand("check-bounds", "fuzz the two-view appearance and geometry bounds");
    bounds->add_option("--trials", bound_cfg.trials)->check(CLI::NonNegativeNumber);
    bounds->add_option("--epsilon-c", bound_cfg.epsilon_c)->check(CLI::PositiveNumber);
    bounds->add_option("--epsilon-s", bound_cfg.epsilon_s)->check(CLI::PositiveNumber);
    bounds->add_option("--seed", bound_seed);
    bounds->add_option("--out", bound_out)->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        if (app.get_subcommands().empty()) err << app.help();
        return 2;
    }
    const std::vector<std::string> recorded(args.begin() + 1, args.end());

    try {
        if (*gen) {
            scene_cfg.corruption = DepthCorruption{depth_scale, depth_noise, scene_seed};
            const Dataset ds = make_synthetic_dataset(scene_cfg);
            fs::create_directories(scene_out);
            save_dataset(ds, scene_out);
            ordered_json cfg{{"preset", scene_cfg.preset},
                             {"train_views", scene_cfg.train_views},
                             {"test_views", scene_cfg.test_views},
                             {"resolution", scene_cfg.resolution},
                             {"fov", scene_cfg.horizontal_fov},
                             {"radius", scene_cfg.radius},
                             {"elevation", scene_cfg.elevation},
                             {"arc", scene_cfg.arc},
                             {"depth_noise", depth_noise},
                             {"depth_scale", depth_scale}};
            Manifest{"gen-scene", recorded, cfg, scene_seed, list_artifacts(scene_out)}.write(scene_out);
            out << "wrote " << ds.frames.size() << " frames (" << ds.split(Split::train).size() << " train, "
                << ds.split(Split::test).size() << " test) to " << scene_out << "\n";
            return 0;
        }

        if (*masks) {
            mask_cfg.validate();
            const Dataset ds = load_dataset(mask_data);
            const auto frames = ds.split(Split::train);
            if (frames.size() < 2) throw UsageError("derive-masks needs at least two training frames");
            TrainConfig tc;
            tc.mode = TrainMode::multiview_only;
            tc.mask_config = mask_cfg;
            tc.seed = mask_seed;
            tc.threads = mask_threads;
            const auto result = precompute_masks(frames, tc);
            const fs::path dir(mask_out);
            fs::create_directories(dir);
            ordered_json report;
            report["alpha"] = mask_cfg.alpha;
            report["portion"] = mask_cfg.portion;
            report["seed"] = mask_seed;
            report["frames"] = ordered_json::array();
            double mean = 0.0;
            for (std::size_t i = 0; i < frames.size(); ++i) {
                save_mask(result[i], dir / (frames[i]->name + "_mask.png"),
                          MaskExportInfo{mask_cfg.alpha, mask_cfg.portion, mask_seed});
                report["frames"].push_back({{"name", frames[i]->name},
                                            {"in_mask", result[i].count()},
                                            {"coverage", result[i].coverage()}});
                mean += result[i].coverage();
                out << frames[i]->name << ": coverage " << format_double(result[i].coverage()) << "\n";
            }
            report["mean_coverage"] = mean / static_cast<double>(frames.size());
            write_text(dir / "coverage.json", report.dump(2) + "\n");
            ordered_json cfg{{"alpha", mask_cfg.alpha}, {"portion", mask_cfg.portion}, {"data", mask_data}};
            Manifest{"derive-masks", recorded, cfg, mask_seed, list_artifacts(dir)}.write(dir);
            return 0;
        }

        if (*train) {
            const std::vector<std::uint64_t> seeds = parse_seeds(train_seed);
            TrainConfig config = train_flags.build();
            const Dataset ds = load_dataset(train_data);
            const fs::path dir(train_out);
            if (seeds.size() == 1) {
                config.seed = seeds[0];
                const RunSummary s = train_one(config, ds, dir, recorded, out);
                out << "final test_psnr " << format_double(s.psnr) << " test_ssim " << format_double(s.ssim) << "\n";
                return 0;
            }
            fs::create_directories(dir);
            std::vector<RunSummary> runs;
            std::vector<std::string> artifacts;
            for (std::uint64_t seed : seeds) {
                config.seed = seed;
                const std::string sub = "seed_" + std::to_string(seed);
                runs.push_back(train_one(config, ds, dir / sub, recorded, out));
            }
            const std::string table = summary_csv(runs);
            write_text(dir / "summary.csv", table);
            out << table;
            config.seed = seeds.front();
            ordered_json cfg = config_json(config);
            cfg.erase("seed");
            Manifest m{"train", recorded, cfg, std::nullopt, {"summary.csv"}};
            for (std::uint64_t seed : seeds) m.artifacts.push_back("seed_" + std::to_string(seed) + "/manifest.json");
            m.write(dir);
            return 0;
        }

        if (*render || *eval) {
            const bool is_render = static_cast<bool>(*render);
            const Checkpoint ck = load_checkpoint(checkpoint_stem(is_render ? render_ckpt : eval_ckpt));
            const Dataset ds = load_dataset(is_render ? render_data : eval_data);
            const auto frames = select_frames(ds, is_render ? render_split : eval_split);
            if (frames.empty()) throw UsageError("no frames in the requested split");
            SamplingConfig sampling{ck.info.samples_per_ray, false, 0};
            const int samples = is_render ? render_samples : eval_samples;
            if (samples > 0) sampling.samples_per_ray = samples;
            const int workers = resolve_threads(is_render ? render_threads : eval_threads);
            const fs::path dir(is_render ? render_out : eval_out);
            fs::create_directories(dir);
            ordered_json cfg{{"checkpoint", is_render ? render_ckpt : eval_ckpt},
                             {"data", is_render ? render_data : eval_data},
                             {"split", is_render ? render_split : eval_split},
                             {"samples_per_ray", sampling.samples_per_ray}};

            if (is_render) {
                for (const auto* f : frames) {
                    Camera cam = f->camera;
                    if (render_res > 0) {
                        const int h = std::max(1, static_cast<int>(std::lround(
                                                      static_cast<double>(render_res) * cam.height() / cam.width())));
                        cam = rescaled(cam, render_res, h);
                    }
                    const RenderedImage img = render_image(ck.params, cam, ck.info.bounds, sampling,
                                                           checkpoint_options(ck), workers);
                    write_png(dir / (f->name + ".png"), img.color);
                    write_pfm(dir / (f->name + "_depth.pfm"), img.depth);
                    out << "rendered " << f->name << "\n";
                }
                cfg["res"] = render_res;
                Manifest{"render", recorded, cfg, std::nullopt, list_artifacts(dir)}.write(dir);
                return 0;
            }

            if (ds.width() != ck.info.width || ds.height() != ck.info.height) {
                throw UsageError("resolution mismatch: checkpoint was trained at " + std::to_string(ck.info.width) +
                                 "x" + std::to_string(ck.info.height) + " but the dataset is " +
                                 std::to_string(ds.width()) + "x" + std::to_string(ds.height()));
            }
            if (eval_res > 0 && eval_res != ck.info.width) {
                throw UsageError("resolution mismatch: --res " + std::to_string(eval_res) +
                                 " but the checkpoint was trained at width " + std::to_string(ck.info.width));
            }
            std::vector<Image> rendered, reference;
            std::vector<std::string> names;
            for (const auto* f : frames) {
                rendered.push_back(
                    render_image(ck.params, f->camera, ck.info.bounds, sampling, checkpoint_options(ck), workers).color);
                reference.push_back(f->image);
                names.push_back(f->name);
            }
            const MetricReport report = evaluate_images(rendered, reference, names);
            write_text(dir / "metrics.json", report.to_json() + "\n");
            write_text(dir / "metrics.csv", report.to_csv());
            Manifest{"eval", recorded, cfg, std::nullopt, list_artifacts(dir)}.write(dir);
            out << "mean psnr " << format_double(report.mean_psnr) << " ssim " << format_double(report.mean_ssim)
                << " (" << names.size() << " frames)\n";
            return 0;
        }

        if (*ablate) {
            const std::vector<std::uint64_t> seeds = parse_seeds(ablate_seeds);
            const TrainConfig base = ablate_flags.build();
            const Dataset ds = load_dataset(ablate_data);
            const fs::path dir(ablate_out);
            fs::create_directories(dir);

            struct Variant {
                std::string name;
                TrainMode mode;
                double portion;
            };
            std::vector<Variant> variants;
            for (const auto& m : ablate_modes) {
                const TrainMode mode = parse_train_mode(m);
                variants.push_back({to_string(mode), mode, base.mask_config.portion});
            }
            for (double p : ablate_portions) {
                variants.push_back({"portion_" + format_double(p), TrainMode::multiview_only, p});
            }
            if (variants.empty()) throw UsageError("ablate: nothing to run");

            std::string runs_csv = "variant,mode,portion,seed,test_psnr,test_ssim\n";
            std::string medians_csv = "variant,mode,portion,median_test_psnr,median_test_ssim\n";
            std::vector<std::string> artifacts{"runs.csv", "medians.csv"};
            for (const auto& v : variants) {
                std::vector<double> psnrs, ssims;
                for (std::uint64_t seed : seeds) {
                    TrainConfig c = base;
                    c.mode = v.mode;
                    c.mask_config.portion = v.portion;
                    c.seed = seed;
                    const std::string sub = v.name + "_seed_" + std::to_string(seed);
                    const RunSummary s = train_one(c, ds, dir / sub, recorded, out);
                    psnrs.push_back(s.psnr);
                    ssims.push_back(s.ssim);
                    runs_csv += v.name + "," + to_string(v.mode) + "," + format_double(v.portion) + "," +
                                std::to_string(seed) + "," + format_double(s.psnr) + "," + format_double(s.ssim) + "\n";
                    artifacts.push_back(sub + "/manifest.json");
                }
                medians_csv += v.name + "," + to_string(v.mode) + "," + format_double(v.portion) + "," +
                               format_double(median(psnrs)) + "," + format_double(median(ssims)) + "\n";
            }
            write_text(dir / "runs.csv", runs_csv);
            write_text(dir / "medians.csv", medians_csv);
            out << medians_csv;
            ordered_json cfg = config_json(base);
            cfg.erase("seed");
            cfg.erase("mode");
            Manifest{"ablate", recorded, cfg, std::nullopt, artifacts}.write(dir);
            return 0;
        }

        if (*bounds) {
            bound_cfg.validate();
            const BoundCheckReport a = check_appearance_bound(bound_cfg, bound_seed);
            const BoundCheckReport g = check_geometry_bound(bound_cfg, bound_seed);
            const fs::path dir(bound_out);
            fs::create_directories(dir);
            ordered_json report{{"appearance", ordered_json::parse(a.to_json())},
                                {"geometry", ordered_json::parse(g.to_json())}};
            write_text(dir / "bounds.json", report.dump(2) + "\n");
            ordered_json cfg{{"trials", bound_cfg.trials},
                             {"epsilon_c", bound_cfg.epsilon_c},
                             {"epsilon_s", bound_cfg.epsilon_s}};
            Manifest{"check-bounds", recorded, cfg, bound_seed, {"bounds.json"}}.write(dir);
            for (const auto* r : {&a, &g}) {
                out << r->name << ": " << r->trials << " trials, " << r->violations << " violations, worst margin "
                    << format_double(r->worst_margin) << "\n";
            }
            if (!a.passed() || !g.passed()) {
                err << "error: bound violated\n";
                return 1;
            }
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace cfield::cli
