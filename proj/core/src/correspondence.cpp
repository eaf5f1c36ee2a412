#include "cfield/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include "cfield/image_io.hpp"
#include "cfield/parallel.hpp"

namespace cfield {

void MaskConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw DomainError("mask config: alpha must be finite and nonnegative");
    }
    if (!(portion >= 0.0 && portion <= 1.0)) {
        throw DomainError("mask config: portion must lie in [0, 1]");
    }
}

std::size_t CorrespondenceMask::count() const {
    return static_cast<std::size_t>(
        std::count_if(matches_.begin(), matches_.end(), [](const auto& m) { return m.has_value(); }));
}

double CorrespondenceMask::coverage() const {
    return matches_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(matches_.size());
}

Grid<std::uint8_t> CorrespondenceMask::membership() const {
    Grid<std::uint8_t> out(width(), height(), 0);
    for (std::size_t i = 0; i < matches_.size(); ++i) {
        out[i] = matches_[i].has_value() ? 1 : 0;
    }
    return out;
}

namespace {

// Integer pixel whose center is nearest to continuous coordinate c.
int nearest_pixel(double c) { return static_cast<int>(std::floor(c)); }

std::optional<PixelMatch> match_pixel(const DepthView& source, std::span<const DepthView> targets, int x, int y,
                                      double alpha) {
    if (!source.depth.valid(x, y)) {
        return std::nullopt;
    }
    const Vec3 world = unproject(source.camera, x + 0.5, y + 0.5, source.depth.at(x, y));
    for (std::size_t v = 0; v < targets.size(); ++v) {
        const DepthView& target = targets[v];
        const auto proj = try_project(target.camera, world);
        if (!proj) {
            continue;
        }
        const int m = nearest_pixel(proj->u);
        const int n = nearest_pixel(proj->v);
        if (m < 0 || n < 0 || m >= target.depth.width() || n >= target.depth.height()) {
            continue;
        }
        if (!target.depth.valid(m, n)) {
            continue;
        }
        const double err = std::abs(static_cast<double>(target.depth.at(m, n)) - proj->depth);
        if (err < alpha) {
            return PixelMatch{static_cast<int>(v), m, n, err};
        }
    }
    return std::nullopt;
}

}  // namespace

CorrespondenceMask derive_mask(const DepthView& source, std::span<const DepthView> targets,
                               const MaskConfig& config, int threads) {
    config.validate();
    const int w = source.depth.width();
    const int h = source.depth.height();
    if (source.camera.width() != w || source.camera.height() != h) {
        throw DomainError("derive_mask: source depth map does not match its camera");
    }
    for (const DepthView& t : targets) {
        if (t.depth.width() != w || t.depth.height() != h || t.camera.width() != w || t.camera.height() != h) {
            throw DomainError("derive_mask: all views must share image dimensions");
        }
    }
    CorrespondenceMask mask(w, h);
    parallel_chunks(static_cast<std::size_t>(h), threads, [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t row = begin; row < end; ++row) {
            const int y = static_cast<int>(row);
            for (int x = 0; x < w; ++x) {
                if (auto m = match_pixel(source, targets, x, y, config.alpha)) {
                    mask.set_match(x, y, *m);
                }
            }
        }
    });
    return mask;
}

CorrespondenceMask subsample_mask(const CorrespondenceMask& mask, double portion, std::uint64_t seed) {
    if (!(portion >= 0.0 && portion <= 1.0)) {
        throw DomainError("subsample_mask: portion must lie in [0, 1]");
    }
    std::vector<std::size_t> members;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.in_mask(x, y)) {
                members.push_back(static_cast<std::size_t>(y) * static_cast<std::size_t>(mask.width()) +
                                  static_cast<std::size_t>(x));
            }
        }
    }
    const auto keep = static_cast<std::size_t>(std::llround(portion * static_cast<double>(members.size())));
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `keep` entries become a uniform sample.
    for (std::size_t i = 0; i < keep; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
        std::swap(members[i], members[pick(rng)]);
    }
    CorrespondenceMask out(mask.width(), mask.height());
    for (std::size_t i = 0; i < keep; ++i) {
        const int x = static_cast<int>(members[i] % static_cast<std::size_t>(mask.width()));
        const int y = static_cast<int>(members[i] / static_cast<std::size_t>(mask.width()));
        out.set_match(x, y, *mask.match(x, y));
    }
    return out;
}

void save_mask(const CorrespondenceMask& mask, const std::filesystem::path& png_path, const MaskExportInfo& info) {
    Grid<std::uint8_t> gray = mask.membership();
    for (auto& v : gray) {
        v = v != 0 ? 255 : 0;
    }
    write_gray_png(png_path, gray);

    nlohmann::ordered_json sidecar;
    sidecar["alpha"] = info.alpha;
    sidecar["portion"] = info.portion;
    sidecar["seed"] = info.seed;
    sidecar["width"] = mask.width();
    sidecar["height"] = mask.height();
    sidecar["in_mask"] = mask.count();
    sidecar["coverage"] = mask.coverage();
    std::filesystem::path json_path = png_path;
    json_path.replace_extension(".json");
    std::ofstream out(json_path);
    if (!out) {
        throw IoError("cannot open '" + json_path.string() + "' for writing");
    }
    out << sidecar.dump(2) << '\n';
}

Grid<std::uint8_t> load_mask_membership(const std::filesystem::path& png_path) {
    Grid<std::uint8_t> gray = read_gray_png(png_path);
    for (auto& v : gray) {
        v = v >= 128 ? 1 : 0;
    }
    return gray;
}

}  // namespace cfield
