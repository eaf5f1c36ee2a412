#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "cfield/depth_map.hpp"
#include "cfield/geometry.hpp"

namespace cfield {

struct MaskConfig {
    // Depth agreement threshold in world units; a pixel matches when
    // |target depth - reprojected depth| < alpha.
    double alpha = 0.1;
    // Fraction of matched pixels kept by subsample_mask.
    double portion = 1.0;

    void validate() const;
};

struct DepthView {
    const Camera& camera;
    const DepthMap& depth;
};

// The target half of a correspondence: pixel (x, y) of view `view` with the
// observed reprojection error |s_target - s'|.
struct PixelMatch {
    int view = -1;
    int x = -1;
    int y = -1;
    double depth_error = 0.0;

    bool operator==(const PixelMatch&) const = default;
};

// Membership in the correspondence set plus the correspondence map. A
// pixel is in the mask exactly when it carries a match.
class CorrespondenceMask {
public:
    CorrespondenceMask() = default;
    CorrespondenceMask(int width, int height) : matches_(width, height) {}

    int width() const { return matches_.width(); }
    int height() const { return matches_.height(); }

    bool in_mask(int x, int y) const { return matches_(x, y).has_value(); }
    const std::optional<PixelMatch>& match(int x, int y) const { return matches_(x, y); }
    void set_match(int x, int y, const PixelMatch& match) { matches_(x, y) = match; }
    void clear(int x, int y) { matches_(x, y).reset(); }

    std::size_t count() const;
    // count() divided by the total pixel count.
    double coverage() const;

    // 1 for in-mask pixels, 0 otherwise.
    Grid<std::uint8_t> membership() const;

    bool operator==(const CorrespondenceMask&) const = default;

private:
    Grid<std::optional<PixelMatch>> matches_;
};

// Reprojects every valid source pixel into each target view and keeps it
// when the nearest target pixel is in bounds, has valid depth and agrees
// with the reprojected depth to within alpha. The first matching target (in
// order) is recorded. Throws DomainError if any view's dimensions differ
// from the source.
CorrespondenceMask derive_mask(const DepthView& source, std::span<const DepthView> targets,
                               const MaskConfig& config, int threads = 1);

// Keeps round(portion * count) uniformly chosen in-mask pixels.
CorrespondenceMask subsample_mask(const CorrespondenceMask& mask, double portion, std::uint64_t seed);

struct MaskExportInfo {
    double alpha = 0.1;
    double portion = 1.0;
    std::uint64_t seed = 0;
};

// Writes `png_path` (255 in mask, 0 outside) and a sidecar JSON next to it
// with the same stem.
void save_mask(const CorrespondenceMask& mask, const std::filesystem::path& png_path,
               const MaskExportInfo& info);

// Reads a mask PNG back into membership form (correspondence targets are
// not stored on disk).
Grid<std::uint8_t> load_mask_membership(const std::filesystem::path& png_path);

}  // namespace cfield
