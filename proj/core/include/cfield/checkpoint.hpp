#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cfield/field.hpp"
#include "cfield/geometry.hpp"

namespace cfield {

inline constexpr int kCheckpointFormatVersion = 1;

// Rendering context stored next to the parameters so a checkpoint can be
// rendered and evaluated on its own.
struct CheckpointInfo {
    int width = 0;
    int height = 0;
    RayBounds bounds;
    int samples_per_ray = 64;
    std::optional<Vec3> background;
};

struct Checkpoint {
    FieldParams params;
    CheckpointInfo info;
};

// Writes <stem>.json (format version, field config, layer layout, info)
// and <stem>.bin (little-endian float32 values in FieldParams::flatten()
// order: per layer, row-major weight then bias).
void save_checkpoint(const std::filesystem::path& stem, const FieldParams& params, const CheckpointInfo& info);
Checkpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace cfield
