#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfield/depth_map.hpp"
#include "cfield/geometry.hpp"

namespace cfield {

enum class Split { train, test };

std::string to_string(Split split);
Split parse_split(const std::string& s);

struct PosedFrame {
    std::string name;
    Image image;
    // Depth used for supervision and masks (possibly corrupted).
    std::optional<DepthMap> depth;
    // Uncorrupted depth when the dataset was generated with corruption.
    std::optional<DepthMap> oracle_depth;
    Camera camera;
    Split split = Split::train;
};

struct Dataset {
    std::vector<PosedFrame> frames;
    RayBounds bounds;
    std::optional<Vec3> background;

    std::vector<const PosedFrame*> split(Split which) const;
    int width() const;
    int height() const;
};

// Layout: <dir>/dataset.json plus the PNG images and PFM depths it names.
// dataset.json: {width, height, intrinsics{fx,fy,cx,cy}, near, far,
// background?, frames: [{name, image, depth?, oracle_depth?,
// camera_to_world (16 row-major numbers), split}]}.
// Throws IoError naming the offending file or field.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace cfield
