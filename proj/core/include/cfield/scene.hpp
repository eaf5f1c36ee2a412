#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfield/dataset.hpp"
#include "cfield/depth_map.hpp"
#include "cfield/geometry.hpp"

namespace cfield {

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    Vec3 albedo = Vec3::Constant(0.5);
};

struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 half_extent = Vec3::Constant(0.5);
    Vec3 albedo = Vec3::Constant(0.5);
};

// Analytic scene of constant-albedo spheres and axis-aligned boxes with
// view-independent Lambertian shading (flat when light_direction is unset).
// World +y points down, matching the camera frame.
struct SceneSpec {
    std::vector<Sphere> spheres;
    std::vector<Box> boxes;
    Vec3 background = Vec3::Zero();
    // Direction the light travels *from*, i.e. surfaces facing it are lit.
    std::optional<Vec3> light_direction;
    double ambient = 0.35;

    void validate() const;
};

struct SurfaceHit {
    double distance = 0.0;  // along the unit ray direction
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    Vec3 albedo = Vec3::Zero();
};

// Nearest hit with distance > min_distance, if any.
std::optional<SurfaceHit> intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& direction,
                                    double min_distance = 1e-9);

Vec3 shade(const SceneSpec& scene, const SurfaceHit& hit);

// Named scenes: "sphere" (unit sphere at the origin), "spheres3".
SceneSpec preset_scene(const std::string& name);

struct OracleView {
    Image image;
    DepthMap depth;  // camera-frame z of the hit; invalid on background
};

OracleView render_oracle(const SceneSpec& scene, const Camera& camera);

struct DepthCorruption {
    double global_scale = 1.0;
    double multiplicative_noise_std = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Each valid depth is multiplied by global_scale * exp(g), g ~ N(0, std^2).
DepthMap corrupt_depth(const DepthMap& depth, const DepthCorruption& corruption);

// Cameras on a horizontal arc of `radius` around `target` at `elevation`
// radians, spread over `arc` radians starting at `start_angle`.
std::vector<Camera> arc_cameras(const Intrinsics& intrinsics, int count, double radius, double elevation,
                                double start_angle, double arc, const Vec3& target = Vec3::Zero());

struct SyntheticDatasetConfig {
    std::string preset = "spheres3";
    int train_views = 3;
    int test_views = 4;
    int resolution = 64;
    double horizontal_fov = 0.7;  // radians
    double radius = 4.0;
    double elevation = 0.35;  // radians above the horizon
    double arc = 1.6;         // radians spanned by all views
    // Applied to the training depths; test frames keep oracle depth.
    DepthCorruption corruption;
};

// Views on one arc around the origin. With n train and m test views the
// n + m positions are spread evenly; train views take evenly spaced slots
// including both ends and test views fill the gaps in between. Bounds start at
// radius -/+ 2 and widen to cover every visible surface. Training frames carry the (possibly corrupted) depth and,
// when corrupted, the oracle depth as well.
Dataset make_synthetic_dataset(const SyntheticDatasetConfig& config);

}  // namespace cfield
