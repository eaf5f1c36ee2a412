#pragma once

#include <optional>

#include "cfield/grid.hpp"

namespace cfield {

// Pinhole intrinsics. Pixel (u, v) is (column, row); integer pixel (x, y)
// has its center at (x + 0.5, y + 0.5).
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    // Throws DomainError when fx, fy are nonpositive or the principal point
    // lies outside [0, width) x [0, height).
    void validate() const;

    Mat3 matrix() const;
    Mat3 inverse_matrix() const;

    bool operator==(const Intrinsics&) const = default;

    static Intrinsics from_fov(int width, int height, double horizontal_fov_radians);
};

// Rigid camera-to-world transform. Camera frame is x-right, y-down,
// z-forward.
class Pose {
public:
    Pose();
    // Throws DomainError unless the rotation block is orthonormal with
    // determinant +1 and the last row is [0 0 0 1].
    explicit Pose(const Mat4& camera_to_world);

    // Camera at `eye` with +z pointing at `target`; `up` fixes the roll
    // (camera -y is aligned with it as closely as possible).
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

    const Mat4& camera_to_world() const { return camera_to_world_; }
    const Mat4& world_to_camera() const { return world_to_camera_; }
    Mat3 rotation() const { return camera_to_world_.topLeftCorner<3, 3>(); }
    Vec3 position() const { return camera_to_world_.topRightCorner<3, 1>(); }

    Vec3 to_world(const Vec3& camera_point) const;
    Vec3 to_camera(const Vec3& world_point) const;

    bool operator==(const Pose& other) const { return camera_to_world_ == other.camera_to_world_; }

private:
    Mat4 camera_to_world_;
    Mat4 world_to_camera_;
};

struct Camera {
    Intrinsics intrinsics;
    Pose pose;

    int width() const { return intrinsics.width; }
    int height() const { return intrinsics.height; }
    bool operator==(const Camera&) const = default;
};

struct RayBounds {
    double near = 2.0;
    double far = 6.0;

    void validate() const;
    bool operator==(const RayBounds&) const = default;
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    double t_near = 2.0;
    double t_far = 6.0;

    Vec3 at(double t) const { return origin + t * direction; }
};

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

// Ray through continuous pixel coordinate (u, v). Throws DomainError when
// (u, v) is outside [0, width) x [0, height).
Ray pixel_ray(const Camera& camera, double u, double v, const RayBounds& bounds = {});

// Ray through the center of integer pixel (x, y).
Ray pixel_center_ray(const Camera& camera, int x, int y, const RayBounds& bounds = {});

// World point at camera-frame depth `depth` (z, not distance) along pixel
// (u, v): camera_to_world * (depth * K^-1 [u v 1]^T).
Vec3 unproject(const Camera& camera, double u, double v, double depth);

// Pixel coordinates and camera-frame depth s' with s' [u v 1]^T = K * world_to_camera(point).
// Throws BehindCameraError if the point is not in front of the camera.
PixelProjection project(const Camera& camera, const Vec3& point);
std::optional<PixelProjection> try_project(const Camera& camera, const Vec3& point);

// Camera-frame z component of a world-frame unit direction. Multiplying a
// ray distance by it converts distance to depth.
double depth_per_distance(const Camera& camera, const Vec3& world_direction);

}  // namespace cfield
