#include "cfield/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

namespace cfield {

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw DomainError("intrinsics: focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
        throw DomainError("intrinsics: image size must be at least 1x1");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw DomainError("intrinsics: principal point outside the image");
    }
}

Mat3 Intrinsics::matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Mat3 Intrinsics::inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
}

Intrinsics Intrinsics::from_fov(int width, int height, double horizontal_fov_radians) {
    if (!(horizontal_fov_radians > 0.0 && horizontal_fov_radians < M_PI)) {
        throw DomainError("intrinsics: field of view must be in (0, pi)");
    }
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = 0.5 * width / std::tan(0.5 * horizontal_fov_radians);
    k.fy = k.fx;
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    k.validate();
    return k;
}

namespace {

Mat4 rigid_inverse(const Mat4& m) {
    const Mat3 rt = m.topLeftCorner<3, 3>().transpose();
    Mat4 inv = Mat4::Identity();
    inv.topLeftCorner<3, 3>() = rt;
    inv.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
    return inv;
}

}  // namespace

Pose::Pose() : camera_to_world_(Mat4::Identity()), world_to_camera_(Mat4::Identity()) {}

Pose::Pose(const Mat4& camera_to_world) : camera_to_world_(camera_to_world) {
    if (!camera_to_world.allFinite()) {
        throw DomainError("pose: non-finite entries");
    }
    const Mat3 r = camera_to_world.topLeftCorner<3, 3>();
    const double ortho_err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err >= 1e-6) {
        throw DomainError("pose: rotation block is not orthonormal (error " + std::to_string(ortho_err) + ")");
    }
    if (r.determinant() <= 0.0) {
        throw DomainError("pose: rotation determinant must be +1");
    }
    const Eigen::RowVector4d last = camera_to_world.row(3);
    if (last != Eigen::RowVector4d(0.0, 0.0, 0.0, 1.0)) {
        throw DomainError("pose: last row must be [0 0 0 1]");
    }
    world_to_camera_ = rigid_inverse(camera_to_world_);
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 forward = (target - eye).normalized();
    if (!forward.allFinite()) {
        throw DomainError("look_at: eye and target coincide");
    }
    Vec3 down = -up + up.dot(forward) * forward;
    if (down.norm() < 1e-12) {
        throw DomainError("look_at: up vector parallel to viewing direction");
    }
    down.normalize();
    const Vec3 right = down.cross(forward);
    Mat4 c2w = Mat4::Identity();
    c2w.block<3, 1>(0, 0) = right;
    c2w.block<3, 1>(0, 1) = down;
    c2w.block<3, 1>(0, 2) = forward;
    c2w.block<3, 1>(0, 3) = eye;
    return Pose(c2w);
}

Vec3 Pose::to_world(const Vec3& camera_point) const {
    return camera_to_world_.topLeftCorner<3, 3>() * camera_point + camera_to_world_.topRightCorner<3, 1>();
}

Vec3 Pose::to_camera(const Vec3& world_point) const {
    return world_to_camera_.topLeftCorner<3, 3>() * world_point + world_to_camera_.topRightCorner<3, 1>();
}

void RayBounds::validate() const {
    if (!(near > 0.0) || !(far > near) || !std::isfinite(far)) {
        throw DomainError("ray bounds: require 0 < near < far");
    }
}

Ray pixel_ray(const Camera& camera, double u, double v, const RayBounds& bounds) {
    const Intrinsics& k = camera.intrinsics;
    if (!(u >= 0.0 && u < k.width && v >= 0.0 && v < k.height)) {
        throw DomainError("pixel_ray: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") outside the image");
    }
    bounds.validate();
    const Vec3 cam_dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    Ray ray;
    ray.origin = camera.pose.position();
    ray.direction = (camera.pose.rotation() * cam_dir).normalized();
    ray.t_near = bounds.near;
    ray.t_far = bounds.far;
    return ray;
}

Ray pixel_center_ray(const Camera& camera, int x, int y, const RayBounds& bounds) {
    return pixel_ray(camera, x + 0.5, y + 0.5, bounds);
}

Vec3 unproject(const Camera& camera, double u, double v, double depth) {
    if (!(depth > 0.0) || !std::isfinite(depth)) {
        throw DomainError("unproject: depth must be positive and finite");
    }
    const Vec3 cam_point = camera.intrinsics.inverse_matrix() * (depth * Vec3(u, v, 1.0));
    return camera.pose.to_world(cam_point);
}

std::optional<PixelProjection> try_project(const Camera& camera, const Vec3& point) {
    const Vec3 cam = camera.pose.to_camera(point);
    if (!(cam.z() > 0.0)) {
        return std::nullopt;
    }
    const Vec3 h = camera.intrinsics.matrix() * cam;
    return PixelProjection{h.x() / h.z(), h.y() / h.z(), h.z()};
}

PixelProjection project(const Camera& camera, const Vec3& point) {
    if (auto p = try_project(camera, point)) {
        return *p;
    }
    throw BehindCameraError("project: point is not in front of the camera");
}

double depth_per_distance(const Camera& camera, const Vec3& world_direction) {
    return camera.pose.world_to_camera().block<1, 3>(2, 0).dot(world_direction);
}

}  // namespace cfield
