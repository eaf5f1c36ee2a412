#include "cfield/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cfield/error.hpp"
#include "cfield/random.hpp"

namespace cfield {

namespace {

bool in_unit_cube(const Vec3& c) { return c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0; }

}  // namespace

void SceneSpec::validate() const {
    for (const auto& s : spheres) {
        if (!(s.radius > 0.0) || !in_unit_cube(s.albedo)) {
            throw DomainError("scene: spheres need positive radius and albedo in [0,1]^3");
        }
    }
    for (const auto& b : boxes) {
        if (!(b.half_extent.minCoeff() > 0.0) || !in_unit_cube(b.albedo)) {
            throw DomainError("scene: boxes need positive extent and albedo in [0,1]^3");
        }
    }
    if (!in_unit_cube(background)) {
        throw DomainError("scene: background must lie in [0,1]^3");
    }
    if (light_direction && !(light_direction->norm() > 0.0)) {
        throw DomainError("scene: light direction must be nonzero");
    }
    if (!(ambient >= 0.0 && ambient <= 1.0)) {
        throw DomainError("scene: ambient must lie in [0, 1]");
    }
}

std::optional<SurfaceHit> intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& direction,
                                    double min_distance) {
    std::optional<SurfaceHit> best;
    auto consider = [&](double t, const Vec3& normal, const Vec3& albedo) {
        if (t > min_distance && (!best || t < best->distance)) {
            best = SurfaceHit{t, origin + t * direction, normal, albedo};
        }
    };
    for (const auto& s : scene.spheres) {
        const Vec3 oc = origin - s.center;
        const double b = oc.dot(direction);
        const double c = oc.squaredNorm() - s.radius * s.radius;
        const double disc = b * b - c;
        if (disc < 0.0) {
            continue;
        }
        const double root = std::sqrt(disc);
        for (const double t : {-b - root, -b + root}) {
            if (t > min_distance) {
                consider(t, (origin + t * direction - s.center) / s.radius, s.albedo);
                break;
            }
        }
    }
    for (const auto& box : scene.boxes) {
        const Vec3 lo = box.center - box.half_extent;
        const Vec3 hi = box.center + box.half_extent;
        double t_enter = -std::numeric_limits<double>::infinity();
        double t_exit = std::numeric_limits<double>::infinity();
        int enter_axis = -1;
        int exit_axis = -1;
        bool miss = false;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(direction[a]) < 1e-300) {
                if (origin[a] < lo[a] || origin[a] > hi[a]) {
                    miss = true;
                    break;
                }
                continue;
            }
            double t0 = (lo[a] - origin[a]) / direction[a];
            double t1 = (hi[a] - origin[a]) / direction[a];
            if (t0 > t1) {
                std::swap(t0, t1);
            }
            if (t0 > t_enter) {
                t_enter = t0;
                enter_axis = a;
            }
            if (t1 < t_exit) {
                t_exit = t1;
                exit_axis = a;
            }
        }
        if (miss || t_enter > t_exit) {
            continue;
        }
        const bool outside = t_enter > min_distance;
        const double t = outside ? t_enter : t_exit;
        const int axis = outside ? enter_axis : exit_axis;
        if (axis < 0) {
            continue;
        }
        Vec3 normal = Vec3::Zero();
        normal[axis] = direction[axis] > 0.0 ? -1.0 : 1.0;
        if (!outside) {
            normal = -normal;
        }
        consider(t, normal, box.albedo);
    }
    return best;
}

Vec3 shade(const SceneSpec& scene, const SurfaceHit& hit) {
    if (!scene.light_direction) {
        return hit.albedo;
    }
    const double lambert = std::max(0.0, hit.normal.dot(scene.light_direction->normalized()));
    const Vec3 c = hit.albedo * (scene.ambient + (1.0 - scene.ambient) * lambert);
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

SceneSpec preset_scene(const std::string& name) {
    SceneSpec s;
    if (name == "sphere") {
        s.spheres.push_back({Vec3::Zero(), 1.0, Vec3(0.8, 0.3, 0.2)});
        s.light_direction = Vec3(0.3, -1.0, -0.5);
        return s;
    }
    if (name == "spheres3") {
        s.spheres.push_back({Vec3(-0.65, -0.05, 0.05), 0.5, Vec3(0.85, 0.25, 0.2)});
        s.spheres.push_back({Vec3(0.6, 0.1, 0.25), 0.42, Vec3(0.2, 0.75, 0.3)});
        s.spheres.push_back({Vec3(0.05, 0.25, -0.55), 0.38, Vec3(0.25, 0.35, 0.9)});
        s.boxes.push_back({Vec3(0.0, 0.65, 0.0), Vec3(1.5, 0.1, 1.5), Vec3(0.75, 0.7, 0.6)});
        s.light_direction = Vec3(0.35, -1.0, -0.4);
        return s;
    }
    if (name == "spheres3_studio") {
        // The same spheres in front of a floor and three walls, so that
        // every pixel of the default arc hits a surface.
        s = preset_scene("spheres3");
        s.boxes.clear();
        s.boxes.push_back({Vec3(0.0, 0.65, 0.3), Vec3(3.2, 0.1, 3.0), Vec3(0.75, 0.7, 0.6)});
        s.boxes.push_back({Vec3(0.0, -1.2, 2.4), Vec3(3.6, 2.0, 0.2), Vec3(0.55, 0.62, 0.72)});
        s.boxes.push_back({Vec3(-2.4, -1.2, 0.9), Vec3(0.2, 2.0, 1.7), Vec3(0.72, 0.58, 0.5)});
        s.boxes.push_back({Vec3(2.4, -1.2, 0.9), Vec3(0.2, 2.0, 1.7), Vec3(0.5, 0.68, 0.55)});
        return s;
    }
    throw ConfigError("unknown scene preset '" + name + "' (expected sphere, spheres3 or spheres3_studio)");
}

OracleView render_oracle(const SceneSpec& scene, const Camera& camera) {
    scene.validate();
    camera.intrinsics.validate();
    const int w = camera.width();
    const int h = camera.height();
    OracleView view{Image(w, h, scene.background), DepthMap(w, h)};
    const Vec3 forward = camera.pose.rotation().col(2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Ray ray = pixel_center_ray(camera, x, y);
            const auto hit = intersect(scene, ray.origin, ray.direction);
            if (!hit) {
                continue;
            }
            view.image(x, y) = shade(scene, *hit);
            const double z = (hit->point - ray.origin).dot(forward);
            if (z > 0.0 && std::isfinite(z)) {
                view.depth.set(x, y, static_cast<float>(z));
            }
        }
    }
    return view;
}

void DepthCorruption::validate() const {
    if (!(global_scale > 0.0) || !std::isfinite(global_scale)) {
        throw DomainError("depth corruption: global_scale must be positive");
    }
    if (!(multiplicative_noise_std >= 0.0) || !std::isfinite(multiplicative_noise_std)) {
        throw DomainError("depth corruption: noise std must be nonnegative");
    }
}

DepthMap corrupt_depth(const DepthMap& depth, const DepthCorruption& corruption) {
    corruption.validate();
    DepthMap out = depth;
    std::mt19937_64 rng(corruption.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (!depth.valid(x, y)) {
                continue;
            }
            const double g = corruption.multiplicative_noise_std > 0.0 ? corruption.multiplicative_noise_std * noise(rng) : 0.0;
            out.set(x, y, static_cast<float>(depth.at(x, y) * corruption.global_scale * std::exp(g)));
        }
    }
    return out;
}

std::vector<Camera> arc_cameras(const Intrinsics& intrinsics, int count, double radius, double elevation,
                                double start_angle, double arc, const Vec3& target) {
    if (count < 1 || !(radius > 0.0)) {
        throw DomainError("arc_cameras: need at least one camera and a positive radius");
    }
    intrinsics.validate();
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        const double a = count == 1 ? start_angle : start_angle + arc * i / (count - 1);
        // World +y points down (as in the camera frame); angle 0 sits on -z.
        const Vec3 eye = target + radius * Vec3(std::cos(elevation) * std::sin(a), -std::sin(elevation),
                                                -std::cos(elevation) * std::cos(a));
        cams.push_back({intrinsics, Pose::look_at(eye, target, -Vec3::UnitY())});
    }
    return cams;
}

}  // namespace cfield

namespace cfield {

Dataset make_synthetic_dataset(const SyntheticDatasetConfig& config) {
    if (config.train_views < 1 || config.test_views < 0) {
        throw DomainError("need at least one training view and a nonnegative test view count");
    }
    if (config.resolution < 1) throw DomainError("resolution must be positive");
    if (!(config.radius > 2.0)) throw DomainError("radius must exceed the near bound of 2 units inside it");
    const SceneSpec scene = preset_scene(config.preset);
    const int total = config.train_views + config.test_views;
    const Intrinsics k = Intrinsics::from_fov(config.resolution, config.resolution, config.horizontal_fov);
    const auto cams = arc_cameras(k, total, config.radius, config.elevation, -config.arc / 2, config.arc);

    std::vector<int> is_train(static_cast<std::size_t>(total), 0);
    for (int i = 0; i < config.train_views; ++i) {
        const int slot = config.train_views == 1
                             ? (total - 1) / 2
                             : static_cast<int>(std::lround(static_cast<double>(i) * (total - 1) /
                                                            (config.train_views - 1)));
        is_train[static_cast<std::size_t>(slot)] = 1;
    }
    const bool corrupted = config.corruption.global_scale != 1.0 || config.corruption.multiplicative_noise_std > 0.0;

    Dataset ds;
    ds.bounds = RayBounds{config.radius - 2.0, config.radius + 2.0};
    std::vector<OracleView> views;
    for (const auto& cam : cams) views.push_back(render_oracle(scene, cam));
    // Widen the bounds when a surface lies outside them (walls of a studio scene).
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const Camera& cam = cams[i];
        const Vec3 forward = cam.pose.rotation().col(2);
        for (int y = 0; y < cam.height(); ++y) {
            for (int x = 0; x < cam.width(); ++x) {
                if (!views[i].depth.valid(x, y)) continue;
                const double t = views[i].depth.at(x, y) / pixel_center_ray(cam, x, y).direction.dot(forward);
                ds.bounds.near = std::min(ds.bounds.near, 0.9 * t);
                ds.bounds.far = std::max(ds.bounds.far, 1.05 * t);
            }
        }
    }
    ds.background = scene.background;
    int train_index = 0;
    int test_index = 0;
    for (int i = 0; i < total; ++i) {
        OracleView& v = views[static_cast<std::size_t>(i)];
        PosedFrame f;
        f.camera = cams[static_cast<std::size_t>(i)];
        f.image = std::move(v.image);
        if (is_train[static_cast<std::size_t>(i)]) {
            f.split = Split::train;
            f.name = "train_" + std::to_string(train_index);
            if (corrupted) {
                DepthCorruption c = config.corruption;
                c.seed = hash_combine(config.corruption.seed, static_cast<std::uint64_t>(train_index));
                f.depth = corrupt_depth(v.depth, c);
                f.oracle_depth = std::move(v.depth);
            } else {
                f.depth = std::move(v.depth);
            }
            ++train_index;
        } else {
            f.split = Split::test;
            f.name = "test_" + std::to_string(test_index++);
            f.depth = std::move(v.depth);
        }
        ds.frames.push_back(std::move(f));
    }
    return ds;
}

}  // namespace cfield
