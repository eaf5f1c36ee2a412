#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cfield/field.hpp"
#include "cfield/geometry.hpp"

namespace cfield {

struct SamplingConfig {
    int samples_per_ray = 64;
    bool stratified = true;
    std::uint64_t perturb_seed = 0;

    void validate() const;
};

struct RenderOptions {
    // When set, (1 - opacity) * background is added to the color.
    std::optional<Vec3> background;
};

// Floor on the opacity used to normalize expected depth.
inline constexpr double kDepthWeightFloor = 1e-8;

struct RenderOutput {
    Vec3 color = Vec3::Zero();
    double expected_depth = 0.0;  // along the ray direction
    double opacity = 0.0;
    std::vector<double> weights;
};

// N sample distances in [t_near, t_far], strictly increasing: bin midpoints,
// or one uniform draw per bin when stratified. `stream` selects an
// independent jitter sequence for the same perturb_seed.
std::vector<double> sample_along_ray(const Ray& ray, const SamplingConfig& config, std::uint64_t stream = 0);

// Alpha compositing of per-sample density and color:
// alpha_i = 1 - exp(-sigma_i delta_i), delta_i = t_{i+1} - t_i (the last one
// runs to t_far), T_i = prod_{j<i} (1 - alpha_j), w_i = T_i alpha_i.
RenderOutput composite(std::span<const double> t, std::span<const double> sigma, std::span<const Vec3> colors,
                       double t_far, const RenderOptions& options = {});

struct CompositeGradients {
    std::vector<double> sigma;
    std::vector<Vec3> color;
};

// Gradients of a loss with respect to sigma and color given upstream
// gradients on color, expected depth and opacity. `output` must come from
// composite() on the same inputs.
CompositeGradients composite_backward(std::span<const double> t, std::span<const double> sigma,
                                      std::span<const Vec3> colors, double t_far, const RenderOptions& options,
                                      const RenderOutput& output, const Vec3& color_grad, double depth_grad,
                                      double opacity_grad);

// Renders one ray through the field in double precision. Throws StateError
// when the field yields non-finite density or color.
RenderOutput render_ray(const FieldParams& params, const Ray& ray, const SamplingConfig& sampling,
                        const RenderOptions& options = {}, std::uint64_t stream = 0);

struct RayGradient {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    double opacity = 0.0;
};

// Renders batches of rays with recorded state for a later backward pass.
// Rays are split into `workers` contiguous chunks; gradients are reduced in
// worker order, so results depend only on the inputs and the worker count.
template <typename Scalar>
class BatchRenderer {
public:
    BatchRenderer(const FieldParams& params, SamplingConfig sampling, RenderOptions options, int workers = 1);

    // `streams[i]` drives the stratified jitter of ray i.
    const std::vector<RenderOutput>& render(std::span<const Ray> rays, std::span<const std::uint64_t> streams);

    // Adds parameter gradients for the last render() into `grads`.
    void backward(std::span<const RayGradient> upstream, FieldGradients& grads);

    const std::vector<RenderOutput>& outputs() const { return outputs_; }

private:
    struct Chunk {
        std::size_t begin = 0;
        std::size_t end = 0;
        FieldTape<Scalar> tape;
        std::vector<double> t;      // ray-major, samples_per_ray each
        std::vector<double> sigma;  // same layout
        std::vector<Vec3> color;
        FieldGradients grads;
    };

    const FieldParams* params_;
    FieldNetwork<Scalar> network_;
    SamplingConfig sampling_;
    RenderOptions options_;
    int workers_;
    std::vector<Ray> rays_;
    std::vector<RenderOutput> outputs_;
    std::vector<Chunk> chunks_;
    bool recorded_ = false;
};

extern template class BatchRenderer<float>;
extern template class BatchRenderer<double>;

// Forward-only rendering of every pixel center of `camera`.
struct RenderedImage {
    Image color;
    Grid<float> depth;  // camera-frame z of the expected ray depth
    Grid<float> opacity;
};

RenderedImage render_image(const FieldParams& params, const Camera& camera, const RayBounds& bounds,
                           SamplingConfig sampling, const RenderOptions& options, int workers = 1,
                           Precision precision = Precision::float64);

}  // namespace cfield
