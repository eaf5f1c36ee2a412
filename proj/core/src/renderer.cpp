#include "cfield/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "cfield/error.hpp"
#include "cfield/parallel.hpp"
#include "cfield/random.hpp"

namespace cfield {

void SamplingConfig::validate() const {
    if (samples_per_ray < 2) {
        throw DomainError("sampling: samples_per_ray must be at least 2");
    }
}

std::vector<double> sample_along_ray(const Ray& ray, const SamplingConfig& config, std::uint64_t stream) {
    config.validate();
    if (!(ray.t_near >= 0.0) || !(ray.t_far > ray.t_near) || !std::isfinite(ray.t_far)) {
        throw DomainError("sample_along_ray: require 0 <= t_near < t_far");
    }
    const int n = config.samples_per_ray;
    const double bin = (ray.t_far - ray.t_near) / n;
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double offset = config.stratified ? hashed_uniform(config.perturb_seed, stream, static_cast<std::uint64_t>(i)) : 0.5;
        t[static_cast<std::size_t>(i)] = ray.t_near + (i + offset) * bin;
    }
    return t;
}

namespace {

double sample_delta(std::span<const double> t, std::size_t i, double t_far) {
    return (i + 1 < t.size() ? t[i + 1] : t_far) - t[i];
}

}  // namespace

RenderOutput composite(std::span<const double> t, std::span<const double> sigma, std::span<const Vec3> colors,
                       double t_far, const RenderOptions& options) {
    const std::size_t n = t.size();
    if (sigma.size() != n || colors.size() != n || n == 0) {
        throw DomainError("composite: sample arrays must be non-empty and equally sized");
    }
    RenderOutput out;
    out.weights.resize(n);
    double transmittance = 1.0;
    double depth_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = sigma[i] * sample_delta(t, i, t_far);
        const double alpha = -std::expm1(-tau);
        const double w = transmittance * alpha;
        out.weights[i] = w;
        out.color += w * colors[i];
        out.opacity += w;
        depth_sum += w * t[i];
        transmittance *= std::exp(-tau);
    }
    out.expected_depth = depth_sum / std::max(out.opacity, kDepthWeightFloor);
    if (options.background) {
        out.color += (1.0 - out.opacity) * *options.background;
    }
    return out;
}

CompositeGradients composite_backward(std::span<const double> t, std::span<const double> sigma,
                                      std::span<const Vec3> colors, double t_far, const RenderOptions& options,
                                      const RenderOutput& output, const Vec3& color_grad, double depth_grad,
                                      double opacity_grad) {
    const std::size_t n = t.size();
    if (sigma.size() != n || colors.size() != n || output.weights.size() != n) {
        throw DomainError("composite_backward: inconsistent sample arrays");
    }
    CompositeGradients g;
    g.sigma.assign(n, 0.0);
    g.color.assign(n, Vec3::Zero());

    const double norm = std::max(output.opacity, kDepthWeightFloor);
    const double depth_shift = output.opacity > kDepthWeightFloor ? output.expected_depth : 0.0;
    double weight_common = opacity_grad;
    if (options.background) {
        weight_common -= color_grad.dot(*options.background);
    }

    // g_w[i] = dL/dw_i; then dL/dtau_k = g_w[k] T_{k+1} - sum_{i>k} g_w[i] w_i.
    std::vector<double> gw(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.color[i] = output.weights[i] * color_grad;
        gw[i] = color_grad.dot(colors[i]) + weight_common + depth_grad * (t[i] - depth_shift) / norm;
    }
    double transmittance = 1.0;
    std::vector<double> t_next(n);
    for (std::size_t i = 0; i < n; ++i) {
        transmittance *= std::exp(-sigma[i] * sample_delta(t, i, t_far));
        t_next[i] = transmittance;
    }
    double suffix = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double dtau = gw[k] * t_next[k] - suffix;
        g.sigma[k] = dtau * sample_delta(t, k, t_far);
        suffix += gw[k] * output.weights[k];
    }
    return g;
}

RenderOutput render_ray(const FieldParams& params, const Ray& ray, const SamplingConfig& sampling,
                        const RenderOptions& options, std::uint64_t stream) {
    BatchRenderer<double> renderer(params, sampling, options, 1);
    const std::uint64_t streams[1] = {stream};
    return renderer.render(std::span<const Ray>(&ray, 1), streams).front();
}

template <typename Scalar>
BatchRenderer<Scalar>::BatchRenderer(const FieldParams& params, SamplingConfig sampling, RenderOptions options,
                                     int workers)
    : params_(&params),
      network_(params),
      sampling_(sampling),
      options_(std::move(options)),
      workers_(std::max(1, workers)) {
    sampling_.validate();
}

template <typename Scalar>
const std::vector<RenderOutput>& BatchRenderer<Scalar>::render(std::span<const Ray> rays,
                                                               std::span<const std::uint64_t> streams) {
    if (streams.size() != rays.size()) {
        throw DomainError("BatchRenderer::render: one stream per ray required");
    }
    const auto ns = static_cast<std::size_t>(sampling_.samples_per_ray);
    rays_.assign(rays.begin(), rays.end());
    outputs_.assign(rays.size(), RenderOutput{});
    recorded_ = false;

    const std::size_t n_chunks = std::min<std::size_t>(static_cast<std::size_t>(workers_), std::max<std::size_t>(rays.size(), 1));
    chunks_.resize(n_chunks);
    for (Chunk& chunk : chunks_) {
        chunk.begin = chunk.end = 0;
    }
    parallel_chunks(rays.size(), static_cast<int>(n_chunks), [&](int worker, std::size_t begin, std::size_t end) {
        Chunk& chunk = chunks_[static_cast<std::size_t>(worker)];
        chunk.begin = begin;
        chunk.end = end;
        const std::size_t count = end - begin;
        const auto cols = static_cast<Eigen::Index>(count * ns);
        typename FieldNetwork<Scalar>::Points positions(3, cols);
        typename FieldNetwork<Scalar>::Points directions(3, cols);
        chunk.t.resize(count * ns);
        for (std::size_t r = 0; r < count; ++r) {
            const Ray& ray = rays_[begin + r];
            const std::vector<double> t = sample_along_ray(ray, sampling_, streams[begin + r]);
            for (std::size_t s = 0; s < ns; ++s) {
                const auto col = static_cast<Eigen::Index>(r * ns + s);
                chunk.t[r * ns + s] = t[s];
                positions.col(col) = ray.at(t[s]).template cast<Scalar>();
                directions.col(col) = ray.direction.template cast<Scalar>();
            }
        }
        typename FieldNetwork<Scalar>::Matrix density;
        typename FieldNetwork<Scalar>::Matrix rgb;
        network_.forward(positions, directions, chunk.tape, density, rgb);
        if (!density.allFinite() || !rgb.allFinite()) {
            throw StateError("render: field produced non-finite density or color");
        }
        chunk.sigma.resize(count * ns);
        chunk.color.resize(count * ns);
        for (std::size_t i = 0; i < count * ns; ++i) {
            chunk.sigma[i] = static_cast<double>(density(0, static_cast<Eigen::Index>(i)));
            chunk.color[i] = rgb.col(static_cast<Eigen::Index>(i)).template cast<double>();
        }
        for (std::size_t r = 0; r < count; ++r) {
            const std::span<const double> t(chunk.t.data() + r * ns, ns);
            const std::span<const double> sigma(chunk.sigma.data() + r * ns, ns);
            const std::span<const Vec3> color(chunk.color.data() + r * ns, ns);
            outputs_[begin + r] = composite(t, sigma, color, rays_[begin + r].t_far, options_);
        }
    });
    recorded_ = true;
    return outputs_;
}

template <typename Scalar>
void BatchRenderer<Scalar>::backward(std::span<const RayGradient> upstream, FieldGradients& grads) {
    if (!recorded_) {
        throw StateError("BatchRenderer::backward: no render recorded");
    }
    if (upstream.size() != rays_.size()) {
        throw DomainError("BatchRenderer::backward: one upstream gradient per ray required");
    }
    const auto ns = static_cast<std::size_t>(sampling_.samples_per_ray);
    parallel_chunks(chunks_.size(), static_cast<int>(chunks_.size()), [&](int, std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
            Chunk& chunk = chunks_[c];
            const std::size_t count = chunk.end - chunk.begin;
            if (count == 0) {
                continue;
            }
            const auto cols = static_cast<Eigen::Index>(count * ns);
            typename FieldNetwork<Scalar>::Matrix dsigma(1, cols);
            typename FieldNetwork<Scalar>::Matrix drgb(3, cols);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t ray = chunk.begin + r;
                const RayGradient& up = upstream[ray];
                const std::span<const double> t(chunk.t.data() + r * ns, ns);
                const std::span<const double> sigma(chunk.sigma.data() + r * ns, ns);
                const std::span<const Vec3> color(chunk.color.data() + r * ns, ns);
                const CompositeGradients g = composite_backward(t, sigma, color, rays_[ray].t_far, options_,
                                                                outputs_[ray], up.color, up.depth, up.opacity);
                for (std::size_t s = 0; s < ns; ++s) {
                    const auto col = static_cast<Eigen::Index>(r * ns + s);
                    dsigma(0, col) = static_cast<Scalar>(g.sigma[s]);
                    drgb.col(col) = g.color[s].template cast<Scalar>();
                }
            }
            if (chunk.grads.layers.size() != params_->layers().size()) {
                chunk.grads = params_->make_gradients();
            } else {
                chunk.grads.set_zero();
            }
            network_.backward(chunk.tape, dsigma, drgb, chunk.grads);
        }
    });
    for (const Chunk& chunk : chunks_) {
        if (chunk.end > chunk.begin) {
            grads += chunk.grads;
        }
    }
}

template class BatchRenderer<float>;
template class BatchRenderer<double>;

namespace {

template <typename Scalar>
RenderedImage render_image_impl(const FieldParams& params, const Camera& camera, const RayBounds& bounds,
                                const SamplingConfig& sampling, const RenderOptions& options, int workers) {
    const int w = camera.width();
    const int h = camera.height();
    RenderedImage out{Image(w, h), Grid<float>(w, h), Grid<float>(w, h)};
    BatchRenderer<Scalar> renderer(params, sampling, options, workers);
    constexpr int kRowsPerBatch = 8;
    std::vector<Ray> rays;
    std::vector<std::uint64_t> streams;
    for (int y0 = 0; y0 < h; y0 += kRowsPerBatch) {
        const int y1 = std::min(h, y0 + kRowsPerBatch);
        rays.clear();
        streams.clear();
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                rays.push_back(pixel_center_ray(camera, x, y, bounds));
                streams.push_back(static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(w) + static_cast<std::uint64_t>(x));
            }
        }
        const auto& outputs = renderer.render(rays, streams);
        std::size_t i = 0;
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x, ++i) {
                out.color(x, y) = outputs[i].color;
                out.depth(x, y) = static_cast<float>(outputs[i].expected_depth * depth_per_distance(camera, rays[i].direction));
                out.opacity(x, y) = static_cast<float>(outputs[i].opacity);
            }
        }
    }
    return out;
}

}  // namespace

RenderedImage render_image(const FieldParams& params, const Camera& camera, const RayBounds& bounds,
                           SamplingConfig sampling, const RenderOptions& options, int workers, Precision precision) {
    if (precision == Precision::float32) {
        return render_image_impl<float>(params, camera, bounds, sampling, options, workers);
    }
    return render_image_impl<double>(params, camera, bounds, sampling, options, workers);
}

}  // namespace cfield
