#include <benchmark/benchmark.h>

#include "cfield/correspondence.hpp"
#include "cfield/metrics.hpp"
#include "cfield/renderer.hpp"
#include "cfield/scene.hpp"
#include "cfield/trainer.hpp"

using namespace cfield;

namespace {

FieldConfig bench_field() {
    FieldConfig c;
    c.hidden_layers = 3;
    c.hidden_width = 64;
    c.color_width = 32;
    c.skip_connection_layer.reset();
    c.encoding.position_frequencies = 6;
    return c;
}

template <typename Scalar>
void BM_FieldForward(benchmark::State& state) {
    const FieldNetwork<Scalar> net(init_params(bench_field(), 1));
    const Eigen::Index n = state.range(0);
    const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> x = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>::Random(3, n);
    const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> d = x.colwise().normalized();
    FieldTape<Scalar> tape;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma, rgb;
    for (auto _ : state) {
        net.forward(x, d, tape, sigma, rgb);
        benchmark::DoNotOptimize(rgb.data());
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldForward<float>)->Arg(4096);
BENCHMARK(BM_FieldForward<double>)->Arg(4096);

template <typename Scalar>
void BM_FieldBackward(benchmark::State& state) {
    const FieldParams p = init_params(bench_field(), 1);
    const FieldNetwork<Scalar> net(p);
    const Eigen::Index n = state.range(0);
    const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> x = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>::Random(3, n);
    const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> d = x.colwise().normalized();
    FieldTape<Scalar> tape;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma, rgb;
    net.forward(x, d, tape, sigma, rgb);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gs = sigma, gc = rgb;
    FieldGradients g = p.make_gradients();
    for (auto _ : state) {
        net.backward(tape, gs, gc, g);
        benchmark::DoNotOptimize(g.layers[0].weight.data());
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldBackward<float>)->Arg(4096);

void BM_RenderBatch(benchmark::State& state) {
    const FieldParams p = init_params(bench_field(), 1);
    const Camera cam{Intrinsics::from_fov(64, 64, 0.7), Pose::look_at(Vec3(0, 0, -4), Vec3::Zero())};
    std::vector<Ray> rays;
    std::vector<std::uint64_t> streams;
    for (int i = 0; i < 256; ++i) {
        rays.push_back(pixel_center_ray(cam, i % 64, i / 4 % 64));
        streams.push_back(static_cast<std::uint64_t>(i));
    }
    std::vector<RayGradient> up(rays.size(), RayGradient{Vec3::Ones(), 0.1, 0.0});
    for (auto _ : state) {
        BatchRenderer<float> r(p, SamplingConfig{32, true, 0}, {});
        r.render(rays, streams);
        FieldGradients g = p.make_gradients();
        r.backward(up, g);
        benchmark::DoNotOptimize(g.layers[0].weight.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(rays.size()));
}
BENCHMARK(BM_RenderBatch);

void BM_TrainStep(benchmark::State& state) {
    static const Dataset ds = make_synthetic_dataset(SyntheticDatasetConfig{});
    TrainConfig c;
    c.field = bench_field();
    c.rays_per_batch = 256;
    c.patches_per_batch = 2;
    c.sampling.samples_per_ray = 32;
    c.threads = 1;
    Trainer t(ds, c);
    int it = 1;
    for (auto _ : state) t.train_step(t.sample_batch(it++));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_DeriveMask(benchmark::State& state) {
    const SceneSpec scene = preset_scene("spheres3");
    const auto cams = arc_cameras(Intrinsics::from_fov(64, 64, 0.7), 2, 4.0, 0.3, -0.4, 0.8);
    const DepthMap a = render_oracle(scene, cams[0]).depth;
    const DepthMap b = render_oracle(scene, cams[1]).depth;
    const DepthView targets[] = {{cams[1], b}};
    for (auto _ : state) {
        auto m = derive_mask({cams[0], a}, targets, MaskConfig{});
        benchmark::DoNotOptimize(m.count());
    }
}
BENCHMARK(BM_DeriveMask);

void BM_Ssim(benchmark::State& state) {
    Image a(64, 64, Vec3::Constant(0.3));
    Image b(64, 64, Vec3::Constant(0.4));
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

}  // namespace

BENCHMARK_MAIN();
