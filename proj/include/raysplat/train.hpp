// Training loop: seeded round-robin view sampling, forward render with
// payload retention, loss + pixel gradient, analytic backward, ADAM step,
// periodic densify/prune with a full BVH rebuild, checkpoints and a JSONL
// metrics log.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "raysplat/densify.hpp"
#include "raysplat/ply.hpp"
#include "raysplat/ssim.hpp"
#include "raysplat/log.hpp"

namespace raysplat {

template <typename T>
struct TrainView {
    Camera<T> camera;
    Image<T> image;
};

template <typename T>
struct TrainConfig {
    int iterations = 2000;
    LearningRates<T> lr;            // lr.mean is a coefficient of scene extent
    int densify_interval = 100;
    int densify_start = 500;
    int densify_end = 0;            // 0 = iterations / 2
    DensifyConfig<T> densify;
    int checkpoint_interval = 0;    // 0 = final checkpoint only
    std::uint64_t seed = 0;
    int threads = 0;
    bool densify_enabled = true;
    RenderConfig<T> render;
    LossConfig<T> loss;
};

struct IterationMetrics {
    int iteration = 0;
    double loss = 0;
    double psnr = 0;
    std::size_t n_gaussians = 0;
    double wall_ms = 0;
};

template <typename T>
struct TrainResult {
    GaussianScene<T> scene;
    std::vector<IterationMetrics> metrics;
};

// PSNR with unit peak; identical images report the 99 dB cap.
template <typename T>
T psnr(const Image<T>& img, const Image<T>& ref) {
    if (img.width != ref.width || img.height != ref.height)
        throw std::invalid_argument("psnr: image dimensions mismatch");
    T mse = 0;
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
        const Vec3<T> d = img.pixels[k] - ref.pixels[k];
        mse += dot(d, d);
    }
    mse /= T(img.pixels.size() * 3);
    if (mse <= T(0)) return T(99);
    const T db = T(-10) * std::log10(mse);
    return db > T(99) ? T(99) : db;
}

template <typename T>
T ssim_metric(const Image<T>& img, const Image<T>& ref, int radius = 5, T sigma = T(1.5)) {
    const SsimWindow<T> win = make_gaussian_window<T>(radius, sigma);
    T total = 0;
    for (int c = 0; c < 3; ++c) {
        const Plane<T> map = ssim_map(channel(img, c), channel(ref, c), win);
        T mean = 0;
        for (T v : map.v) mean += v;
        total += mean / T(map.v.size());
    }
    return total / T(3);
}

namespace traindetail {

// Seeded per-epoch permutation; round-robin across epochs.
template <typename T>
struct ViewSampler {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    Rng rng;

    ViewSampler(std::size_t n, std::uint64_t seed) : order(n), rng(seed) {
        std::iota(order.begin(), order.end(), std::size_t(0));
        shuffle();
    }

    void shuffle() {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[std::size_t(rng.below(i))]);
    }

    std::size_t next() {
        if (cursor == order.size()) {
            cursor = 0;
            shuffle();
        }
        return order[cursor++];
    }
};

} // namespace traindetail

// Optional sinks so the CLI can stream metrics/checkpoints; tests pass
// nothing and inspect the returned metrics.
template <typename T>
struct TrainSinks {
    std::FILE* metrics_jsonl = nullptr;
    std::string checkpoint_dir; // empty = no checkpoints
};

template <typename T>
void write_checkpoint(const GaussianScene<T>& scene, const AdamState<T>& adam,
                      const std::string& dir, int iteration) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string stem = dir + "/ckpt_" + std::to_string(iteration);
    save_ply(scene, stem + ".ply");
    save_adam_state(adam, stem + ".adam");
}

template <typename T>
TrainResult<T> train(const std::vector<TrainView<T>>& views, GaussianScene<T> scene,
                     const TrainConfig<T>& cfg, TrainSinks<T> sinks = {}) {
    if (views.empty()) throw std::invalid_argument("train: dataset is empty");
    if (scene.gaussians.empty()) throw std::invalid_argument("train: initial scene is empty");

    TrainResult<T> result;
    result.metrics.reserve(std::size_t(cfg.iterations));

    const T extent0 = std::max(means_aabb(scene).diagonal(), T(1e-6));
    LearningRates<T> lr = cfg.lr;
    lr.mean = cfg.lr.mean * extent0;
    DensifyConfig<T> dcfg = cfg.densify;
    dcfg.mean_lr = lr.mean;

    const int densify_end = cfg.densify_end > 0 ? cfg.densify_end : cfg.iterations / 2;

    AdamState<T> adam(scene.gaussians.size());
    MeanGradAccumulator<T> acc(scene.gaussians.size());
    GradientStore<T> store(scene.gaussians.size());
    traindetail::ViewSampler<T> sampler(views.size(), cfg.seed);
    Rng densify_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const TrainView<T>& view = views[sampler.next()];

        const Bvh<T> bvh = build_bvh(scene, cfg.render.q);
        RenderResult<T> fw =
            render_with_bvh(bvh, scene, view.camera, cfg.render, cfg.threads, true);
        auto [loss, pixel_grads] = total_loss_and_pixel_grad(fw.image, view.image, cfg.loss);
        if (!std::isfinite(loss))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it) +
                                     " (n_gaussians=" + std::to_string(scene.gaussians.size()) +
                                     ")");

        store.reset(scene.gaussians.size());
        backward_image(fw.payloads, scene, view.camera, pixel_grads, store, cfg.threads);
        accumulate_mean_grads(store, acc);
        adam_step(scene, store, adam, lr);

        if (cfg.densify_enabled && it >= cfg.densify_start && it <= densify_end &&
            cfg.densify_interval > 0 && (it - cfg.densify_start) % cfg.densify_interval == 0) {
            const auto stats = densify_and_prune(scene, acc, adam, dcfg, densify_rng);
            RAYSPLAT_LOG_DEBUG("densify @%d: +%zu clone +%zu split -%zu prune -> %zu", it,
                               stats.cloned, stats.split, stats.pruned, scene.gaussians.size());
            if (scene.gaussians.empty())
                throw std::runtime_error("train: densification pruned the whole scene");
        }

        const auto t1 = std::chrono::steady_clock::now();
        IterationMetrics m;
        m.iteration = it;
        m.loss = double(loss);
        m.psnr = double(psnr(fw.image, view.image));
        m.n_gaussians = scene.gaussians.size();
        m.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.metrics.push_back(m);

        if (sinks.metrics_jsonl) {
            std::fprintf(sinks.metrics_jsonl,
                         "{\"iteration\":%d,\"loss\":%.10g,\"psnr\":%.6g,\"n_gaussians\":%zu,"
                         "\"wall_ms\":%.3f}\n",
                         m.iteration, m.loss, m.psnr, m.n_gaussians, m.wall_ms);
        }
        if (!sinks.checkpoint_dir.empty() && cfg.checkpoint_interval > 0 &&
            it % cfg.checkpoint_interval == 0)
            write_checkpoint(scene, adam, sinks.checkpoint_dir, it);
        if (it % 100 == 0)
            RAYSPLAT_LOG_INFO("iter %d loss %.3g psnr %.2f n %zu", it, m.loss, m.psnr,
                              m.n_gaussians);
    }

    if (!sinks.checkpoint_dir.empty()) write_checkpoint(scene, adam, sinks.checkpoint_dir,
                                                        cfg.iterations);
    result.scene = std::move(scene);
    return result;
}

} // namespace raysplat
