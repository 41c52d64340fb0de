// Densification and pruning between iterations. The criterion is the
// geometric mean gradient: the norm of the MEAN of the accumulated
// world-space d_mean vectors (not the 3DGS screen-space norm accumulator;
// alternating-sign gradients cancel). Over-threshold Gaussians split when
// large (two children sampled from the parent, scale activations / 1.6) and
// clone when small (copy nudged along the descent direction). Opacities are
// never reset.
#pragma once

#include <cstdint>
#include <vector>

#include "raysplat/adam.hpp"
#include "raysplat/random.hpp"

namespace raysplat {

template <typename T>
struct MeanGradAccumulator {
    std::vector<Vec3<T>> sum;       // running sum of d_mean vectors
    std::vector<T> norm_sum;        // running sum of ||d_mean|| per step
    std::vector<std::uint32_t> count;

    explicit MeanGradAccumulator(std::size_t n = 0) : sum(n), norm_sum(n, T(0)), count(n, 0) {}

    void reset(std::size_t n) {
        sum.assign(n, Vec3<T>{});
        norm_sum.assign(n, T(0));
        count.assign(n, 0);
    }

    // ||mean of accumulated d_mean vectors||
    T criterion(std::size_t i) const {
        if (count[i] == 0) return T(0);
        return norm(sum[i] / T(count[i]));
    }

    // mean of per-step gradient norms (alternative criterion)
    T criterion_norm_mean(std::size_t i) const {
        if (count[i] == 0) return T(0);
        return norm_sum[i] / T(count[i]);
    }
};

template <typename T>
void accumulate_mean_grads(const GradientStore<T>& store, MeanGradAccumulator<T>& acc) {
    if (store.grads.size() != acc.sum.size())
        throw std::invalid_argument("accumulate_mean_grads: shape mismatch");
    for (std::size_t i = 0; i < store.grads.size(); ++i) {
        acc.sum[i] += store.grads[i].mean;
        acc.norm_sum[i] += norm(store.grads[i].mean);
        ++acc.count[i];
    }
}

template <typename T>
struct DensifyConfig {
    T grad_threshold = T(2e-6);        // coefficient, multiplied by scene extent
    T split_scale_threshold = T(0.01); // fraction of scene extent
    T prune_opacity_threshold = T(0.005);
    T split_scale_divisor = T(1.6);
    T mean_lr = T(0);                  // clone nudge step (resolved mean lr)
    bool use_grad_norm_mean = false;   // alternative criterion: mean of ||g|| per step
};

struct DensifyStats {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

// Rebuild the scene with clones/splits/prunes and remap the ADAM rows so
// every surviving Gaussian keeps its moments; new rows start at zero. The
// accumulator is reset. Caller rebuilds the BVH.
template <typename T>
DensifyStats densify_and_prune(GaussianScene<T>& scene, MeanGradAccumulator<T>& acc,
                               AdamState<T>& adam, const DensifyConfig<T>& cfg, Rng& rng) {
    const std::size_t n = scene.gaussians.size();
    if (acc.sum.size() != n || adam.rows() != n)
        throw std::invalid_argument("densify_and_prune: shape mismatch");

    const T extent = means_aabb(scene).diagonal();
    const T grad_thresh = cfg.grad_threshold * extent;
    const T split_thresh = cfg.split_scale_threshold * extent;

    GaussianScene<T> out;
    out.background_color = scene.background_color;
    out.gaussians.reserve(n + n / 4);
    AdamState<T> adam_out;
    adam_out.t = adam.t;
    adam_out.beta1 = adam.beta1;
    adam_out.beta2 = adam.beta2;
    adam_out.epsilon = adam.epsilon;
    adam_out.m.reserve(adam.m.size());
    adam_out.v.reserve(adam.v.size());

    auto copy_row = [&](std::size_t i) {
        for (int k = 0; k < kParamsPerGaussian; ++k) {
            adam_out.m.push_back(adam.m[i * kParamsPerGaussian + std::size_t(k)]);
            adam_out.v.push_back(adam.v[i * kParamsPerGaussian + std::size_t(k)]);
        }
    };
    auto zero_row = [&]() {
        adam_out.m.insert(adam_out.m.end(), kParamsPerGaussian, T(0));
        adam_out.v.insert(adam_out.v.end(), kParamsPerGaussian, T(0));
    };

    DensifyStats stats;
    for (std::size_t i = 0; i < n; ++i) {
        const Gaussian<T>& g = scene.gaussians[i];
        if (opacity_activation(g) < cfg.prune_opacity_threshold) {
            ++stats.pruned;
            continue;
        }

        const T crit = cfg.use_grad_norm_mean ? acc.criterion_norm_mean(i) : acc.criterion(i);

        if (crit <= grad_thresh) {
            out.gaussians.push_back(g);
            copy_row(i);
            continue;
        }

        const Vec3<T> act = scale_activations(g);
        const T max_act = std::max(act.x, std::max(act.y, act.z));
        if (max_act > split_thresh) {
            // split: two children sampled from the parent distribution,
            // activations shrunk by the divisor, parent dropped
            const Mat3<T> rs =
                rotation_from_quaternion(g.rotation) * Mat3<T>::diagonal(act);
            Vec3<T> slog;
            for (int ax = 0; ax < 3; ++ax)
                slog[ax] = inverse_sigmoid(act[ax] / cfg.split_scale_divisor);
            for (int child = 0; child < 2; ++child) {
                Gaussian<T> c = g;
                const Vec3<T> z{T(rng.normal()), T(rng.normal()), T(rng.normal())};
                c.mean = g.mean + rs * z;
                c.scale_logits = slog;
                out.gaussians.push_back(c);
                zero_row();
            }
            ++stats.split;
        } else {
            // clone: keep the original, append a copy nudged one descent
            // step along the accumulated mean gradient
            out.gaussians.push_back(g);
            copy_row(i);
            Gaussian<T> c = g;
            c.mean -= (acc.sum[i] / T(std::max<std::uint32_t>(acc.count[i], 1))) * cfg.mean_lr;
            out.gaussians.push_back(c);
            zero_row();
            ++stats.cloned;
        }
    }

    scene = std::move(out);
    adam = std::move(adam_out);
    acc.reset(scene.gaussians.size());
    return stats;
}

} // namespace raysplat
