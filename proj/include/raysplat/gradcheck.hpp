// Finite-difference verification of the analytic backward pass over the full
// pipeline L(render(scene)). Each scalar parameter is wiggled by +-h and the
// central difference of the loss is compared against the accumulated
// GradientStore entry, per parameter group. Parameters where both sides are
// tiny (|.| < abs_floor) are excluded as numerically indistinguishable from
// zero; everything else must match within rel_tol for the group to pass.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "raysplat/backward.hpp"
#include "raysplat/train.hpp"

namespace raysplat {

template <typename T>
struct GradCheckOptions {
    T h = T(1e-4);
    T rel_tol = T(1e-3);
    T abs_floor = T(1e-8);
    double required_fraction = 0.99;
};

struct GradCheckGroup {
    std::string name;
    std::size_t total = 0;
    std::size_t ok = 0;
    std::size_t excluded = 0;
    double worst_rel = 0;

    double fraction_ok() const {
        const std::size_t considered = total - excluded;
        return considered == 0 ? 1.0 : double(ok) / double(considered);
    }
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;

    bool pass(double required_fraction) const {
        for (const auto& g : groups)
            if (g.fraction_ok() < required_fraction) return false;
        return true;
    }

    void print(std::FILE* out) const {
        std::fprintf(out, "%-12s %8s %8s %9s %12s %6s\n", "group", "params", "ok", "excluded",
                     "worst_rel", "pass");
        for (const auto& g : groups)
            std::fprintf(out, "%-12s %8zu %8zu %9zu %12.3e %6s\n", g.name.c_str(), g.total, g.ok,
                         g.excluded, g.worst_rel,
                         g.fraction_ok() >= 0.99 ? "yes" : "NO");
    }
};

namespace gradcheckdetail {

template <typename T>
T pipeline_loss(const GaussianScene<T>& scene, const Camera<T>& camera, const Image<T>& reference,
                const RenderConfig<T>& rc, const LossConfig<T>& lc, int threads) {
    const RenderResult<T> fw = render(scene, camera, rc, threads, false);
    return total_loss_and_pixel_grad(fw.image, reference, lc).first;
}

template <typename T>
struct ParamRef {
    int group; // 0 mean, 1 scale, 2 rotation, 3 opacity, 4 color
    T* value;
    T analytic;
};

template <typename T>
std::vector<ParamRef<T>> collect_params(GaussianScene<T>& scene, const GradientStore<T>& store) {
    std::vector<ParamRef<T>> out;
    out.reserve(scene.gaussians.size() * kParamsPerGaussian);
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        Gaussian<T>& g = scene.gaussians[i];
        const Grad<T>& d = store.grads[i];
        out.push_back({0, &g.mean.x, d.mean.x});
        out.push_back({0, &g.mean.y, d.mean.y});
        out.push_back({0, &g.mean.z, d.mean.z});
        out.push_back({1, &g.scale_logits.x, d.scale_logits.x});
        out.push_back({1, &g.scale_logits.y, d.scale_logits.y});
        out.push_back({1, &g.scale_logits.z, d.scale_logits.z});
        out.push_back({2, &g.rotation.r, d.rotation[0]});
        out.push_back({2, &g.rotation.i, d.rotation[1]});
        out.push_back({2, &g.rotation.j, d.rotation[2]});
        out.push_back({2, &g.rotation.k, d.rotation[3]});
        out.push_back({3, &g.opacity_logit, d.opacity_logit});
        out.push_back({4, &g.color.x, d.color.x});
        out.push_back({4, &g.color.y, d.color.y});
        out.push_back({4, &g.color.z, d.color.z});
    }
    return out;
}

} // namespace gradcheckdetail

// Checks one (scene, view) pair. `scene` is taken by value: parameters are
// restored after each wiggle, the caller's copy is untouched. When store_out
// is given it receives the analytic GradientStore (for the debug dump).
template <typename T>
GradCheckReport gradcheck_view(GaussianScene<T> scene, const Camera<T>& camera,
                               const Image<T>& reference, const RenderConfig<T>& rc,
                               const LossConfig<T>& lc, const GradCheckOptions<T>& opt,
                               int threads = 0, GradientStore<T>* store_out = nullptr) {
    // analytic side
    const RenderResult<T> fw = render(scene, camera, rc, threads, true);
    const auto [loss, pixel_grads] = total_loss_and_pixel_grad(fw.image, reference, lc);
    (void)loss;
    GradientStore<T> store(scene.gaussians.size());
    backward_image(fw.payloads, scene, camera, pixel_grads, store, threads);
    if (store_out) *store_out = store;

    auto params = gradcheckdetail::collect_params(scene, store);

    GradCheckReport report;
    const char* names[5] = {"mean", "scale_logits", "rotation", "opacity", "color"};
    for (const char* n : names) report.groups.push_back({n, 0, 0, 0, 0.0});

    for (auto& p : params) {
        GradCheckGroup& grp = report.groups[std::size_t(p.group)];
        ++grp.total;
        const T saved = *p.value;
        *p.value = saved + opt.h;
        const T lp = gradcheckdetail::pipeline_loss(scene, camera, reference, rc, lc, threads);
        *p.value = saved - opt.h;
        const T lm = gradcheckdetail::pipeline_loss(scene, camera, reference, rc, lc, threads);
        *p.value = saved;
        const T numeric = (lp - lm) / (T(2) * opt.h);

        if (std::abs(double(numeric)) < double(opt.abs_floor) &&
            std::abs(double(p.analytic)) < double(opt.abs_floor)) {
            ++grp.excluded;
            continue;
        }
        const double denom =
            std::max({std::abs(double(numeric)), std::abs(double(p.analytic)), 1e-12});
        const double rel = std::abs(double(p.analytic) - double(numeric)) / denom;
        grp.worst_rel = std::max(grp.worst_rel, rel);
        if (rel < double(opt.rel_tol)) ++grp.ok;
    }
    return report;
}

// The seeded gradcheck fixture: a ground-truth scene rendered as reference,
// then checked from a jittered copy so the loss surface is non-trivial.
//
// Placement is stratified on a jittered lattice facing the camera so every
// Gaussian stays visible and unoccluded, scales are anisotropic (the
// rotation group would otherwise be degenerate), and opacities stay clear
// of the alpha pole. The render config tightens two knobs relative to the
// production defaults: a larger ellipsoid level q and a tiny enumeration
// advance. Both keep the value discontinuities of hit-set changes (boundary
// entry at alpha_hat e^{-q/2}, near-coincident entry skips) far below what
// a central difference at the fixed step can see, so the check measures the
// smooth gradient itself; the analytic side is independent of either knob.
template <typename T>
GradCheckReport gradcheck_fixture(std::uint64_t seed, std::size_t n_gaussians, int image_size,
                                  const GradCheckOptions<T>& opt, int threads = 0,
                                  GradientStore<T>* store_out = nullptr) {
    Rng rng(seed);
    const int cols = int(std::ceil(std::sqrt(double(n_gaussians))));
    const T cell = T(2) / T(cols);
    GaussianScene<T> target;
    for (std::size_t i = 0; i < n_gaussians; ++i) {
        const int cx = int(i) % cols, cy = int(i) / cols;
        Gaussian<T> g;
        g.mean = {T(-1) + cell * (T(cx) + T(0.5) + T(0.3 * rng.uniform(-1, 1))),
                  T(-1) + cell * (T(cy) + T(0.5) + T(0.3 * rng.uniform(-1, 1))),
                  T(0.4 * rng.uniform(-1, 1))};
        for (int ax = 0; ax < 3; ++ax)
            g.scale_logits[ax] = T(inverse_sigmoid(0.06 * std::exp(0.5 * rng.uniform(-1, 1))));
        do {
            g.rotation = {T(rng.normal()), T(rng.normal()), T(rng.normal()), T(rng.normal())};
        } while (g.rotation.norm2() < T(0.25));
        g.opacity_logit = T(inverse_sigmoid(rng.uniform(0.2, 0.8)));
        g.color = {T(rng.uniform()), T(rng.uniform()), T(rng.uniform())};
        target.gaussians.push_back(g);
    }

    Camera<T> camera = look_at_camera<T>({0, 0, T(-3.2)}, {0, 0, 0}, {0, 1, 0}, T(0.9),
                                         image_size, image_size);
    RenderConfig<T> rc;
    rc.q = T(25);
    rc.t_advance_delta = T(1e-9) * build_bvh(target, rc.q).scene_diagonal;
    LossConfig<T> lc;
    lc.lambda = T(0.2);

    const Image<T> reference = render(target, camera, rc, threads, false).image;

    GaussianScene<T> jittered = target;
    Rng jrng(seed * 77 + 1);
    for (auto& g : jittered.gaussians) {
        g.mean += Vec3<T>{T(jrng.normal()), T(jrng.normal()), T(jrng.normal())} * T(0.02);
        g.color += Vec3<T>{T(jrng.normal()), T(jrng.normal()), T(jrng.normal())} * T(0.08);
    }
    return gradcheck_view<T>(std::move(jittered), camera, reference, rc, lc, opt, threads,
                             store_out);
}

} // namespace raysplat
