// The trainable scene: Gaussian primitives with sigmoid-parametrized scales
// and opacity, rays, and the whitening transform that turns a Gaussian into
// the unit isotropic one.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "raysplat/linalg.hpp"
#include "raysplat/random.hpp"

namespace raysplat {

// One primitive. scale_logits and opacity_logit are pre-sigmoid; color is
// raw and unclamped (clamped only at image write).
template <typename T>
struct Gaussian {
    Vec3<T> mean;
    Vec3<T> scale_logits;
    Quaternion<T> rotation;
    T opacity_logit = 0;
    Vec3<T> color;
};

// Per-axis scale activations, each in (0, 1) world units.
template <typename T>
Vec3<T> scale_activations(const Gaussian<T>& g) {
    return {sigmoid(g.scale_logits.x), sigmoid(g.scale_logits.y), sigmoid(g.scale_logits.z)};
}

template <typename T>
T opacity_activation(const Gaussian<T>& g) {
    return sigmoid(g.opacity_logit);
}

// Sigma = R * S * S * R^T.
template <typename T>
Mat3<T> covariance(const Gaussian<T>& g) {
    const Mat3<T> r = rotation_from_quaternion(g.rotation);
    const Vec3<T> s = scale_activations(g);
    const Mat3<T> ss = Mat3<T>::diagonal(s.cwise(s));
    return r * ss * r.transposed();
}

template <typename T>
struct GaussianScene {
    std::vector<Gaussian<T>> gaussians;
    Vec3<T> background_color;

    std::size_t size() const { return gaussians.size(); }
};

template <typename T>
struct Ray {
    Vec3<T> origin;
    Vec3<T> direction; // need not be unit length
};

// Ray image under S^-1 R^T (. - m): the Gaussian becomes the unit isotropic
// one and its level-Q ellipsoid a sphere of radius sqrt(Q).
template <typename T>
struct WhitenedRay {
    Vec3<T> origin;
    Vec3<T> direction;
};

template <typename T>
WhitenedRay<T> whiten(const Ray<T>& ray, const Gaussian<T>& g) {
    const Mat3<T> rt = rotation_from_quaternion(g.rotation).transposed();
    const Vec3<T> act = scale_activations(g);
    const Vec3<T> inv{T(1) / act.x, T(1) / act.y, T(1) / act.z};
    const Vec3<T> u = rt * (ray.origin - g.mean);
    const Vec3<T> v = rt * ray.direction;
    return {inv.cwise(u), inv.cwise(v)};
}

// Deterministic random scene: means uniform in the box, scale activations at
// scale_fraction of the box diagonal, opacity activation 0.1, colors in [0,1].
template <typename T>
GaussianScene<T> init_random(std::size_t n, const Aabb<T>& box, std::uint64_t seed,
                             T scale_fraction = T(0.01)) {
    if (n < 1) throw std::invalid_argument("init_random: n must be >= 1");
    const Vec3<T> ext = box.extent();
    if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
        throw std::invalid_argument("init_random: degenerate bounding box");

    const T diag = box.diagonal();
    T act = scale_fraction * diag;
    // clip into the sigmoid's open range
    act = std::min(std::max(act, T(1e-6)), T(1) - T(1e-6));
    const T slog = inverse_sigmoid(act);
    const T alog = inverse_sigmoid(T(0.1));

    Rng rng(seed);
    GaussianScene<T> scene;
    scene.gaussians.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian<T> g;
        g.mean = {T(rng.uniform(box.min.x, box.max.x)), T(rng.uniform(box.min.y, box.max.y)),
                  T(rng.uniform(box.min.z, box.max.z))};
        g.scale_logits = {slog, slog, slog};
        Quaternion<T> q{T(rng.normal()), T(rng.normal()), T(rng.normal()), T(rng.normal())};
        while (q.norm2() < T(0.01))
            q = {T(rng.normal()), T(rng.normal()), T(rng.normal()), T(rng.normal())};
        g.rotation = q;
        g.opacity_logit = alog;
        g.color = {T(rng.uniform()), T(rng.uniform()), T(rng.uniform())};
        scene.gaussians.push_back(g);
    }
    return scene;
}

// AABB of the means (scene_extent basis for densification thresholds).
template <typename T>
Aabb<T> means_aabb(const GaussianScene<T>& scene) {
    Aabb<T> box;
    for (const auto& g : scene.gaussians) box.expand(g.mean);
    return box;
}

} // namespace raysplat
