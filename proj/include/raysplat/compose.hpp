// Whitted-style composition of a trained Gaussian field with triangle
// meshes. Gaussian blending and mesh hits interleave along each ray: the
// Gaussian aggregation stops at the first surface, whose response (diffuse
// with shadows, mirror recursion, Fresnel-weighted glass) enters the blend
// weighted by the remaining transmittance. Gaussians stay emissive as
// trained; only surfaces are lit, and shadows attenuate through Gaussian
// transmittance and glass tint.
#pragma once

#include <cmath>
#include <limits>

#include "raysplat/mesh.hpp"
#include "raysplat/render.hpp"

namespace raysplat {

template <typename T>
struct PointLight {
    Vec3<T> position;
    Vec3<T> intensity;
};

template <typename T>
struct ComposeConfig {
    RenderConfig<T> render;
    int max_depth = 6;
};

template <typename T>
Vec3<T> reflect(const Vec3<T>& v, const Vec3<T>& n) {
    return v - n * (T(2) * dot(v, n));
}

// Refraction of a unit direction across a unit normal (pointing against the
// incoming direction); eta = ior_from / ior_to. Nothing on total internal
// reflection.
template <typename T>
std::optional<Vec3<T>> refract_dir(const Vec3<T>& v, const Vec3<T>& n, T eta) {
    const T cos_i = -dot(v, n);
    const T k = T(1) - eta * eta * (T(1) - cos_i * cos_i);
    if (k < T(0)) return std::nullopt;
    return v * eta + n * (eta * cos_i - std::sqrt(k));
}

// Schlick's approximation for the reflected fraction.
template <typename T>
T schlick_fresnel(T cos_i, T ior_from, T ior_to) {
    T r0 = (ior_from - ior_to) / (ior_from + ior_to);
    r0 *= r0;
    const T m = T(1) - cos_i;
    return r0 + (T(1) - r0) * m * m * m * m * m;
}

// Transmittance toward a light: 0 behind an opaque surface, tint-filtered
// through glass, soft-attenuated by Gaussians on the segment. Pass a null
// bvh when there is no Gaussian field.
template <typename T>
T shadow_factor(const Vec3<T>& point, const PointLight<T>& light, const Bvh<T>* bvh,
                const GaussianScene<T>& scene, const MeshSet<T>& meshes,
                const RenderConfig<T>& cfg) {
    const Vec3<T> to_light = light.position - point;
    const T dist = norm(to_light);
    if (!(dist > T(0))) return T(1);
    const Ray<T> ray{point, to_light / dist};
    const T t_eps = T(1e-6) * std::max(dist, T(1));

    // surfaces: march through glass, stop at anything opaque
    T tint = T(1);
    T t_from = t_eps;
    while (t_from < dist) {
        const Ray<T> probe{ray.origin + ray.direction * t_from, ray.direction};
        const auto hit = meshes.closest_hit(probe, dist - t_from);
        if (!hit) break;
        const auto& mat = meshes.meshes[std::size_t(hit->mesh)].material;
        if (mat.kind != MaterialKind::glass) return T(0);
        tint *= (mat.tint.x + mat.tint.y + mat.tint.z) / T(3);
        t_from += hit->t + t_eps;
    }

    // gaussians: product of (1 - alpha) over ellipsoid entries on the segment
    T trans = T(1);
    if (bvh && !scene.gaussians.empty()) {
        const T delta = cfg.resolved_delta(*bvh);
        thread_local std::vector<Hit<T>> hits;
        collect_hits(*bvh, scene, ray, dist, hits);
        T cursor = t_eps;
        std::int32_t taken = 0;
        for (const auto& hit : hits) {
            if (hit.t_entry <= cursor) continue;
            if (++taken > cfg.max_hits) break;
            trans *= (T(1) - max_response_alpha(ray, scene.gaussians[hit.gaussian_index]));
            if (trans < cfg.epsilon1) return T(0);
            cursor = hit.t_entry + delta;
        }
    }
    return trans * tint;
}

template <typename T>
Vec3<T> compose_ray(const Ray<T>& ray, const Bvh<T>* bvh, const GaussianScene<T>& scene,
                    const MeshSet<T>& meshes, const std::vector<PointLight<T>>& lights,
                    const ComposeConfig<T>& cfg, int depth) {
    const RenderConfig<T>& rc = cfg.render;
    if (depth > cfg.max_depth) return rc.background_color;

    const auto mesh_hit = meshes.closest_hit(ray, std::numeric_limits<T>::infinity());
    const T t_limit = mesh_hit ? mesh_hit->t : std::numeric_limits<T>::infinity();

    Vec3<T> color;
    T transmittance = T(1);
    if (bvh && !scene.gaussians.empty()) {
        RayPayload<T> p = trace_gaussians(*bvh, scene, ray, rc, t_limit);
        color = p.color;
        transmittance = p.transmittance;
    }

    if (!mesh_hit) return color + rc.background_color * transmittance;

    const auto& mat = meshes.meshes[std::size_t(mesh_hit->mesh)].material;
    const Vec3<T> unit_dir = normalized(ray.direction);
    Vec3<T> n = mesh_hit->normal;
    const bool entering = dot(unit_dir, n) < T(0);
    if (!entering) n = -n; // shade with the normal facing the ray

    const T bump = T(1e-6) * std::max(norm(mesh_hit->point - ray.origin), T(1));
    Vec3<T> surface;
    switch (mat.kind) {
        case MaterialKind::diffuse: {
            Vec3<T> lit;
            for (const auto& light : lights) {
                const Vec3<T> to_light = light.position - mesh_hit->point;
                const T d2 = norm2(to_light);
                if (!(d2 > T(0))) continue;
                const Vec3<T> l = to_light / std::sqrt(d2);
                const T ndotl = dot(n, l);
                if (ndotl <= T(0)) continue;
                const T shadow =
                    shadow_factor(mesh_hit->point + n * bump, light, bvh, scene, meshes, rc);
                lit += light.intensity * (ndotl * shadow);
            }
            surface = mat.albedo.cwise(lit);
            break;
        }
        case MaterialKind::mirror: {
            const Ray<T> r{mesh_hit->point + n * bump, reflect(unit_dir, n)};
            surface = compose_ray(r, bvh, scene, meshes, lights, cfg, depth + 1);
            break;
        }
        case MaterialKind::glass: {
            const T ior_from = entering ? T(1) : mat.ior;
            const T ior_to = entering ? mat.ior : T(1);
            const T cos_i = -dot(unit_dir, n);
            const auto refr = refract_dir(unit_dir, n, ior_from / ior_to);
            const T kr = refr ? schlick_fresnel(cos_i, ior_from, ior_to) : T(1);
            Vec3<T> acc;
            if (kr > T(1e-4)) {
                const Ray<T> r{mesh_hit->point + n * bump, reflect(unit_dir, n)};
                acc += compose_ray(r, bvh, scene, meshes, lights, cfg, depth + 1) * kr;
            }
            if (refr && kr < T(1) - T(1e-4)) {
                const Ray<T> r{mesh_hit->point - n * bump, *refr};
                acc += compose_ray(r, bvh, scene, meshes, lights, cfg, depth + 1) * (T(1) - kr);
            }
            surface = mat.tint.cwise(acc);
            break;
        }
    }
    return color + surface * transmittance;
}

template <typename T>
Image<T> compose_image(const GaussianScene<T>& scene, const MeshSet<T>& meshes,
                       const std::vector<PointLight<T>>& lights, const Camera<T>& camera,
                       const ComposeConfig<T>& cfg, int threads = 0) {
    Image<T> img(camera.width, camera.height);
    Bvh<T> bvh;
    const Bvh<T>* bvh_ptr = nullptr;
    if (!scene.gaussians.empty()) {
        bvh = build_bvh(scene, cfg.render.q);
        bvh_ptr = &bvh;
    }
    parallel_for(camera.height, threads, [&](int j) {
        for (int i = 0; i < camera.width; ++i)
            img.at(i, j) =
                compose_ray(generate_ray(camera, i, j), bvh_ptr, scene, meshes, lights, cfg, 0);
    });
    return img;
}

} // namespace raysplat
