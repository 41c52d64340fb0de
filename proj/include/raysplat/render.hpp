// Forward rendering: per-ray maximum-response alpha and the two-phase,
// two-threshold color aggregation with the per-ray index buffer that the
// backward pass replays.
//
// A ray walks its ellipsoid entries front to back. Phase 1 blends colors,
//   C += c_i a_i T,  T *= (1 - a_i),
// until T drops below epsilon1. From then on hits are only recorded (they
// feed the gradient of the last color-contributing Gaussian) while a second
// transmittance T2 accumulates; when T2 drops below epsilon2 the ray stops.
// A -1 sentinel marks early termination when the buffer has room. Finally
// the background enters weighted by the remaining T.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "raysplat/bvh.hpp"
#include "raysplat/camera.hpp"
#include "raysplat/threading.hpp"

namespace raysplat {

template <typename T>
struct RenderConfig {
    T q = T(11.345);          // chi-square(3) quantile at confidence 0.99
    T epsilon1 = T(1e-4);     // phase-1 transmittance threshold
    T epsilon2 = T(1e-4);     // second-phase termination threshold
    std::int32_t max_hits = 512;
    T t_advance_delta = T(0); // 0 = resolve to 1e-5 * scene diagonal
    Vec3<T> background_color{0, 0, 0};

    T resolved_delta(const Bvh<T>& bvh) const {
        return t_advance_delta > T(0) ? t_advance_delta : T(1e-5) * bvh.scene_diagonal;
    }
};

template <typename T>
struct RayPayload {
    Vec3<T> color;                     // final pixel color, background included
    T transmittance = T(1);            // phase-1 running product, frozen in phase 2
    T transmittance2 = T(1);           // second-phase product
    bool second_phase = false;
    std::int32_t hit_count = 0;        // non-sentinel entries in `indices`
    std::int32_t phase1_count = 0;     // hits that contributed color
    std::vector<std::int32_t> indices; // hit buffer, -1 sentinel on early stop
};

template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3<T>> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h) {}

    Vec3<T>& at(int i, int j) { return pixels[std::size_t(j) * width + i]; }
    const Vec3<T>& at(int i, int j) const { return pixels[std::size_t(j) * width + i]; }
};

// Whitened quantities shared by the forward alpha and its derivatives.
// P is the foot-of-perpendicular residual o' - dhat' <dhat', o'>; the
// squared point-line distance is <P, P>.
template <typename T>
struct AlphaContext {
    Mat3<T> rot;        // R
    Vec3<T> inv_scale;  // 1 / activation per axis
    Vec3<T> local_o;    // R^T (o - m)
    Vec3<T> local_d;    // R^T d
    Vec3<T> wo;         // o'
    Vec3<T> wd;         // d'
    Vec3<T> perp;       // P
    T dd = 0;           // <d', d'>
    T od_over_dd = 0;   // <o', d'> / <d', d'>
    T dist2 = 0;        // squared whitened point-line distance
    T alpha_hat = 0;    // sigmoid(opacity_logit)
    T alpha = 0;        // alpha_hat * exp(-dist2 / 2)
};

template <typename T>
AlphaContext<T> alpha_context(const Ray<T>& ray, const Gaussian<T>& g) {
    AlphaContext<T> c;
    c.rot = rotation_from_quaternion(g.rotation);
    const Vec3<T> act = scale_activations(g);
    c.inv_scale = {T(1) / act.x, T(1) / act.y, T(1) / act.z};
    const Mat3<T> rt = c.rot.transposed();
    c.local_o = rt * (ray.origin - g.mean);
    c.local_d = rt * ray.direction;
    c.wo = c.inv_scale.cwise(c.local_o);
    c.wd = c.inv_scale.cwise(c.local_d);
    c.dd = dot(c.wd, c.wd);
    c.od_over_dd = dot(c.wo, c.wd) / c.dd;
    c.perp = c.wo - c.wd * c.od_over_dd;
    c.dist2 = dot(c.perp, c.perp);
    c.alpha_hat = opacity_activation(g);
    c.alpha = c.alpha_hat * std::exp(T(-0.5) * c.dist2);
    return c;
}

// Peak of the ray-normalized Gaussian times the learned opacity:
// alpha = alpha_hat * exp(-D^2 / 2) with D the whitened point-line distance.
template <typename T>
T max_response_alpha(const Ray<T>& ray, const Gaussian<T>& g) {
    return alpha_context(ray, g).alpha;
}

// Color aggregation along one ray, stopping at t_limit (pass +inf for the
// plain renderer; mesh composition passes the first surface hit). Returns
// the payload with color NOT yet including background or surface terms.
template <typename T>
RayPayload<T> trace_gaussians(const Bvh<T>& bvh, const GaussianScene<T>& scene, const Ray<T>& ray,
                              const RenderConfig<T>& cfg, T t_limit) {
    // one traversal instead of one per hit; the cursor walk below visits the
    // same hit sequence repeated next_hit calls would
    thread_local std::vector<Hit<T>> hits;
    collect_hits(bvh, scene, ray, t_limit, hits);

    RayPayload<T> p;
    p.indices.reserve(16);
    const T delta = cfg.resolved_delta(bvh);
    T cursor = T(0);
    std::size_t pos = 0;

    while (p.hit_count < cfg.max_hits) {
        while (pos < hits.size() && hits[pos].t_entry <= cursor) ++pos;
        if (pos == hits.size()) {
            if (std::int32_t(p.indices.size()) < cfg.max_hits) p.indices.push_back(-1);
            break;
        }
        const Hit<T> hit = hits[pos++];
        p.indices.push_back(hit.gaussian_index);
        ++p.hit_count;

        const T alpha = max_response_alpha(ray, scene.gaussians[hit.gaussian_index]);
        if (!p.second_phase) {
            p.color += scene.gaussians[hit.gaussian_index].color * (alpha * p.transmittance);
            p.transmittance *= (T(1) - alpha);
            ++p.phase1_count;
            if (p.transmittance < cfg.epsilon1) p.second_phase = true;
        } else {
            p.transmittance2 *= (T(1) - alpha);
            if (p.transmittance2 < cfg.epsilon2) {
                if (std::int32_t(p.indices.size()) < cfg.max_hits) p.indices.push_back(-1);
                break;
            }
        }
        cursor = hit.t_entry + delta;
    }
    return p;
}

template <typename T>
std::pair<Vec3<T>, RayPayload<T>> trace_ray(const Bvh<T>& bvh, const GaussianScene<T>& scene,
                                            const Ray<T>& ray, const RenderConfig<T>& cfg) {
    RayPayload<T> p = trace_gaussians(bvh, scene, ray, cfg,
                                      std::numeric_limits<T>::infinity());
    p.color += cfg.background_color * p.transmittance;
    return {p.color, std::move(p)};
}

template <typename T>
struct RenderResult {
    Image<T> image;
    std::vector<RayPayload<T>> payloads; // row-major, one per pixel
};

template <typename T>
RenderResult<T> render_with_bvh(const Bvh<T>& bvh, const GaussianScene<T>& scene,
                                const Camera<T>& camera, const RenderConfig<T>& cfg,
                                int threads = 0, bool keep_payloads = true) {
    RenderResult<T> out;
    out.image = Image<T>(camera.width, camera.height);
    if (keep_payloads) out.payloads.resize(out.image.pixels.size());
    parallel_for(camera.height, threads, [&](int j) {
        for (int i = 0; i < camera.width; ++i) {
            auto [color, payload] = trace_ray(bvh, scene, generate_ray(camera, i, j), cfg);
            out.image.at(i, j) = color;
            if (keep_payloads) out.payloads[std::size_t(j) * camera.width + i] = std::move(payload);
        }
    });
    return out;
}

template <typename T>
RenderResult<T> render(const GaussianScene<T>& scene, const Camera<T>& camera,
                       const RenderConfig<T>& cfg, int threads = 0, bool keep_payloads = true) {
    if (scene.gaussians.empty()) {
        RenderResult<T> out;
        out.image = Image<T>(camera.width, camera.height);
        for (auto& px : out.image.pixels) px = cfg.background_color;
        if (keep_payloads) {
            out.payloads.resize(out.image.pixels.size());
            for (auto& p : out.payloads) {
                p.color = cfg.background_color;
                p.indices.push_back(-1);
            }
        }
        return out;
    }
    const Bvh<T> bvh = build_bvh(scene, cfg.q);
    return render_with_bvh(bvh, scene, camera, cfg, threads, keep_payloads);
}

} // namespace raysplat
