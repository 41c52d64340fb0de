// Analytic backward pass. Each ray's index buffer is replayed front to back;
// dI/dalpha_i comes from the closed form for the first hit,
//   dI/dalpha_1 = (c_1 - I) / (1 - alpha_1),
// and is then carried in O(1) per hit by the recurrence
//   dI/dalpha_i = [dI/dalpha_{i-1} (1 - alpha_{i-1})
//                  + (c_i - c_{i-1}) prod_{j<i}(1 - alpha_j)] / (1 - alpha_i).
// The background acts as a virtual terminal hit with alpha = 1, which makes
// the closed form the exact derivative of the rendered pixel. When the
// recurrence goes non-finite or the forward pass entered its second phase,
// the affected hit is the last color-contributing one and its dI/dalpha is
// rebuilt by the naive summation over the remaining recorded entries.
//
// dalpha/dparams follows the whitened-ray chain: with P the perpendicular
// residual and D^2 = <P,P>,
//   dalpha/dtheta = -1/2 alpha dD^2/dtheta,
//   dD^2/dtheta   = 2(<P, do'/dtheta> - (<o',d'>/<d',d'>) <P, dd'/dtheta>).
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <vector>

#include "raysplat/render.hpp"
#include "raysplat/ssim.hpp"

namespace raysplat {

// Per-Gaussian gradient slot.
template <typename T>
struct Grad {
    Vec3<T> mean;
    Vec3<T> scale_logits;
    std::array<T, 4> rotation{};
    T opacity_logit = 0;
    Vec3<T> color;

    Grad& operator+=(const Grad& o) {
        mean += o.mean;
        scale_logits += o.scale_logits;
        for (int i = 0; i < 4; ++i) rotation[i] += o.rotation[i];
        opacity_logit += o.opacity_logit;
        color += o.color;
        return *this;
    }

    bool finite() const {
        return is_finite(mean) && is_finite(scale_logits) && std::isfinite(rotation[0]) &&
               std::isfinite(rotation[1]) && std::isfinite(rotation[2]) &&
               std::isfinite(rotation[3]) && std::isfinite(opacity_logit) && is_finite(color);
    }
};

template <typename T>
struct GradientStore {
    std::vector<Grad<T>> grads;
    std::uint64_t dropped_non_finite = 0;

    explicit GradientStore(std::size_t n = 0) : grads(n) {}
    void reset(std::size_t n) {
        grads.assign(n, Grad<T>{});
        dropped_non_finite = 0;
    }
};

// dI/dalpha_1 in closed form. Returns nothing when the pole alpha = 1 (or a
// non-finite value) demands the naive fallback.
template <typename T>
std::optional<Vec3<T>> dI_dalpha_first(const Vec3<T>& c1, const Vec3<T>& pixel, T alpha1) {
    if (alpha1 == T(1)) return std::nullopt;
    const Vec3<T> v = (c1 - pixel) / (T(1) - alpha1);
    if (!is_finite(v)) return std::nullopt;
    return v;
}

// Running state for the O(1) recurrence. prefix = prod_{j<i}(1 - alpha_j)
// for the upcoming hit i; carried = dI/dalpha_{i-1} (1 - alpha_{i-1}).
template <typename T>
struct BlendState {
    Vec3<T> c_prev;
    T alpha_prev = 0;
    Vec3<T> dI_dalpha_prev;
    T prefix = T(1);
};

template <typename T>
std::optional<Vec3<T>> dI_dalpha_next(BlendState<T>& state, const Vec3<T>& c_i, T alpha_i) {
    state.prefix *= (T(1) - state.alpha_prev);
    const Vec3<T> numer =
        state.dI_dalpha_prev * (T(1) - state.alpha_prev) + (c_i - state.c_prev) * state.prefix;
    if (alpha_i == T(1)) return std::nullopt;
    const Vec3<T> v = numer / (T(1) - alpha_i);
    if (!is_finite(v)) return std::nullopt;
    return v;
}

// Naive expansion over the recorded sequence:
//   dI/dalpha_i = c_i prod_{j<i}(1-a_j) - sum_{j>i} c_j a_j prod_{k!=i,k<j}(1-a_k).
template <typename T>
Vec3<T> dI_dalpha_naive(const std::vector<Vec3<T>>& colors, const std::vector<T>& alphas,
                        std::size_t i) {
    T prefix = T(1);
    for (std::size_t j = 0; j < i; ++j) prefix *= (T(1) - alphas[j]);
    Vec3<T> out = colors[i] * prefix;
    T prod = prefix; // prod_{k != i, k < j}(1 - alpha_k), growing with j
    for (std::size_t j = i + 1; j < colors.size(); ++j) {
        out -= colors[j] * (alphas[j] * prod);
        prod *= (T(1) - alphas[j]);
    }
    return out;
}

// Gradient of alpha for one (ray, Gaussian) pair with respect to every
// Gaussian parameter except color.
template <typename T>
struct AlphaGrad {
    T opacity_logit = 0;
    Vec3<T> mean;
    Vec3<T> scale_logits;
    std::array<T, 4> rotation{};
};

template <typename T>
AlphaGrad<T> dalpha_dparams(const Ray<T>& ray, const Gaussian<T>& g) {
    const AlphaContext<T> c = alpha_context(ray, g);
    AlphaGrad<T> out;

    // d alpha / d opacity_logit = sigmoid' * exp(-D^2/2) = alpha (1 - alpha_hat)
    out.opacity_logit = c.alpha * (T(1) - c.alpha_hat);

    // mean: do'/dm_x = -S^-1 R^T e_x, dd'/dm = 0 collapses to alpha R S^-1 P.
    const Vec3<T> w = c.inv_scale.cwise(c.perp); // S^-1 P
    out.mean = (c.rot * w) * c.alpha;

    // scale logits: do'/ds_x = -e^{-s_x} e_x [R^T (o - m)]_x, same shape for d'.
    for (int ax = 0; ax < 3; ++ax) {
        const T es = std::exp(-g.scale_logits[ax]);
        const T d_dist2 = T(2) * (c.perp[ax] * (-es * c.local_o[ax]) -
                                  c.od_over_dd * (c.perp[ax] * (-es * c.local_d[ax])));
        out.scale_logits[ax] = T(-0.5) * c.alpha * d_dist2;
    }

    // quaternion: do'/dq = S^-1 dR^T/dq (o - m), dd'/dq = S^-1 dR^T/dq d.
    // <P, S^-1 M x> = <S^-1 P, M x> lets both terms share one matrix apply.
    const auto drt = drotationT_dq(g.rotation);
    const Vec3<T> om = ray.origin - g.mean;
    const Vec3<T> combined = om - ray.direction * c.od_over_dd;
    for (int qi = 0; qi < 4; ++qi)
        out.rotation[std::size_t(qi)] = -c.alpha * dot(w, drt[std::size_t(qi)] * combined);

    return out;
}

namespace backdetail {

template <typename T>
struct Contribution {
    std::int32_t index;
    Grad<T> grad;
};

// Replays one ray's index buffer and appends its parameter contributions.
template <typename T>
void backward_ray(const Ray<T>& ray, const RayPayload<T>& payload, const GaussianScene<T>& scene,
                  const Vec3<T>& pixel_grad, std::vector<Contribution<T>>& out,
                  std::uint64_t& dropped) {
    if (payload.hit_count == 0) return;

    // Recorded non-sentinel prefix.
    std::vector<std::int32_t> ids;
    ids.reserve(payload.indices.size());
    for (std::int32_t idx : payload.indices) {
        if (idx < 0) break;
        ids.push_back(idx);
    }
    if (ids.empty()) return;

    std::vector<Vec3<T>> colors(ids.size());
    std::vector<T> alphas(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        colors[k] = scene.gaussians[std::size_t(ids[k])].color;
        alphas[k] = max_response_alpha(ray, scene.gaussians[std::size_t(ids[k])]);
    }

    const std::size_t phase1 = std::size_t(payload.phase1_count);
    BlendState<T> state;
    T prefix = T(1); // prod_{j<i}(1 - alpha_j)
    bool recurrence_ok = true;

    for (std::size_t i = 0; i < phase1; ++i) {
        std::optional<Vec3<T>> dI;
        const bool last_meaningful = payload.second_phase && i + 1 == phase1;
        if (recurrence_ok && !last_meaningful) {
            dI = (i == 0) ? dI_dalpha_first(colors[0], payload.color, alphas[0])
                          : dI_dalpha_next(state, colors[i], alphas[i]);
        }
        bool stop_after = false;
        if (!dI) {
            // Last "meaningful" Gaussian: rebuild from the recorded tail.
            dI = dI_dalpha_naive(colors, alphas, i);
            stop_after = true;
        }
        state.c_prev = colors[i];
        state.alpha_prev = alphas[i];
        state.dI_dalpha_prev = *dI;

        Grad<T> g;
        g.color = pixel_grad * (alphas[i] * prefix); // dI/dc_i = alpha_i prod_{j<i}(1-a_j)
        const T upstream = dot(pixel_grad, *dI);
        const AlphaGrad<T> da = dalpha_dparams(ray, scene.gaussians[std::size_t(ids[i])]);
        g.opacity_logit = upstream * da.opacity_logit;
        g.mean = da.mean * upstream;
        g.scale_logits = da.scale_logits * upstream;
        for (int qi = 0; qi < 4; ++qi) g.rotation[std::size_t(qi)] = upstream * da.rotation[std::size_t(qi)];

        if (g.finite()) {
            out.push_back({ids[i], g});
        } else {
            ++dropped;
        }
        if (stop_after) break;
        prefix *= (T(1) - alphas[i]);
    }
}

} // namespace backdetail

// Accumulates dL/dtheta over every pixel of one rendered view. Rays are
// processed in parallel by row; per-row contribution lists merge in row
// order, so totals do not depend on the thread count.
template <typename T>
void backward_image(const std::vector<RayPayload<T>>& payloads, const GaussianScene<T>& scene,
                    const Camera<T>& camera, const Image<T>& pixel_grads,
                    GradientStore<T>& store, int threads = 0) {
    if (payloads.size() != std::size_t(camera.width) * std::size_t(camera.height) ||
        pixel_grads.width != camera.width || pixel_grads.height != camera.height)
        throw std::invalid_argument("backward_image: payload/image shape mismatch");
    if (store.grads.size() != scene.gaussians.size())
        throw std::invalid_argument("backward_image: store size mismatch");
    for (const auto& p : payloads)
        for (std::int32_t idx : p.indices)
            if (idx >= std::int32_t(scene.gaussians.size()))
                throw std::invalid_argument(
                    "backward_image: payload references a Gaussian outside the scene "
                    "(stale payload)");

    std::vector<std::vector<backdetail::Contribution<T>>> rows(std::size_t(camera.height));
    std::vector<std::uint64_t> row_dropped(std::size_t(camera.height), 0);

    parallel_for(camera.height, threads, [&](int j) {
        auto& contribs = rows[std::size_t(j)];
        for (int i = 0; i < camera.width; ++i) {
            const auto& payload = payloads[std::size_t(j) * camera.width + i];
            if (payload.hit_count == 0) continue;
            const Ray<T> ray = generate_ray(camera, i, j);
            backdetail::backward_ray(ray, payload, scene, pixel_grads.at(i, j), contribs,
                                     row_dropped[std::size_t(j)]);
        }
    });

    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (const auto& c : rows[j]) store.grads[std::size_t(c.index)] += c.grad;
        store.dropped_non_finite += row_dropped[j];
    }
}

// Debug dump: per Gaussian a little-endian int32 index followed by 11
// float64 values (mean xyz, scale logits xyz, quaternion rijk, opacity logit).
template <typename T>
void dump_gradient_store(const GradientStore<T>& store, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("gradient dump: cannot open '" + path + "'");
    for (std::size_t i = 0; i < store.grads.size(); ++i) {
        const auto& g = store.grads[i];
        const std::int32_t idx = std::int32_t(i);
        const double row[11] = {double(g.mean.x), double(g.mean.y), double(g.mean.z),
                                double(g.scale_logits.x), double(g.scale_logits.y),
                                double(g.scale_logits.z), double(g.rotation[0]),
                                double(g.rotation[1]), double(g.rotation[2]),
                                double(g.rotation[3]), double(g.opacity_logit)};
        f.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
        f.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
    if (!f) throw std::runtime_error("gradient dump: write failed for '" + path + "'");
}

} // namespace raysplat
