// Hand-rolled ADAM over the raw parameter space (14 scalars per Gaussian:
// mean, scale logits, quaternion, opacity logit, color), one learning rate
// per parameter group, textbook bias correction.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "raysplat/backward.hpp"

namespace raysplat {

inline constexpr int kParamsPerGaussian = 14;

template <typename T>
struct AdamState {
    std::vector<T> m; // first moments, kParamsPerGaussian per Gaussian
    std::vector<T> v; // second moments
    std::int64_t t = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    explicit AdamState(std::size_t n_gaussians = 0)
        : m(n_gaussians * kParamsPerGaussian, T(0)), v(n_gaussians * kParamsPerGaussian, T(0)) {}

    std::size_t rows() const { return m.size() / kParamsPerGaussian; }
};

template <typename T>
struct LearningRates {
    T mean = T(1.6e-4);   // multiplied by scene extent by the caller
    T scale_logits = T(5e-3);
    T rotation = T(1e-3);
    T opacity_logit = T(5e-2);
    T color = T(2.5e-3);
};

// One ADAM update of a single scalar; m/v are this parameter's moments and
// t the (already incremented) global step.
template <typename T>
void adam_update_scalar(T& param, T grad, T& m, T& v, std::int64_t t, T lr, T beta1, T beta2,
                        T epsilon) {
    m = beta1 * m + (T(1) - beta1) * grad;
    v = beta2 * v + (T(1) - beta2) * grad * grad;
    const T m_hat = m / (T(1) - std::pow(beta1, T(t)));
    const T v_hat = v / (T(1) - std::pow(beta2, T(t)));
    param -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
}

template <typename T>
void adam_step(GaussianScene<T>& scene, const GradientStore<T>& grads, AdamState<T>& state,
               const LearningRates<T>& lr) {
    const std::size_t n = scene.gaussians.size();
    if (grads.grads.size() != n || state.rows() != n)
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.t;
    const std::int64_t t = state.t;
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian<T>& g = scene.gaussians[i];
        const Grad<T>& d = grads.grads[i];
        T* m = state.m.data() + i * kParamsPerGaussian;
        T* v = state.v.data() + i * kParamsPerGaussian;
        auto upd = [&](T& p, T dg, int slot, T rate) {
            adam_update_scalar(p, dg, m[slot], v[slot], t, rate, state.beta1, state.beta2,
                               state.epsilon);
        };
        upd(g.mean.x, d.mean.x, 0, lr.mean);
        upd(g.mean.y, d.mean.y, 1, lr.mean);
        upd(g.mean.z, d.mean.z, 2, lr.mean);
        upd(g.scale_logits.x, d.scale_logits.x, 3, lr.scale_logits);
        upd(g.scale_logits.y, d.scale_logits.y, 4, lr.scale_logits);
        upd(g.scale_logits.z, d.scale_logits.z, 5, lr.scale_logits);
        upd(g.rotation.r, d.rotation[0], 6, lr.rotation);
        upd(g.rotation.i, d.rotation[1], 7, lr.rotation);
        upd(g.rotation.j, d.rotation[2], 8, lr.rotation);
        upd(g.rotation.k, d.rotation[3], 9, lr.rotation);
        upd(g.opacity_logit, d.opacity_logit, 10, lr.opacity_logit);
        upd(g.color.x, d.color.x, 11, lr.color);
        upd(g.color.y, d.color.y, 12, lr.color);
        upd(g.color.z, d.color.z, 13, lr.color);
    }
}

// Sidecar checkpoint of the optimizer state.
template <typename T>
void save_adam_state(const AdamState<T>& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("adam: cannot open '" + path + "' for writing");
    const char magic[4] = {'R', 'S', 'A', 'D'};
    const std::uint64_t n = state.m.size();
    const std::int64_t t = state.t;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(reinterpret_cast<const char*>(&t), sizeof(t));
    std::vector<double> buf(state.m.begin(), state.m.end());
    f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
    buf.assign(state.v.begin(), state.v.end());
    f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
    if (!f) throw std::runtime_error("adam: write failed for '" + path + "'");
}

template <typename T>
AdamState<T> load_adam_state(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("adam: cannot open '" + path + "'");
    char magic[4];
    std::uint64_t n = 0;
    std::int64_t t = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    f.read(reinterpret_cast<char*>(&t), sizeof(t));
    if (!f || std::string(magic, 4) != "RSAD")
        throw std::runtime_error("adam: bad state file '" + path + "'");
    if (n % kParamsPerGaussian != 0)
        throw std::runtime_error("adam: state size not a multiple of the parameter count");
    AdamState<T> state(n / kParamsPerGaussian);
    state.t = t;
    std::vector<double> buf(n);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * 8));
    for (std::size_t i = 0; i < n; ++i) state.m[i] = T(buf[i]);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * 8));
    for (std::size_t i = 0; i < n; ++i) state.v[i] = T(buf[i]);
    if (!f) throw std::runtime_error("adam: truncated state file '" + path + "'");
    return state;
}

} // namespace raysplat
