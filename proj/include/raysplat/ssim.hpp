// Training objective: per channel (1 - lambda) L2 + lambda D-SSIM, averaged
// over R, G, B, plus the analytic dL_SSIM/dI expressed as three convolutions
// with the SSIM window.
//
// Window statistics use zero padding without weight renormalization: the
// window "is 0 outside" its support, and weights falling off the image simply
// contribute nothing. The same rule is applied in the forward map and in the
// E/F/G gradient fields, which is what makes the gradient exact.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "raysplat/render.hpp"

namespace raysplat {

// SSIM stability constants for unit peak intensity: c1 = k1^2, c2 = k2^2
// with k1 = 0.01, k2 = 0.03.
template <typename T>
struct SsimConstants {
    static constexpr T c1 = T(0.0001);
    static constexpr T c2 = T(0.0009);
};

template <typename T>
struct SsimWindow {
    int radius = 5;
    std::vector<T> w; // (2r+1)^2 weights, row-major, sum 1

    T at(int m, int n) const { return w[std::size_t(m + radius) * (2 * radius + 1) + (n + radius)]; }
};

template <typename T>
SsimWindow<T> make_gaussian_window(int radius = 5, T sigma = T(1.5)) {
    SsimWindow<T> win;
    win.radius = radius;
    const int size = 2 * radius + 1;
    win.w.resize(std::size_t(size) * size);
    T sum = 0;
    for (int m = -radius; m <= radius; ++m)
        for (int n = -radius; n <= radius; ++n) {
            const T v = std::exp(-(T(m) * T(m) + T(n) * T(n)) / (T(2) * sigma * sigma));
            win.w[std::size_t(m + radius) * size + (n + radius)] = v;
            sum += v;
        }
    for (auto& v : win.w) v /= sum;
    return win;
}

template <typename T>
struct LossConfig {
    T lambda = T(0.2);
    int ssim_radius = 5;
    T ssim_sigma = T(1.5);
};

// Single-channel plane.
template <typename T>
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(int w, int h) : width(w), height(h), v(std::size_t(w) * h) {}

    T& at(int i, int j) { return v[std::size_t(j) * width + i]; }
    T at(int i, int j) const { return v[std::size_t(j) * width + i]; }
};

template <typename T>
Plane<T> channel(const Image<T>& img, int c) {
    Plane<T> p(img.width, img.height);
    for (std::size_t k = 0; k < img.pixels.size(); ++k) p.v[k] = img.pixels[k][int(c)];
    return p;
}

namespace ssimdetail {

template <typename T>
void check_dims(const Plane<T>& a, const Plane<T>& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("ssim: image dimensions mismatch");
}

// Zero-padded windowed sum: out(i,j) = sum_{|m|,|n|<=r} w(m,n) img(i+m, j+n).
template <typename T>
Plane<T> windowed_sum(const Plane<T>& img, const SsimWindow<T>& win) {
    Plane<T> out(img.width, img.height);
    const int r = win.radius;
    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i) {
            T s = 0;
            const int m0 = std::max(-r, -j), m1 = std::min(r, img.height - 1 - j);
            const int n0 = std::max(-r, -i), n1 = std::min(r, img.width - 1 - i);
            for (int m = m0; m <= m1; ++m)
                for (int n = n0; n <= n1; ++n)
                    s += win.at(m, n) * img.at(i + n, j + m);
            out.at(i, j) = s;
        }
    return out;
}

template <typename T>
struct Stats {
    Plane<T> mu_i, mu_r, a, b, c, d; // A,B,C,D fields of the SSIM quotient
};

template <typename T>
Stats<T> ssim_stats(const Plane<T>& img, const Plane<T>& ref, const SsimWindow<T>& win) {
    check_dims(img, ref);
    Stats<T> st;
    st.mu_i = windowed_sum(img, win);
    st.mu_r = windowed_sum(ref, win);

    Plane<T> ii(img.width, img.height), rr(img.width, img.height), ir(img.width, img.height);
    for (std::size_t k = 0; k < img.v.size(); ++k) {
        ii.v[k] = img.v[k] * img.v[k];
        rr.v[k] = ref.v[k] * ref.v[k];
        ir.v[k] = img.v[k] * ref.v[k];
    }
    const Plane<T> m_ii = windowed_sum(ii, win);
    const Plane<T> m_rr = windowed_sum(rr, win);
    const Plane<T> m_ir = windowed_sum(ir, win);

    const T c1 = SsimConstants<T>::c1, c2 = SsimConstants<T>::c2;
    st.a = Plane<T>(img.width, img.height);
    st.b = Plane<T>(img.width, img.height);
    st.c = Plane<T>(img.width, img.height);
    st.d = Plane<T>(img.width, img.height);
    for (std::size_t k = 0; k < img.v.size(); ++k) {
        const T mu = st.mu_i.v[k], mr = st.mu_r.v[k];
        const T var_i = m_ii.v[k] - mu * mu;
        const T var_r = m_rr.v[k] - mr * mr;
        const T cov = m_ir.v[k] - mu * mr;
        st.a.v[k] = T(2) * mu * mr + c1;
        st.b.v[k] = T(2) * cov + c2;
        st.c.v[k] = mu * mu + mr * mr + c1;
        st.d.v[k] = var_i + var_r + c2;
    }
    return st;
}

} // namespace ssimdetail

// Mean squared per-pixel difference on one channel.
template <typename T>
T l2_loss(const Plane<T>& img, const Plane<T>& ref) {
    ssimdetail::check_dims(img, ref);
    T s = 0;
    for (std::size_t k = 0; k < img.v.size(); ++k) {
        const T d = img.v[k] - ref.v[k];
        s += d * d;
    }
    return s / T(img.v.size());
}

template <typename T>
Plane<T> ssim_map(const Plane<T>& img, const Plane<T>& ref, const SsimWindow<T>& win) {
    const auto st = ssimdetail::ssim_stats(img, ref, win);
    Plane<T> out(img.width, img.height);
    for (std::size_t k = 0; k < out.v.size(); ++k)
        out.v[k] = (st.a.v[k] * st.b.v[k]) / (st.c.v[k] * st.d.v[k]);
    return out;
}

// L_D-SSIM = (1 - mean SSIM) / 2.
template <typename T>
T dssim_loss(const Plane<T>& img, const Plane<T>& ref, const SsimWindow<T>& win) {
    const Plane<T> map = ssim_map(img, ref, win);
    T mean = 0;
    for (T v : map.v) mean += v;
    mean /= T(map.v.size());
    return (T(1) - mean) / T(2);
}

// Gradient of the mean-SSIM statistic with respect to each rendered pixel:
// dL_SSIM/dI = (1/wh) ((E*w) + ref (F*w) - img (G*w)). The D-SSIM chain
// factor -lambda/2 is applied by the caller.
template <typename T>
Plane<T> dssim_grad(const Plane<T>& img, const Plane<T>& ref, const SsimWindow<T>& win) {
    const auto st = ssimdetail::ssim_stats(img, ref, win);
    const std::size_t n = img.v.size();
    Plane<T> e(img.width, img.height), f(img.width, img.height), g(img.width, img.height);
    for (std::size_t k = 0; k < n; ++k) {
        const T a = st.a.v[k], b = st.b.v[k], c = st.c.v[k], d = st.d.v[k];
        const T inv = T(2) / (c * c * d * d);
        e.v[k] = inv * (c * d * st.mu_r.v[k] * (b - a) - a * b * st.mu_i.v[k] * (d - c));
        f.v[k] = inv * a * c * d;
        g.v[k] = inv * a * b * c;
    }
    const Plane<T> ew = ssimdetail::windowed_sum(e, win);
    const Plane<T> fw = ssimdetail::windowed_sum(f, win);
    const Plane<T> gw = ssimdetail::windowed_sum(g, win);
    Plane<T> out(img.width, img.height);
    const T scale = T(1) / T(n);
    for (std::size_t k = 0; k < n; ++k)
        out.v[k] = scale * (ew.v[k] + ref.v[k] * fw.v[k] - img.v[k] * gw.v[k]);
    return out;
}

// Total loss over RGB and the per-pixel gradient dL/dI:
//   L = (1/3) sum_ch [(1 - lambda) L2 + lambda (1 - L_SSIM)/2]
//   dL/dI = (1/3) [(1 - lambda) (2/wh)(I - ref) - (lambda/2) dL_SSIM/dI]
template <typename T>
std::pair<T, Image<T>> total_loss_and_pixel_grad(const Image<T>& img, const Image<T>& ref,
                                                 const LossConfig<T>& cfg) {
    if (img.width != ref.width || img.height != ref.height)
        throw std::invalid_argument("loss: image dimensions mismatch");
    const SsimWindow<T> win = make_gaussian_window<T>(cfg.ssim_radius, cfg.ssim_sigma);
    const T lambda = cfg.lambda;
    const T inv_wh = T(1) / T(img.pixels.size());

    T loss = 0;
    Image<T> grad(img.width, img.height);
    for (int c = 0; c < 3; ++c) {
        const Plane<T> pi = channel(img, c);
        const Plane<T> pr = channel(ref, c);
        loss += (T(1) - lambda) * l2_loss(pi, pr) + lambda * dssim_loss(pi, pr, win);
        const Plane<T> sg = dssim_grad(pi, pr, win);
        for (std::size_t k = 0; k < pi.v.size(); ++k) {
            const T g = (T(1) - lambda) * T(2) * inv_wh * (pi.v[k] - pr.v[k]) -
                        lambda / T(2) * sg.v[k];
            grad.pixels[k][int(c)] = g / T(3);
        }
    }
    return {loss / T(3), std::move(grad)};
}

} // namespace raysplat
