// Minimal 3D linear algebra for the Gaussian ray tracer: vectors, 3x3
// matrices, quaternion -> rotation conversion and its four analytic
// derivatives. Everything is a small value type templated on the scalar
// so the same code runs in float (render path) and double (tests, oracles).
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace raysplat {

template <typename T>
struct Vec3 {
    T x = 0, y = 0, z = 0;

    constexpr Vec3() = default;
    constexpr Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(T s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(T s) { x *= s; y *= s; z *= s; return *this; }
    constexpr bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    // Componentwise product; used for per-axis scaling.
    constexpr Vec3 cwise(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }

    constexpr T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

template <typename T> constexpr Vec3<T> operator*(T s, const Vec3<T>& v) { return v * s; }

template <typename T> constexpr T dot(const Vec3<T>& a, const Vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T> constexpr Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T> T norm(const Vec3<T>& v) { return std::sqrt(dot(v, v)); }
template <typename T> constexpr T norm2(const Vec3<T>& v) { return dot(v, v); }

template <typename T> Vec3<T> normalized(const Vec3<T>& v) { return v / norm(v); }

template <typename T> bool is_finite(const Vec3<T>& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

template <typename T> constexpr Vec3<T> cwise_min(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}
template <typename T> constexpr Vec3<T> cwise_max(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}

// Row-major 3x3 matrix.
template <typename T>
struct Mat3 {
    std::array<T, 9> m{};

    static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
    static constexpr Mat3 diagonal(const Vec3<T>& d) {
        return Mat3{{d.x, 0, 0, 0, d.y, 0, 0, 0, d.z}};
    }

    constexpr T operator()(int r, int c) const { return m[3 * r + c]; }
    T& operator()(int r, int c) { return m[3 * r + c]; }

    constexpr Mat3 transposed() const {
        return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }

    constexpr Vec3<T> row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
    constexpr Vec3<T> col(int c) const { return {m[c], m[c + 3], m[c + 6]}; }

    constexpr Vec3<T> operator*(const Vec3<T>& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    constexpr Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                T s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    constexpr Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    constexpr Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    constexpr Mat3 operator*(T s) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }

    constexpr T det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    // Adjugate-based inverse; fine for the well-conditioned matrices we build.
    Mat3 inverse() const {
        const T d = det();
        Mat3 r;
        r.m = {m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
               m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
               m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
        for (auto& v : r.m) v /= d;
        return r;
    }
};

// Rotation parametrized by a possibly non-unit quaternion. The conversion
// below normalizes through the s factor, so the stored coefficients are
// free parameters for the optimizer and are never renormalized.
template <typename T>
struct Quaternion {
    T r = 1, i = 0, j = 0, k = 0;

    constexpr Quaternion() = default;
    constexpr Quaternion(T r_, T i_, T j_, T k_) : r(r_), i(i_), j(j_), k(k_) {}

    constexpr T norm2() const { return r * r + i * i + j * j + k * k; }
};

template <typename T> bool is_finite(const Quaternion<T>& q) {
    return std::isfinite(q.r) && std::isfinite(q.i) && std::isfinite(q.j) && std::isfinite(q.k);
}

// Axis-aligned box. Empty() starts inverted so expand() can build it up.
template <typename T>
struct Aabb {
    Vec3<T> min{std::numeric_limits<T>::max(), std::numeric_limits<T>::max(),
                std::numeric_limits<T>::max()};
    Vec3<T> max{std::numeric_limits<T>::lowest(), std::numeric_limits<T>::lowest(),
                std::numeric_limits<T>::lowest()};

    constexpr Aabb() = default;
    constexpr Aabb(const Vec3<T>& lo, const Vec3<T>& hi) : min(lo), max(hi) {}

    void expand(const Vec3<T>& p) { min = cwise_min(min, p); max = cwise_max(max, p); }
    void expand(const Aabb& b) { min = cwise_min(min, b.min); max = cwise_max(max, b.max); }
    constexpr Vec3<T> extent() const { return max - min; }
    constexpr Vec3<T> center() const { return (min + max) * T(0.5); }
    T diagonal() const { return norm(extent()); }
    constexpr bool contains(const Vec3<T>& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
               p.z <= max.z;
    }
};

template <typename T> T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

template <typename T> T inverse_sigmoid(T y) { return std::log(y / (T(1) - y)); }

namespace detail {

template <typename T>
void check_quaternion(const Quaternion<T>& q) {
    if (!(q.norm2() > T(0)) || !is_finite(q))
        throw std::invalid_argument("quaternion must be nonzero and finite");
}

} // namespace detail

// R(q) for an arbitrary nonzero quaternion. The s = 2/|q|^2 factor makes the
// map invariant under scaling of q, so R is orthonormal with det +1 even for
// unnormalized coefficients.
template <typename T>
Mat3<T> rotation_from_quaternion(const Quaternion<T>& q) {
    detail::check_quaternion(q);
    const T s = T(2) / q.norm2();
    const T a = q.r, b = q.i, c = q.j, d = q.k;
    const T bs = b * s, cs = c * s, ds = d * s;
    const T ab = a * bs, ac = a * cs, ad = a * ds;
    const T bb = b * bs, bc = b * cs, bd = b * ds;
    const T cc = c * cs, cd = c * ds, dd = d * ds;
    return Mat3<T>{{T(1) - cc - dd, bc - ad, bd + ac,
                    bc + ad, T(1) - bb - dd, cd - ab,
                    bd - ac, cd + ab, T(1) - bb - cc}};
}

// The four matrices dR^T/dq_{r,i,j,k}. Each is the transpose of dR/dq_*, which
// is what assembles in the chain rule for the whitened ray derivatives.
template <typename T>
std::array<Mat3<T>, 4> drotationT_dq(const Quaternion<T>& q) {
    detail::check_quaternion(q);
    const T s = T(2) / q.norm2();
    const T a = q.r, b = q.i, c = q.j, d = q.k;
    const T aa = a * a * s, bb = b * b * s, cc = c * c * s, dd = d * d * s;
    const T ab = a * b * s, cd = c * d * s;

    // dR/dq_r
    const Mat3<T> dr{{s * a * ((1 - aa) + (1 - bb)), s * (-d * (1 - aa) - ab * c), s * (c * (1 - aa) - ab * d),
                      s * (d * (1 - aa) - ab * c), s * a * ((1 - aa) + (1 - cc)), s * (-b * (1 - aa) - a * cd),
                      s * (-c * (1 - aa) - ab * d), s * (b * (1 - aa) - a * cd), s * a * ((1 - aa) + (1 - dd))}};
    // dR/dq_i
    const Mat3<T> di{{s * b * ((1 - bb) + (1 - aa)), s * (c * (1 - bb) + ab * d), s * (d * (1 - bb) - ab * c),
                      s * (c * (1 - bb) - ab * d), -s * b * ((1 - bb) + (1 - dd)), s * (-a * (1 - bb) - b * cd),
                      s * (d * (1 - bb) + ab * c), s * (a * (1 - bb) - b * cd), -s * b * ((1 - bb) + (1 - cc))}};
    // dR/dq_j
    const Mat3<T> dj{{-s * c * ((1 - cc) + (1 - dd)), s * (b * (1 - cc) + a * cd), s * (a * (1 - cc) - b * cd),
                      s * (b * (1 - cc) - a * cd), s * c * ((1 - cc) + (1 - aa)), s * (d * (1 - cc) + ab * c),
                      s * (-a * (1 - cc) - b * cd), s * (d * (1 - cc) - ab * c), -s * c * ((1 - cc) + (1 - bb))}};
    // dR/dq_k
    const Mat3<T> dk{{-s * d * ((1 - dd) + (1 - cc)), s * (-a * (1 - dd) - b * cd), s * (b * (1 - dd) - a * cd),
                      s * (a * (1 - dd) - b * cd), -s * d * ((1 - dd) + (1 - bb)), s * (c * (1 - dd) + ab * d),
                      s * (b * (1 - dd) + a * cd), s * (c * (1 - dd) - ab * d), s * d * ((1 - dd) + (1 - aa))}};

    return {dr.transposed(), di.transposed(), dj.transposed(), dk.transposed()};
}

} // namespace raysplat
