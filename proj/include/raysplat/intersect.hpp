// Numerically stable ray / confidence-ellipsoid intersection.
//
// In whitened coordinates the level-Q Mahalanobis ellipsoid is the sphere of
// radius sqrt(Q) around the origin, so the intersection reduces to a
// quadratic in t with a = <d',d'>, b = 2<o',d'>, c = <o',o'> - Q. The
// discriminant is evaluated through the perpendicular point-line distance
//   Delta = 4<d',d'> (Q - |o' - dhat'<o',dhat'>|^2)
// and the root whose terms share a sign is computed directly; the other
// comes from the Viete product t1 t2 = c/a. Returns the smallest positive
// root, or nothing when the line misses or both roots are behind the origin.
#pragma once

#include <cmath>
#include <optional>

#include "raysplat/gaussian.hpp"

namespace raysplat {

template <typename T>
std::optional<T> intersect_ellipsoid(const Ray<T>& ray, const Gaussian<T>& g, T Q) {
    const WhitenedRay<T> w = whiten(ray, g);
    const Vec3<T>& op = w.origin;
    const Vec3<T>& dp = w.direction;

    const T a = dot(dp, dp);
    const T half_b = dot(op, dp);
    const T c = dot(op, op) - Q;

    const T dlen = std::sqrt(a);
    const Vec3<T> dhat = dp / dlen;
    const Vec3<T> perp = op - dhat * dot(op, dhat);
    const T disc = Q - dot(perp, perp);
    if (disc < T(0)) return std::nullopt;

    const T sq = std::sqrt(a * disc); // = sqrt(Delta)/2

    T t_near, t_far;
    if (half_b >= T(0)) {
        const T t_star = (-half_b - sq) / a; // smaller root, no cancellation
        t_near = t_star;
        t_far = (t_star != T(0)) ? c / (a * t_star) : t_star;
    } else {
        const T t_star = (-half_b + sq) / a; // larger root, no cancellation
        t_far = t_star;
        t_near = c / (a * t_star);
    }

    if (t_near > T(0)) return t_near;
    if (t_far > T(0)) return t_far;
    return std::nullopt;
}

} // namespace raysplat
