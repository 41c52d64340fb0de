// Pinhole camera. Convention: camera space has +x right, +y down, +z forward;
// `rotation` is camera-to-world. Rays go through pixel centers and are not
// normalized (every consumer is scale-invariant in the direction).
#pragma once

#include <optional>
#include <stdexcept>

#include "raysplat/gaussian.hpp"

namespace raysplat {

template <typename T>
struct Camera {
    Mat3<T> rotation = Mat3<T>::identity(); // camera-to-world
    Vec3<T> position;
    T hfov = T(0.8575560718); // horizontal field of view, radians
    int width = 0;
    int height = 0;

    T focal() const { return T(0.5) * T(width) / std::tan(hfov / T(2)); }
    Vec3<T> forward() const { return rotation.col(2); }
};

template <typename T>
Ray<T> generate_ray(const Camera<T>& cam, int i, int j) {
    if (i < 0 || i >= cam.width || j < 0 || j >= cam.height)
        throw std::invalid_argument("generate_ray: pixel out of range");
    const T f = cam.focal();
    const Vec3<T> dir_cam{(T(i) + T(0.5) - T(0.5) * T(cam.width)) / f,
                          (T(j) + T(0.5) - T(0.5) * T(cam.height)) / f, T(1)};
    return {cam.position, cam.rotation * dir_cam};
}

// Pixel coordinates of a world point, or nothing if it lies behind the camera.
template <typename T>
std::optional<Vec3<T>> project(const Camera<T>& cam, const Vec3<T>& p) {
    const Vec3<T> local = cam.rotation.transposed() * (p - cam.position);
    if (!(local.z > T(0))) return std::nullopt;
    const T f = cam.focal();
    return Vec3<T>{f * local.x / local.z + T(0.5) * T(cam.width),
                   f * local.y / local.z + T(0.5) * T(cam.height), local.z};
}

// Camera looking from `position` toward `target`. The up hint fixes the roll;
// the resulting frame [right, down, forward] is always a proper rotation.
template <typename T>
Camera<T> look_at_camera(const Vec3<T>& position, const Vec3<T>& target, const Vec3<T>& up_hint,
                         T hfov, int width, int height) {
    const Vec3<T> fwd = normalized(target - position);
    Vec3<T> right = cross(fwd, up_hint);
    if (norm(right) < T(1e-12)) right = cross(fwd, Vec3<T>{1, 0, 0});
    if (norm(right) < T(1e-12)) right = cross(fwd, Vec3<T>{0, 1, 0});
    right = normalized(right);
    const Vec3<T> down = cross(fwd, right);
    Camera<T> cam;
    for (int r = 0; r < 3; ++r) {
        cam.rotation(r, 0) = right[r];
        cam.rotation(r, 1) = down[r];
        cam.rotation(r, 2) = fwd[r];
    }
    cam.position = position;
    cam.hfov = hfov;
    cam.width = width;
    cam.height = height;
    return cam;
}

} // namespace raysplat
