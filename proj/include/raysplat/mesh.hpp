// Triangle meshes for inference-time composition: OBJ loading (v/f records,
// polygon fans triangulated), Moller-Trumbore intersection, and a closest-hit
// BVH reusing the Gaussian tree's build.
#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "raysplat/bvh.hpp"

namespace raysplat {

enum class MaterialKind { diffuse, mirror, glass };

template <typename T>
struct Material {
    MaterialKind kind = MaterialKind::diffuse;
    Vec3<T> albedo{T(0.8), T(0.8), T(0.8)};
    T ior = T(1.5);            // glass only
    Vec3<T> tint{1, 1, 1};     // glass only
};

template <typename T>
struct Mesh {
    std::vector<Vec3<T>> vertices;
    std::vector<std::array<int, 3>> triangles;
    Material<T> material;
};

template <typename T>
struct TriangleHit {
    T t = 0;
    Vec3<T> barycentrics; // (1-u-v, u, v)
    Vec3<T> normal;       // geometric, unnormalized cross product direction
};

// Moller-Trumbore. Returns the smallest positive t, or nothing for parallel
// rays, back-of-origin hits, and points outside the triangle.
template <typename T>
std::optional<TriangleHit<T>> intersect_triangle(const Ray<T>& ray, const Vec3<T>& v0,
                                                 const Vec3<T>& v1, const Vec3<T>& v2) {
    constexpr T eps = T(1e-12);
    const Vec3<T> e1 = v1 - v0;
    const Vec3<T> e2 = v2 - v0;
    const Vec3<T> pvec = cross(ray.direction, e2);
    const T det = dot(e1, pvec);
    if (std::abs(det) < eps * std::sqrt(norm2(e1) * norm2(e2) * norm2(ray.direction)))
        return std::nullopt;
    const T inv_det = T(1) / det;
    const Vec3<T> tvec = ray.origin - v0;
    const T u = dot(tvec, pvec) * inv_det;
    if (u < T(-1e-7) || u > T(1) + T(1e-7)) return std::nullopt;
    const Vec3<T> qvec = cross(tvec, e1);
    const T v = dot(ray.direction, qvec) * inv_det;
    if (v < T(-1e-7) || u + v > T(1) + T(1e-7)) return std::nullopt;
    const T t = dot(e2, qvec) * inv_det;
    if (!(t > T(0))) return std::nullopt;
    TriangleHit<T> hit;
    hit.t = t;
    hit.barycentrics = {T(1) - u - v, u, v};
    hit.normal = normalized(cross(e1, e2));
    return hit;
}

template <typename T>
struct MeshHit {
    T t = 0;
    int mesh = -1;
    int triangle = -1;
    Vec3<T> normal;
    Vec3<T> point;
};

// All meshes of a scene plus one BVH across their triangles.
template <typename T>
struct MeshSet {
    std::vector<Mesh<T>> meshes;

    void build() {
        boxes_.clear();
        tri_ref_.clear();
        for (int mi = 0; mi < int(meshes.size()); ++mi) {
            const auto& mesh = meshes[std::size_t(mi)];
            for (int ti = 0; ti < int(mesh.triangles.size()); ++ti) {
                const auto& tr = mesh.triangles[std::size_t(ti)];
                Aabb<T> b;
                for (int k = 0; k < 3; ++k) b.expand(mesh.vertices[std::size_t(tr[std::size_t(k)])]);
                boxes_.push_back(b);
                tri_ref_.push_back({mi, ti});
            }
        }
        if (!boxes_.empty()) bvhdetail::build_over_boxes(boxes_, nodes_, order_, 4);
    }

    bool empty() const { return tri_ref_.empty(); }

    // Closest triangle hit with t in (0, t_max).
    std::optional<MeshHit<T>> closest_hit(const Ray<T>& ray, T t_max) const {
        if (tri_ref_.empty()) return std::nullopt;
        const Vec3<T> inv_d{T(1) / ray.direction.x, T(1) / ray.direction.y,
                            T(1) / ray.direction.z};
        MeshHit<T> best;
        best.t = t_max;
        bool found = false;
        std::int32_t stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const auto& node = nodes_[std::size_t(stack[--top])];
            T tn;
            if (!bvhdetail::intersect_box(node.box, ray.origin, inv_d, T(0), best.t, tn)) continue;
            if (node.is_leaf()) {
                for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
                    const auto [mi, ti] = tri_ref_[std::size_t(order_[std::size_t(i)])];
                    const auto& mesh = meshes[std::size_t(mi)];
                    const auto& tr = mesh.triangles[std::size_t(ti)];
                    const auto h = intersect_triangle(ray, mesh.vertices[std::size_t(tr[0])],
                                                      mesh.vertices[std::size_t(tr[1])],
                                                      mesh.vertices[std::size_t(tr[2])]);
                    if (h && h->t < best.t) {
                        best.t = h->t;
                        best.mesh = mi;
                        best.triangle = ti;
                        best.normal = h->normal;
                        found = true;
                    }
                }
            } else {
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        }
        if (!found) return std::nullopt;
        best.point = ray.origin + ray.direction * best.t;
        return best;
    }

private:
    std::vector<Aabb<T>> boxes_;
    std::vector<bvhdetail::Node<T>> nodes_;
    std::vector<std::int32_t> order_;
    std::vector<std::pair<int, int>> tri_ref_;
};

struct ObjError : std::runtime_error {
    explicit ObjError(const std::string& what) : std::runtime_error(what) {}
};

// v/f records only; polygons triangulated as fans; normals/uv indices in
// f records are accepted and ignored.
template <typename T>
Mesh<T> load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ObjError("obj: cannot open '" + path + "'");
    Mesh<T> mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok)) continue;
        if (tok == "v") {
            Vec3<T> v;
            if (!(ss >> v.x >> v.y >> v.z))
                throw ObjError("obj: malformed vertex at line " + std::to_string(line_no));
            mesh.vertices.push_back(v);
        } else if (tok == "f") {
            std::vector<int> idx;
            std::string ref;
            while (ss >> ref) {
                const std::size_t slash = ref.find('/');
                const int vi = std::stoi(slash == std::string::npos ? ref : ref.substr(0, slash));
                // OBJ is 1-based; negative indices count from the end
                const int abs_idx = vi > 0 ? vi - 1 : int(mesh.vertices.size()) + vi;
                if (abs_idx < 0 || abs_idx >= int(mesh.vertices.size()))
                    throw ObjError("obj: vertex index out of range at line " +
                                   std::to_string(line_no));
                idx.push_back(abs_idx);
            }
            if (idx.size() < 3)
                throw ObjError("obj: face with fewer than 3 vertices at line " +
                               std::to_string(line_no));
            for (std::size_t k = 2; k < idx.size(); ++k)
                mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
        }
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec3<T> e1 = mesh.vertices[std::size_t(tr[1])] - mesh.vertices[std::size_t(tr[0])];
        const Vec3<T> e2 = mesh.vertices[std::size_t(tr[2])] - mesh.vertices[std::size_t(tr[0])];
        if (!(norm2(cross(e1, e2)) > T(0)))
            throw ObjError("obj: degenerate triangle " + std::to_string(t) + " in '" + path + "'");
    }
    return mesh;
}

} // namespace raysplat
