// Binary BVH over per-Gaussian ellipsoid bounds, replacing a GPU ray-tracing
// runtime at desk scale. Built once per scene state (median split on the
// centroid's longest axis, leaves of up to 4 primitives); traversal is
// ordered by node entry distance so next_hit can prune against the best
// candidate found so far.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "raysplat/intersect.hpp"

namespace raysplat {

template <typename T>
struct Hit {
    std::int32_t gaussian_index = -1;
    T t_entry = 0;
};

namespace bvhdetail {

template <typename T>
struct Node {
    Aabb<T> box;
    std::int32_t left = -1;   // internal: child node ids
    std::int32_t right = -1;
    std::int32_t first = 0;   // leaf: range into prim index array
    std::int32_t count = 0;   // leaf iff count > 0

    bool is_leaf() const { return count > 0; }
};

// Slab test with unnormalized direction. fmin/fmax drop NaNs from
// degenerate axes, erring on the side of traversal.
template <typename T>
bool intersect_box(const Aabb<T>& b, const Vec3<T>& o, const Vec3<T>& inv_d, T t_min, T t_max,
                   T& t_near_out) {
    T tn = t_min, tf = t_max;
    for (int ax = 0; ax < 3; ++ax) {
        const T t0 = (b.min[ax] - o[ax]) * inv_d[ax];
        const T t1 = (b.max[ax] - o[ax]) * inv_d[ax];
        tn = std::fmax(tn, std::fmin(t0, t1));
        tf = std::fmin(tf, std::fmax(t0, t1));
    }
    t_near_out = tn;
    return tn <= tf;
}

// Shared median-split build over a set of boxes. Returns nodes plus the
// primitive permutation.
template <typename T>
void build_over_boxes(const std::vector<Aabb<T>>& boxes, std::vector<Node<T>>& nodes,
                      std::vector<std::int32_t>& order, int leaf_size) {
    const auto n = static_cast<std::int32_t>(boxes.size());
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    nodes.clear();
    nodes.reserve(std::size_t(2) * n);

    struct Range {
        std::int32_t node, first, count;
    };
    nodes.push_back({});
    std::vector<Range> stack{{0, 0, n}};
    while (!stack.empty()) {
        const Range r = stack.back();
        stack.pop_back();
        Node<T>& node = nodes[r.node];
        Aabb<T> box;
        for (std::int32_t i = r.first; i < r.first + r.count; ++i) box.expand(boxes[order[i]]);
        node.box = box;
        if (r.count <= leaf_size) {
            node.first = r.first;
            node.count = r.count;
            continue;
        }
        Aabb<T> cbox;
        for (std::int32_t i = r.first; i < r.first + r.count; ++i)
            cbox.expand(boxes[order[i]].center());
        const Vec3<T> ext = cbox.extent();
        int axis = 0;
        if (ext.y > ext[axis]) axis = 1;
        if (ext.z > ext[axis]) axis = 2;
        const std::int32_t mid = r.first + r.count / 2;
        std::nth_element(order.begin() + r.first, order.begin() + mid,
                         order.begin() + r.first + r.count,
                         [&](std::int32_t a, std::int32_t b) {
                             const T ca = boxes[a].center()[axis];
                             const T cb = boxes[b].center()[axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        const auto li = static_cast<std::int32_t>(nodes.size());
        nodes.push_back({});
        nodes.push_back({});
        nodes[r.node].left = li;
        nodes[r.node].right = li + 1;
        stack.push_back({li, r.first, mid - r.first});
        stack.push_back({li + 1, mid, r.first + r.count - mid});
    }
}

} // namespace bvhdetail

// Tight axis-aligned bound of the level-Q ellipsoid: m +- sqrt(Q) times the
// row norms of R*S.
template <typename T>
Aabb<T> gaussian_aabb(const Gaussian<T>& g, T Q) {
    const Mat3<T> rs = rotation_from_quaternion(g.rotation) * Mat3<T>::diagonal(scale_activations(g));
    const T rootq = std::sqrt(Q);
    Vec3<T> radius{norm(rs.row(0)), norm(rs.row(1)), norm(rs.row(2))};
    radius *= rootq;
    return {g.mean - radius, g.mean + radius};
}

template <typename T>
struct Bvh {
    std::vector<bvhdetail::Node<T>> nodes;
    std::vector<std::int32_t> prims;
    T q = 0;              // ellipsoid level the tree was built for
    T scene_diagonal = 0; // root AABB diagonal, basis for t_advance_delta
};

template <typename T>
Bvh<T> build_bvh(const GaussianScene<T>& scene, T Q) {
    if (scene.gaussians.empty()) throw std::invalid_argument("build_bvh: empty scene");
    std::vector<Aabb<T>> boxes;
    boxes.reserve(scene.gaussians.size());
    for (const auto& g : scene.gaussians) boxes.push_back(gaussian_aabb(g, Q));
    Bvh<T> bvh;
    bvh.q = Q;
    bvhdetail::build_over_boxes(boxes, bvh.nodes, bvh.prims, 4);
    bvh.scene_diagonal = bvh.nodes[0].box.diagonal();
    return bvh;
}

// Every ellipsoid entry with t_entry < t_limit, sorted by (t_entry, index) --
// one traversal, each primitive tested once. The renderer walks this list
// with the same advance rule next_hit uses, so the two enumerations agree.
template <typename T>
void collect_hits(const Bvh<T>& bvh, const GaussianScene<T>& scene, const Ray<T>& ray, T t_limit,
                  std::vector<Hit<T>>& out) {
    out.clear();
    const Vec3<T> inv_d{T(1) / ray.direction.x, T(1) / ray.direction.y, T(1) / ray.direction.z};
    std::int32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const auto& node = bvh.nodes[std::size_t(stack[--top])];
        T tn;
        if (!bvhdetail::intersect_box(node.box, ray.origin, inv_d, T(0), t_limit, tn)) continue;
        if (node.is_leaf()) {
            for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
                const std::int32_t gi = bvh.prims[i];
                const auto t = intersect_ellipsoid(ray, scene.gaussians[gi], bvh.q);
                if (t && *t < t_limit) out.push_back({gi, *t});
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    std::sort(out.begin(), out.end(), [](const Hit<T>& a, const Hit<T>& b) {
        return a.t_entry < b.t_entry ||
               (a.t_entry == b.t_entry && a.gaussian_index < b.gaussian_index);
    });
}

// Nearest ellipsoid entry with t_entry strictly greater than t_min; ties on
// t_entry break toward the lower Gaussian index. Repeated calls with
// t_min = previous entry + delta enumerate hits front to back.
template <typename T>
std::optional<Hit<T>> next_hit(const Bvh<T>& bvh, const GaussianScene<T>& scene, const Ray<T>& ray,
                               T t_min) {
    const Vec3<T> inv_d{T(1) / ray.direction.x, T(1) / ray.direction.y, T(1) / ray.direction.z};
    T best_t = std::numeric_limits<T>::infinity();
    std::int32_t best_idx = -1;

    struct Entry {
        std::int32_t node;
        T t_near;
    };
    Entry stack[64];
    int top = 0;
    stack[top++] = {0, T(0)};

    while (top > 0) {
        const Entry e = stack[--top];
        if (e.t_near > best_t) continue;
        const auto& node = bvh.nodes[e.node];
        if (node.is_leaf()) {
            for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
                const std::int32_t gi = bvh.prims[i];
                const auto t = intersect_ellipsoid(ray, scene.gaussians[gi], bvh.q);
                if (!t) continue;
                if (*t <= t_min) continue;
                if (*t < best_t || (*t == best_t && gi < best_idx)) {
                    best_t = *t;
                    best_idx = gi;
                }
            }
            continue;
        }
        T tn_l, tn_r;
        const bool hit_l = bvhdetail::intersect_box(bvh.nodes[node.left].box, ray.origin, inv_d,
                                                    t_min, best_t, tn_l);
        const bool hit_r = bvhdetail::intersect_box(bvh.nodes[node.right].box, ray.origin, inv_d,
                                                    t_min, best_t, tn_r);
        // push far first so the near child pops first
        if (hit_l && hit_r) {
            if (tn_l <= tn_r) {
                stack[top++] = {node.right, tn_r};
                stack[top++] = {node.left, tn_l};
            } else {
                stack[top++] = {node.left, tn_l};
                stack[top++] = {node.right, tn_r};
            }
        } else if (hit_l) {
            stack[top++] = {node.left, tn_l};
        } else if (hit_r) {
            stack[top++] = {node.right, tn_r};
        }
    }

    if (best_idx < 0) return std::nullopt;
    return Hit<T>{best_idx, best_t};
}

} // namespace raysplat
