// NeRF-synthetic dataset ingestion: transforms_{train,test}.json with
// camera_angle_x and per-frame 4x4 camera-to-world matrices in the OpenGL
// convention (x right, y up, z backward). Poses convert to this renderer's
// +z-forward/y-down convention by flipping the y and z columns, and the
// whole scene is rescaled so the cameras sit on a unit-radius cloud, which
// keeps Gaussian scales inside the sigmoid's (0,1) range.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "raysplat/camera.hpp"
#include "raysplat/image_io.hpp"

namespace raysplat {

struct DatasetError : std::runtime_error {
    explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

template <typename T>
struct Dataset {
    std::vector<TrainView<T>> train;
    std::vector<TrainView<T>> test;
    Vec3<T> normalization_offset;   // applied before scaling
    T normalization_scale = T(1);
};

namespace datasetdetail {

template <typename T>
Camera<T> camera_from_nerf(const nlohmann::json& mat, T hfov, int width, int height,
                           const std::string& context) {
    if (!mat.is_array() || mat.size() < 3) throw DatasetError(context + ": bad transform_matrix");
    Mat3<T> r_gl;
    Vec3<T> pos;
    for (int row = 0; row < 3; ++row) {
        const auto& row_json = mat[std::size_t(row)];
        if (!row_json.is_array() || row_json.size() < 4)
            throw DatasetError(context + ": bad transform_matrix row");
        for (int col = 0; col < 3; ++col) r_gl(row, col) = T(row_json[std::size_t(col)].get<double>());
        pos[row] = T(row_json[3].get<double>());
    }
    if (!is_finite(pos) || !std::isfinite(double(r_gl.det())))
        throw DatasetError(context + ": non-finite pose");
    if (std::abs(r_gl.det() - T(1)) > T(0.01))
        throw DatasetError(context + ": transform_matrix rotation is not invertible/orthonormal");

    Camera<T> cam;
    // flip y and z columns: OpenGL (y up, z backward) -> y down, z forward
    for (int row = 0; row < 3; ++row) {
        cam.rotation(row, 0) = r_gl(row, 0);
        cam.rotation(row, 1) = -r_gl(row, 1);
        cam.rotation(row, 2) = -r_gl(row, 2);
    }
    cam.position = pos;
    cam.hfov = hfov;
    cam.width = width;
    cam.height = height;
    return cam;
}

template <typename T>
Image<T> load_frame_image(const std::filesystem::path& root, std::string file_path) {
    namespace fs = std::filesystem;
    // NeRF-synthetic file_path entries usually omit the extension
    if (!file_path.empty() && file_path[0] == '.' && file_path.size() > 1 && file_path[1] == '/')
        file_path = file_path.substr(2);
    const fs::path base = root / file_path;
    for (const char* ext : {"", ".png", ".raw"}) {
        const fs::path p = base.string() + ext;
        if (!fs::exists(p)) continue;
        if (p.extension() == ".raw") return read_raw<T>(p.string());
        return read_png<T>(p.string());
    }
    throw DatasetError("dataset: image not found for frame '" + file_path + "'");
}

template <typename T>
std::vector<TrainView<T>> load_split(const std::filesystem::path& dir, const std::string& split) {
    namespace fs = std::filesystem;
    const fs::path jpath = dir / ("transforms_" + split + ".json");
    std::ifstream f(jpath);
    if (!f) throw DatasetError("dataset: missing " + jpath.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("dataset: malformed JSON in " + jpath.string() + ": " + e.what());
    }
    if (!j.contains("camera_angle_x"))
        throw DatasetError("dataset: " + jpath.string() + " lacks camera_angle_x");
    if (!j.contains("frames") || !j["frames"].is_array())
        throw DatasetError("dataset: " + jpath.string() + " lacks frames");
    const T hfov = T(j["camera_angle_x"].get<double>());

    std::vector<TrainView<T>> views;
    for (std::size_t fi = 0; fi < j["frames"].size(); ++fi) {
        const auto& frame = j["frames"][fi];
        const std::string ctx = jpath.string() + " frame " + std::to_string(fi);
        if (!frame.contains("transform_matrix")) throw DatasetError(ctx + ": no transform_matrix");
        if (!frame.contains("file_path")) throw DatasetError(ctx + ": no file_path");
        TrainView<T> v;
        v.image = load_frame_image<T>(dir, frame["file_path"].get<std::string>());
        v.camera = camera_from_nerf<T>(frame["transform_matrix"], hfov, v.image.width,
                                       v.image.height, ctx);
        if (!views.empty() && (views.front().image.width != v.image.width ||
                               views.front().image.height != v.image.height))
            throw DatasetError(ctx + ": image dimensions differ within the split");
        views.push_back(std::move(v));
    }
    if (views.empty()) throw DatasetError("dataset: " + jpath.string() + " has no frames");
    return views;
}

} // namespace datasetdetail

template <typename T>
Dataset<T> load_nerf_synthetic(const std::string& dir) {
    Dataset<T> ds;
    ds.train = datasetdetail::load_split<T>(dir, "train");
    ds.test = datasetdetail::load_split<T>(dir, "test");

    // normalize: camera centroid to the origin, max camera radius to 1
    Vec3<T> centroid;
    std::size_t n = 0;
    for (const auto* split : {&ds.train, &ds.test})
        for (const auto& v : *split) {
            centroid += v.camera.position;
            ++n;
        }
    centroid = centroid / T(n);
    T max_r = 0;
    for (const auto* split : {&ds.train, &ds.test})
        for (const auto& v : *split) max_r = std::max(max_r, norm(v.camera.position - centroid));
    const T scale = max_r > T(0) ? T(1) / max_r : T(1);

    ds.normalization_offset = -centroid;
    ds.normalization_scale = scale;
    for (auto* split : {&ds.train, &ds.test})
        for (auto& v : *split) v.camera.position = (v.camera.position - centroid) * scale;
    return ds;
}

} // namespace raysplat
