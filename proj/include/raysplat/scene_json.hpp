// Composition scene description: camera, point lights, and OBJ meshes with
// per-object materials, all in one JSON file. Mesh paths resolve relative to
// the JSON's directory.
//
// {
//   "camera": {"position": [x,y,z], "look_at": [x,y,z], "up": [0,1,0],
//              "fov_deg": 60, "width": 512, "height": 512},
//   "lights": [{"position": [x,y,z], "intensity": [r,g,b]}],
//   "meshes": [{"obj": "floor.obj",
//               "material": {"kind": "diffuse|mirror|glass", "albedo": [r,g,b],
//                            "ior": 1.5, "tint": [r,g,b]}}],
//   "background": [r,g,b],
//   "max_depth": 6
// }
#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "raysplat/compose.hpp"
#include "raysplat/config.hpp"

namespace raysplat {

template <typename T>
struct ComposeScene {
    Camera<T> camera;
    std::vector<PointLight<T>> lights;
    MeshSet<T> meshes;
    Vec3<T> background;
    int max_depth = 6;
};

template <typename T>
ComposeScene<T> load_compose_scene(const std::string& path) {
    using configdetail::get_int;
    using configdetail::get_num;
    using configdetail::get_vec3;

    std::ifstream f(path);
    if (!f) throw ConfigError("scene: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scene: malformed JSON in '" + path + "': " + e.what());
    }

    ComposeScene<T> out;
    if (!j.contains("camera")) throw ConfigError("scene: missing 'camera'");
    const auto& c = j["camera"];
    const Vec3<T> pos = get_vec3<T>(c, "position", {0, 0, -3});
    const Vec3<T> look = get_vec3<T>(c, "look_at", {0, 0, 0});
    const Vec3<T> up = get_vec3<T>(c, "up", {0, 1, 0});
    const T fov_deg = get_num<T>(c, "fov_deg", T(60));
    const int width = get_int(c, "width", 256);
    const int height = get_int(c, "height", 256);
    if (width < 1 || height < 1) throw ConfigError("scene: camera dimensions must be positive");
    out.camera = look_at_camera<T>(pos, look, up, fov_deg * T(3.14159265358979323846 / 180.0),
                                   width, height);

    if (j.contains("lights"))
        for (const auto& l : j["lights"])
            out.lights.push_back(
                {get_vec3<T>(l, "position", {0, 0, 0}), get_vec3<T>(l, "intensity", {1, 1, 1})});

    const auto base = std::filesystem::path(path).parent_path();
    if (j.contains("meshes"))
        for (const auto& m : j["meshes"]) {
            if (!m.contains("obj")) throw ConfigError("scene: mesh entry lacks 'obj'");
            std::filesystem::path obj = m["obj"].get<std::string>();
            if (obj.is_relative()) obj = base / obj;
            Mesh<T> mesh = load_obj<T>(obj.string());
            if (m.contains("material")) {
                const auto& mat = m["material"];
                const std::string kind = mat.contains("kind") ? mat["kind"].get<std::string>()
                                                              : "diffuse";
                if (kind == "diffuse")
                    mesh.material.kind = MaterialKind::diffuse;
                else if (kind == "mirror")
                    mesh.material.kind = MaterialKind::mirror;
                else if (kind == "glass")
                    mesh.material.kind = MaterialKind::glass;
                else
                    throw ConfigError("scene: unknown material kind '" + kind + "'");
                mesh.material.albedo = get_vec3<T>(mat, "albedo", mesh.material.albedo);
                mesh.material.ior = get_num<T>(mat, "ior", mesh.material.ior);
                mesh.material.tint = get_vec3<T>(mat, "tint", mesh.material.tint);
                if (mesh.material.kind == MaterialKind::glass && !(mesh.material.ior > T(1)))
                    throw ConfigError("scene: glass 'ior' must be > 1");
            }
            out.meshes.meshes.push_back(std::move(mesh));
        }
    out.meshes.build();

    out.background = get_vec3<T>(j, "background", {0, 0, 0});
    out.max_depth = get_int(j, "max_depth", 6);
    return out;
}

} // namespace raysplat
