// PLY checkpointing of Gaussian scenes.
//
// Native format: binary_little_endian 1.0, element "vertex" with properties
//   x y z slog0 slog1 slog2 q0 q1 q2 q3 alpha_logit r g b
// storing RAW logits/quaternions (lossless round trip of the optimizer's
// parameter space). Property width follows the scalar type of the scene
// (double for double scenes, float for float scenes).
//
// The loader also accepts third-party 3DGS checkpoints (x y z f_dc_* opacity
// scale_* rot_*): f_dc converts to RGB through the degree-0 SH evaluation
// c = 0.5 + 0.2820948 f_dc, log-scales convert into the sigmoid range.
// Unknown properties are skipped.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "raysplat/gaussian.hpp"

namespace raysplat {

struct PlyError : std::runtime_error {
    explicit PlyError(const std::string& what) : std::runtime_error(what) {}
};

namespace plydetail {

enum class PropType { f32, f64, i8, u8, i16, u16, i32, u32 };

inline std::size_t prop_size(PropType t) {
    switch (t) {
        case PropType::f64: return 8;
        case PropType::f32: case PropType::i32: case PropType::u32: return 4;
        case PropType::i16: case PropType::u16: return 2;
        default: return 1;
    }
}

inline PropType parse_prop_type(const std::string& s, int line_no) {
    if (s == "float" || s == "float32") return PropType::f32;
    if (s == "double" || s == "float64") return PropType::f64;
    if (s == "char" || s == "int8") return PropType::i8;
    if (s == "uchar" || s == "uint8") return PropType::u8;
    if (s == "short" || s == "int16") return PropType::i16;
    if (s == "ushort" || s == "uint16") return PropType::u16;
    if (s == "int" || s == "int32") return PropType::i32;
    if (s == "uint" || s == "uint32") return PropType::u32;
    throw PlyError("ply: unsupported property type '" + s + "' at header line " +
                   std::to_string(line_no));
}

inline double read_prop(const char* p, PropType t) {
    auto load = [&](auto v) {
        std::memcpy(&v, p, sizeof(v));
        return v;
    };
    switch (t) {
        case PropType::f32: return load(float{});
        case PropType::f64: return load(double{});
        case PropType::i8: return load(std::int8_t{});
        case PropType::u8: return load(std::uint8_t{});
        case PropType::i16: return load(std::int16_t{});
        case PropType::u16: return load(std::uint16_t{});
        case PropType::i32: return load(std::int32_t{});
        case PropType::u32: return load(std::uint32_t{});
    }
    return 0;
}

struct Property {
    std::string name;
    PropType type = PropType::f32;
    std::size_t offset = 0; // byte offset within one record
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
    std::size_t stride = 0;
};

} // namespace plydetail

template <typename T>
void save_ply(const GaussianScene<T>& scene, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PlyError("ply: cannot open '" + path + "' for writing");

    const char* scalar = sizeof(T) == 8 ? "double" : "float";
    f << "ply\nformat binary_little_endian 1.0\n"
      << "comment raysplat gaussian scene\n"
      << "element vertex " << scene.gaussians.size() << "\n";
    for (const char* name : {"x", "y", "z", "slog0", "slog1", "slog2", "q0", "q1", "q2", "q3",
                             "alpha_logit", "r", "g", "b"})
        f << "property " << scalar << " " << name << "\n";
    f << "end_header\n";

    for (const auto& g : scene.gaussians) {
        const T rec[14] = {g.mean.x, g.mean.y, g.mean.z,
                           g.scale_logits.x, g.scale_logits.y, g.scale_logits.z,
                           g.rotation.r, g.rotation.i, g.rotation.j, g.rotation.k,
                           g.opacity_logit, g.color.x, g.color.y, g.color.z};
        f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
    if (!f) throw PlyError("ply: write failed for '" + path + "'");
}

template <typename T>
GaussianScene<T> load_ply(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw PlyError("ply: cannot open '" + path + "'");

    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(f, line))
            throw PlyError("ply: unexpected end of header at line " + std::to_string(line_no + 1));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return line;
    };

    if (next_line() != "ply") throw PlyError("ply: missing magic at line 1");
    if (next_line() != "format binary_little_endian 1.0")
        throw PlyError("ply: unsupported format at line 2 (need binary_little_endian 1.0)");

    std::vector<plydetail::Element> elements;
    while (true) {
        std::istringstream ss(next_line());
        std::string tok;
        ss >> tok;
        if (tok == "end_header") break;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "element") {
            plydetail::Element e;
            if (!(ss >> e.name >> e.count))
                throw PlyError("ply: malformed element at line " + std::to_string(line_no));
            elements.push_back(e);
        } else if (tok == "property") {
            if (elements.empty())
                throw PlyError("ply: property before element at line " + std::to_string(line_no));
            std::string type;
            ss >> type;
            if (type == "list")
                throw PlyError("ply: list properties unsupported, line " + std::to_string(line_no));
            plydetail::Property p;
            p.type = plydetail::parse_prop_type(type, line_no);
            if (!(ss >> p.name))
                throw PlyError("ply: malformed property at line " + std::to_string(line_no));
            p.offset = elements.back().stride;
            elements.back().stride += plydetail::prop_size(p.type);
            elements.back().props.push_back(p);
        } else {
            throw PlyError("ply: unrecognized header token '" + tok + "' at line " +
                           std::to_string(line_no));
        }
    }

    GaussianScene<T> scene;
    bool saw_vertex = false;
    for (const auto& e : elements) {
        if (e.name != "vertex") {
            f.seekg(std::streamoff(e.count * e.stride), std::ios::cur);
            if (!f) throw PlyError("ply: truncated while skipping element '" + e.name + "'");
            continue;
        }
        saw_vertex = true;

        std::map<std::string, const plydetail::Property*> by_name;
        for (const auto& p : e.props) by_name[p.name] = &p;
        auto has = [&](const char* n) { return by_name.count(n) > 0; };

        const bool native = has("slog0");
        const bool gs3d = !native && has("f_dc_0");
        if (!native && !gs3d)
            throw PlyError("ply: vertex element has neither native (slog*) nor 3DGS (f_dc_*) "
                           "properties");

        const char* const native_names[14] = {"x", "y", "z", "slog0", "slog1", "slog2",
                                              "q0", "q1", "q2", "q3", "alpha_logit",
                                              "r", "g", "b"};
        const char* const gs3d_names[14] = {"x", "y", "z", "scale_0", "scale_1", "scale_2",
                                            "rot_0", "rot_1", "rot_2", "rot_3", "opacity",
                                            "f_dc_0", "f_dc_1", "f_dc_2"};
        const char* const* names = native ? native_names : gs3d_names;
        const plydetail::Property* props[14];
        for (int i = 0; i < 14; ++i) {
            auto it = by_name.find(names[i]);
            if (it == by_name.end())
                throw PlyError(std::string("ply: missing property '") + names[i] + "'");
            props[i] = it->second;
        }

        std::vector<char> rec(e.stride);
        scene.gaussians.reserve(e.count);
        for (std::size_t idx = 0; idx < e.count; ++idx) {
            f.read(rec.data(), std::streamsize(e.stride));
            if (std::size_t(f.gcount()) != e.stride)
                throw PlyError("ply: truncated at vertex " + std::to_string(idx) + " of " +
                               std::to_string(e.count));
            double v[14];
            for (int i = 0; i < 14; ++i)
                v[i] = plydetail::read_prop(rec.data() + props[i]->offset, props[i]->type);
            for (int i = 0; i < 14; ++i)
                if (!std::isfinite(v[i]))
                    throw PlyError("ply: non-finite value in property '" + std::string(names[i]) +
                                   "' at vertex " + std::to_string(idx));

            Gaussian<T> g;
            g.mean = {T(v[0]), T(v[1]), T(v[2])};
            if (native) {
                g.scale_logits = {T(v[3]), T(v[4]), T(v[5])};
                g.color = {T(v[11]), T(v[12]), T(v[13])};
            } else {
                // 3DGS stores log-scales with exp activation; clamp the
                // activation into the sigmoid's representable range.
                for (int ax = 0; ax < 3; ++ax) {
                    double act = std::exp(v[3 + ax]);
                    act = std::min(std::max(act, 1e-9), 1.0 - 1e-9);
                    g.scale_logits[ax] = T(inverse_sigmoid(act));
                }
                g.color = {T(0.5 + 0.2820948 * v[11]), T(0.5 + 0.2820948 * v[12]),
                           T(0.5 + 0.2820948 * v[13])};
            }
            g.rotation = {T(v[6]), T(v[7]), T(v[8]), T(v[9])};
            g.opacity_logit = T(v[10]);
            if (!(g.rotation.norm2() > T(0)))
                throw PlyError("ply: zero rotation quaternion at vertex " + std::to_string(idx));
            scene.gaussians.push_back(g);
        }
    }
    if (!saw_vertex) throw PlyError("ply: no vertex element");
    return scene;
}

} // namespace raysplat
