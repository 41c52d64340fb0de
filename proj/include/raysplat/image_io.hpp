// Image I/O. PNG via libpng (8-bit, clamped on write; 8/16-bit gray/RGB/RGBA
// accepted on read, alpha composited over black). The raw dump is the test
// format: uint32 width, uint32 height, then row-major float32 RGB.
#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "raysplat/render.hpp"

namespace raysplat {

struct ImageIoError : std::runtime_error {
    explicit ImageIoError(const std::string& what) : std::runtime_error(what) {}
};

namespace iodetail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t to_byte(double v) {
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return std::uint8_t(v * 255.0 + 0.5);
}

} // namespace iodetail

template <typename T>
void write_png(const std::string& path, const Image<T>& img) {
    iodetail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ImageIoError("png: cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("png: writer initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("png: write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(std::size_t(img.width) * 3);
    for (int j = 0; j < img.height; ++j) {
        for (int i = 0; i < img.width; ++i) {
            const auto& px = img.at(i, j);
            row[std::size_t(i) * 3 + 0] = iodetail::to_byte(double(px.x));
            row[std::size_t(i) * 3 + 1] = iodetail::to_byte(double(px.y));
            row[std::size_t(i) * 3 + 2] = iodetail::to_byte(double(px.z));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

template <typename T>
Image<T> read_png(const std::string& path) {
    iodetail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageIoError("png: cannot open '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("png: reader initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("png: malformed file '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit RGBA.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_set_add_alpha(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);

    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    std::vector<std::uint8_t> data(std::size_t(w) * h * 4);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) rows[std::size_t(j)] = data.data() + std::size_t(j) * w * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image<T> img(w, h);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const std::uint8_t* p = data.data() + (std::size_t(j) * w + i) * 4;
            const T a = T(p[3]) / T(255);
            // composite over black
            img.at(i, j) = Vec3<T>{T(p[0]), T(p[1]), T(p[2])} * (a / T(255));
        }
    return img;
}

template <typename T>
void write_raw(const std::string& path, const Image<T>& img) {
    iodetail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ImageIoError("raw: cannot open '" + path + "' for writing");
    const std::uint32_t wh[2] = {std::uint32_t(img.width), std::uint32_t(img.height)};
    if (std::fwrite(wh, sizeof(wh), 1, fp.get()) != 1)
        throw ImageIoError("raw: write failed for '" + path + "'");
    std::vector<float> row(std::size_t(img.width) * 3);
    for (int j = 0; j < img.height; ++j) {
        for (int i = 0; i < img.width; ++i) {
            const auto& px = img.at(i, j);
            row[std::size_t(i) * 3 + 0] = float(px.x);
            row[std::size_t(i) * 3 + 1] = float(px.y);
            row[std::size_t(i) * 3 + 2] = float(px.z);
        }
        if (std::fwrite(row.data(), sizeof(float), row.size(), fp.get()) != row.size())
            throw ImageIoError("raw: write failed for '" + path + "'");
    }
}

template <typename T>
Image<T> read_raw(const std::string& path) {
    iodetail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageIoError("raw: cannot open '" + path + "'");
    std::uint32_t wh[2];
    if (std::fread(wh, sizeof(wh), 1, fp.get()) != 1)
        throw ImageIoError("raw: truncated header in '" + path + "'");
    Image<T> img(static_cast<int>(wh[0]), static_cast<int>(wh[1]));
    std::vector<float> row(std::size_t(img.width) * 3);
    for (int j = 0; j < img.height; ++j) {
        if (std::fread(row.data(), sizeof(float), row.size(), fp.get()) != row.size())
            throw ImageIoError("raw: truncated data in '" + path + "'");
        for (int i = 0; i < img.width; ++i)
            img.at(i, j) = {T(row[std::size_t(i) * 3]), T(row[std::size_t(i) * 3 + 1]),
                            T(row[std::size_t(i) * 3 + 2])};
    }
    return img;
}

} // namespace raysplat
