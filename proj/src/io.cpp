// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/io.hpp"

#include "kvedit/error.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace kvedit {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

[[noreturn]] void format_error(size_t offset, const std::string& what) {
    fail(ErrorKind::format, "tensor file: " + what + " at offset " + std::to_string(offset));
}

}  // namespace

size_t Tensor::numel() const {
    size_t n = 1;
    for (auto d : dims) {
        n *= d;
    }
    return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    require(t.dims.size() <= 255, ErrorKind::format, "tensor file: more than 255 dimensions");
    require(t.data.size() == t.numel(), ErrorKind::format,
            "tensor file: " + std::to_string(t.data.size()) + " values for dims of " + std::to_string(t.numel()));
    std::vector<std::uint8_t> out{'T', 'V', 'L', 'V'};
    out.reserve(8 + 4 * t.dims.size() + 4 * t.data.size());
    put_u16(out, kTensorFileVersion);
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) {
        put_u32(out, d);
    }
    for (float v : t.data) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> b) {
    if (b.size() < 8) {
        format_error(b.size(), "header truncated (" + std::to_string(b.size()) + " bytes)");
    }
    for (size_t i = 0; i < 4; ++i) {
        if (b[i] != static_cast<std::uint8_t>("TVLV"[i])) {
            format_error(i, "bad magic");
        }
    }
    const std::uint16_t version = static_cast<std::uint16_t>(b[4] | b[5] << 8);
    if (version != kTensorFileVersion) {
        format_error(4, "unsupported version " + std::to_string(version));
    }
    if (b[6] != 0) {
        format_error(6, "unknown dtype code " + std::to_string(b[6]));
    }
    const size_t ndim = b[7];
    size_t at = 8;
    if (b.size() < at + 4 * ndim) {
        format_error(b.size(), "dims truncated, expected " + std::to_string(ndim) + " dims");
    }
    Tensor t;
    t.dims.resize(ndim);
    for (size_t i = 0; i < ndim; ++i, at += 4) {
        t.dims[i] = get_u32(b, at);
    }
    const size_t n = t.numel();
    if (b.size() - at != n * 4) {
        format_error(at, "payload holds " + std::to_string(b.size() - at) + " bytes, dims need " + std::to_string(n * 4));
    }
    t.data.resize(n);
    for (size_t i = 0; i < n; ++i, at += 4) {
        t.data[i] = std::bit_cast<float>(get_u32(b, at));
    }
    return t;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(!in.bad(), ErrorKind::io, "cannot read " + path.string());
    return bytes;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        require(!ec, ErrorKind::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorKind::io, "cannot write " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_tensor(const fs::path& path, const Tensor& t) {
    write_bytes(path, encode_tensor(t));
}

Tensor read_tensor(const fs::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode_tensor(bytes);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

Tensor to_tensor(const LatentVideo& latent) {
    const auto& g = latent.grid;
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(g.frames), static_cast<std::uint32_t>(g.height),
              static_cast<std::uint32_t>(g.width), static_cast<std::uint32_t>(latent.channels())};
    t.data.assign(latent.data.data(), latent.data.data() + latent.data.size());
    return t;
}

Tensor to_tensor(const Video& video) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(video.frames), static_cast<std::uint32_t>(video.height),
              static_cast<std::uint32_t>(video.width), 3u};
    t.data = video.pixels;
    return t;
}

LatentVideo latent_from_tensor(const Tensor& t) {
    require(t.dims.size() == 4, ErrorKind::format, "latent tensor must have 4 dims [F, H, W, C]");
    LatentGrid g{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2])};
    Matrix m(g.tokens(), static_cast<int>(t.dims[3]));
    std::copy(t.data.begin(), t.data.end(), m.data());
    return LatentVideo(g, std::move(m));
}

Video video_from_tensor(const Tensor& t) {
    require(t.dims.size() == 4 && t.dims[3] == 3, ErrorKind::format, "video tensor must have dims [F, H, W, 3]");
    Video v(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
    v.pixels = t.data;
    return v;
}

void write_png(const fs::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
    require(rgb.size() == static_cast<size_t>(width) * height * 3, ErrorKind::config, "png: pixel buffer size mismatch");
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    FILE* fp = std::fopen(path.c_str(), "wb");
    require(fp != nullptr, ErrorKind::io, "cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail(ErrorKind::io, "png: failed to encode " + path.string());
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    require(std::fclose(fp) == 0, ErrorKind::io, "cannot write " + path.string());
}

std::vector<std::uint8_t> read_png(const fs::path& path, int& width, int& height) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    require(png_image_begin_read_from_file(&image, path.c_str()) != 0, ErrorKind::io,
            "cannot read png " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
    if (png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr) == 0) {
        const std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorKind::io, "cannot decode png " + path.string() + ": " + msg);
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return rgb;
}

std::string frame_name(int index) {
    std::ostringstream s;
    s << std::setw(4) << std::setfill('0') << index << ".png";
    return s.str();
}

std::vector<std::string> dump_frames(const fs::path& dir, const Video& video) {
    std::vector<std::string> names;
    std::vector<std::uint8_t> rgb(video.frame_size());
    for (int f = 0; f < video.frames; ++f) {
        const float* src = &video.pixels[static_cast<size_t>(f) * video.frame_size()];
        for (size_t i = 0; i < rgb.size(); ++i) {
            rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
        }
        names.push_back(frame_name(f));
        write_png(dir / names.back(), video.width, video.height, rgb);
    }
    return names;
}

Video load_frames(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorKind::io, "frame directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (int f = 0;; ++f) {
        const fs::path p = dir / frame_name(f);
        if (!fs::exists(p)) {
            break;
        }
        files.push_back(p);
    }
    require(!files.empty(), ErrorKind::io, "no 0000.png in " + dir.string());
    Video v;
    for (size_t f = 0; f < files.size(); ++f) {
        int w = 0;
        int h = 0;
        const auto rgb = read_png(files[f], w, h);
        if (f == 0) {
            v = Video(static_cast<int>(files.size()), h, w);
        }
        require(w == v.width && h == v.height, ErrorKind::format, files[f].string() + ": frame size differs from frame 0");
        float* dst = &v.pixels[f * v.frame_size()];
        for (size_t i = 0; i < rgb.size(); ++i) {
            dst[i] = static_cast<float>(rgb[i]) / 255.0f;
        }
    }
    return v;
}

std::string dump_json(const Json& j) {
    return j.dump(2) + "\n";
}

void write_json(const fs::path& path, const Json& j) {
    write_text(path, dump_json(j));
}

Json read_json(const fs::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::format, path.string() + ": " + e.what());
    }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1, ErrorKind::io,
            "sha256 failed");
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i) {
        s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return s.str();
}

std::string sha256_file(const fs::path& path) {
    return sha256_hex(read_bytes(path));
}

}  // namespace kvedit
