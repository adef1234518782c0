// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/video.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kvedit {

namespace fs = std::filesystem;
using Json = nlohmann::json;  // std::map-backed, so keys serialize sorted

/// Dense float32 tensor as stored in a TensorFile.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    size_t numel() const;
    bool operator==(const Tensor&) const = default;
};

/// TensorFile layout, little-endian:
///   "TVLV" | u16 version | u8 dtype (0 = f32) | u8 ndim | u32 dims[ndim] | payload
inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Throws ErrorKind::format naming the byte offset of the first violation.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const fs::path& path, const Tensor& t);
Tensor read_tensor(const fs::path& path);

Tensor to_tensor(const LatentVideo& latent);  // [F, H, W, C]
Tensor to_tensor(const Video& video);         // [F, H, W, 3]
LatentVideo latent_from_tensor(const Tensor& t);
Video video_from_tensor(const Tensor& t);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, std::string_view text);

/// 8-bit RGB PNG, no timestamps, fixed compression.
void write_png(const fs::path& path, int width, int height, std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> read_png(const fs::path& path, int& width, int& height);

/// One PNG per frame named 0000.png, 0001.png, ... Returns the file names.
std::vector<std::string> dump_frames(const fs::path& dir, const Video& video);
/// Loads NNNN.png files in order; all frames must share one size.
Video load_frames(const fs::path& dir);
std::string frame_name(int index);

/// Stable, sorted-key JSON with a trailing newline.
std::string dump_json(const Json& j);
void write_json(const fs::path& path, const Json& j);
Json read_json(const fs::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const fs::path& path);

}  // namespace kvedit
