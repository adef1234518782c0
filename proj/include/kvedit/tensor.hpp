// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kvedit {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<float, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Spatio-temporal latent grid. Tokens are ordered row-major over (frame, height, width).
struct LatentGrid {
    int frames = 5;
    int height = 8;
    int width = 8;

    int tokens() const { return frames * height * width; }
    int index(int f, int y, int x) const { return (f * height + y) * width + x; }
    std::string str() const;

    bool operator==(const LatentGrid&) const = default;
};

struct Position3 {
    int t = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Position3&) const = default;
};

/// Positions of every visual token in canonical order.
std::vector<Position3> grid_positions(const LatentGrid& grid);

/// Portable unit-Gaussian stream. std::normal_distribution is implementation-defined,
/// so draws go through Box-Muller on top of the fully specified mt19937_64.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next();
    void fill(std::span<float> out, double scale = 1.0);
    Matrix matrix(int rows, int cols, double scale = 1.0);
    double uniform();  // [0, 1)

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// 64-bit FNV-1a, used for string-keyed seeding.
std::uint64_t fnv1a64(std::string_view text);

/// splitmix64 finalizer; derives independent sub-seeds from a parent seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

bool all_finite(const Matrix& m);

}  // namespace kvedit
