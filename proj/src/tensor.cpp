// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/tensor.hpp"

#include "kvedit/error.hpp"

#include <cmath>
#include <numbers>

namespace kvedit {

std::string_view error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config-error";
        case ErrorKind::usage: return "usage-error";
        case ErrorKind::spec: return "spec-error";
        case ErrorKind::injection: return "injection-error";
        case ErrorKind::numerical: return "numerical-failure";
        case ErrorKind::domain: return "domain-error";
        case ErrorKind::undefined_correlation: return "undefined-correlation";
        case ErrorKind::no_edit: return "no-edit";
        case ErrorKind::degenerate_region: return "degenerate-region";
        case ErrorKind::missing_data: return "missing-data";
        case ErrorKind::io: return "io-error";
        case ErrorKind::format: return "format-error";
    }
    return "error";
}

std::string LatentGrid::str() const {
    return std::to_string(frames) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

std::vector<Position3> grid_positions(const LatentGrid& grid) {
    std::vector<Position3> out;
    out.reserve(static_cast<size_t>(grid.tokens()));
    for (int f = 0; f < grid.frames; ++f) {
        for (int y = 0; y < grid.height; ++y) {
            for (int x = 0; x < grid.width; ++x) {
                out.push_back({f, y, x});
            }
        }
    }
    return out;
}

double GaussianStream::uniform() {
    // 53 random bits -> [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

void GaussianStream::fill(std::span<float> out, double scale) {
    for (auto& v : out) {
        v = static_cast<float>(next() * scale);
    }
}

Matrix GaussianStream::matrix(int rows, int cols, double scale) {
    Matrix m(rows, cols);
    fill(std::span<float>(m.data(), static_cast<size_t>(m.size())), scale);
    return m;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

}  // namespace kvedit
