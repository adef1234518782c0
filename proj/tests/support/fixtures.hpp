// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-built inputs shared by the unit and acceptance tests.

#pragma once

#include "kvedit/edit.hpp"
#include "kvedit/model.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <vector>

namespace kvedit::testing {

struct Block {
    int y0, x0, h, w;  // same rectangle in every latent frame

    bool contains(int y, int x, int grow = 0) const {
        return y >= y0 - grow && y < y0 + h + grow && x >= x0 - grow && x < x0 + w + grow;
    }
};

/// Block at `inside`, a one-cell ring around it at `halo`, zero elsewhere.
/// A ring of 0.06 keeps the 3x3 blur from eroding the block corners past the
/// 0.8 threshold, so the pipeline recovers the block exactly as long as the ring
/// stays off the grid edge.
inline GridMap block_map(const LatentGrid& g, const Block& b, double inside = 1.0, double halo = 0.0) {
    GridMap m(g);
    for (int f = 0; f < g.frames; ++f) {
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                m.at(f, y, x) = b.contains(y, x) ? inside : (b.contains(y, x, 1) ? halo : 0.0);
            }
        }
    }
    return m;
}

/// Block bits grown (grow > 0) or shrunk (grow < 0) by whole cells, 8-connected.
inline std::vector<std::uint8_t> block_bits(const LatentGrid& g, const Block& b, int grow = 0) {
    std::vector<std::uint8_t> bits(static_cast<size_t>(g.tokens()), 0);
    for (int f = 0; f < g.frames; ++f) {
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                bits[static_cast<size_t>(g.index(f, y, x))] = b.contains(y, x, grow) ? 1 : 0;
            }
        }
    }
    return bits;
}

/// lo <= bits <= hi elementwise.
inline bool between(const std::vector<std::uint8_t>& lo, const std::vector<std::uint8_t>& bits,
                    const std::vector<std::uint8_t>& hi) {
    for (size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] < lo[i] || bits[i] > hi[i]) {
            return false;
        }
    }
    return true;
}

inline double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    size_t inter = 0;
    size_t uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        inter += a[i] && b[i];
        uni += a[i] || b[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Attention records whose visual-query rows put `map` (in token order) on every
/// delta column, at each of `steps` for one layer.
inline ForwardRecords planted_attention(const GridMap& map, int text_len, const std::vector<int>& delta_columns,
                                        int layer, const std::vector<int>& steps) {
    const int n_vis = map.grid.tokens();
    const int total = text_len + n_vis;
    auto att = std::make_shared<AttentionMap>();
    att->weights = Matrix::Zero(total, total);
    att->layer = layer;
    att->text_len = text_len;
    for (int q = 0; q < n_vis; ++q) {
        for (int c : delta_columns) {
            att->weights(text_len + q, c) = static_cast<float>(map.values[static_cast<size_t>(q)]);
        }
    }
    ForwardRecords rec;
    for (int s : steps) {
        auto copy = std::make_shared<AttentionMap>(*att);
        copy->timestep = s;
        rec.attention[{layer, s}] = copy;
    }
    return rec;
}

inline DeltaTokens delta_of(std::vector<int> indices) {
    DeltaTokens d;
    d.indices = std::move(indices);
    for (int i : d.indices) {
        d.words.push_back("w" + std::to_string(i));
    }
    return d;
}

}  // namespace kvedit::testing
