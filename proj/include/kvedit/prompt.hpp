// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/tensor.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace kvedit {

/// Lower-cased word tokens; punctuation separates words and is dropped.
std::vector<std::string> tokenize(std::string_view prompt);

/// Prompt embedding: one row per text slot, padded to the model's text length.
struct PromptEmbedding {
    Matrix rows;                      // [text_len x embed_dim]
    std::vector<std::string> tokens;  // tokens actually placed (after truncation)
    bool truncated = false;
};

/// Hash-seeded embedding table. Each distinct token string maps to a fixed
/// Gaussian vector; unused slots hold the "<pad>" vector.
class PromptEmbedder {
public:
    PromptEmbedder(int text_len, int embed_dim, std::uint64_t seed);

    PromptEmbedding embed(std::string_view prompt) const;
    Vector token_vector(std::string_view token) const;

    int text_len() const { return text_len_; }
    int embed_dim() const { return embed_dim_; }

private:
    int text_len_;
    int embed_dim_;
    std::uint64_t seed_;
};

}  // namespace kvedit
