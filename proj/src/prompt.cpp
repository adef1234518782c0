// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/prompt.hpp"

#include "kvedit/error.hpp"

#include <cctype>
#include <cmath>

namespace kvedit {

std::vector<std::string> tokenize(std::string_view prompt) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : prompt) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '\'') {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

PromptEmbedder::PromptEmbedder(int text_len, int embed_dim, std::uint64_t seed)
    : text_len_(text_len), embed_dim_(embed_dim), seed_(seed) {
    require(text_len > 0 && embed_dim > 0, ErrorKind::config, "prompt embedder dimensions must be positive");
}

Vector PromptEmbedder::token_vector(std::string_view token) const {
    GaussianStream rng(mix_seed(seed_, fnv1a64(token)));
    Vector v(embed_dim_);
    rng.fill(std::span<float>(v.data(), static_cast<size_t>(v.size())));
    return v;
}

PromptEmbedding PromptEmbedder::embed(std::string_view prompt) const {
    PromptEmbedding out;
    auto tokens = tokenize(prompt);
    if (static_cast<int>(tokens.size()) > text_len_) {
        tokens.resize(static_cast<size_t>(text_len_));
        out.truncated = true;
    }
    out.rows.resize(text_len_, embed_dim_);
    const Vector pad = token_vector("<pad>");
    for (int i = 0; i < text_len_; ++i) {
        out.rows.row(i) = i < static_cast<int>(tokens.size()) ? token_vector(tokens[static_cast<size_t>(i)]) : pad;
    }
    out.tokens = std::move(tokens);
    return out;
}

}  // namespace kvedit
