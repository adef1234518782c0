// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/error.hpp"
#include "kvedit/sampler.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>
#include <unistd.h>

namespace kvedit::testing {

/// Default toy model over a short schedule; cheap enough for unit tests.
inline const Pipeline& short_pipeline() {
    static const Pipeline pipe(ModelConfig{}, DenoiseSchedule{8, 1000});
    return pipe;
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected a kvedit::Error");
    return ErrorKind::io;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() / ("kvedit-" + tag + "-" + std::to_string(getpid()))) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

}  // namespace kvedit::testing
