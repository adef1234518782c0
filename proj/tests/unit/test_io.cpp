// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/io.hpp"
#include "kvedit/prompt.hpp"

#include <cmath>
#include <cstring>
#include <limits>

using namespace kvedit;
using kvedit::testing::kind_of;
using kvedit::testing::TempDir;

TEST_SUITE("io") {

TEST_CASE("tensor header layout") {
    Tensor t;
    t.dims = {2, 3};
    t.data = {1, 2, 3, 4, 5, 6};
    const auto b = encode_tensor(t);
    REQUIRE(b.size() == 8 + 2 * 4 + 6 * 4);
    CHECK(std::memcmp(b.data(), "TVLV", 4) == 0);
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    CHECK(b[6] == 0);
    CHECK(b[7] == 2);
    CHECK(b[8] == 2);   // little-endian u32
    CHECK(b[12] == 3);
    CHECK(decode_tensor(b) == t);
}

TEST_CASE("scalar, empty and special values round trip") {
    Tensor scalar;
    scalar.data = {-0.0f};
    auto back = decode_tensor(encode_tensor(scalar));
    CHECK(back.dims.empty());
    CHECK(std::signbit(back.data.at(0)));

    Tensor empty;
    empty.dims = {4, 0, 2};
    CHECK(decode_tensor(encode_tensor(empty)) == empty);

    Tensor special;
    special.dims = {3};
    special.data = {std::numeric_limits<float>::infinity(), std::numeric_limits<float>::denorm_min(),
                    std::numeric_limits<float>::quiet_NaN()};
    back = decode_tensor(encode_tensor(special));
    CHECK(std::memcmp(back.data.data(), special.data.data(), 12) == 0);
}

TEST_CASE("malformed tensor files name the offset") {
    Tensor t;
    t.dims = {2};
    t.data = {1, 2};
    const auto good = encode_tensor(t);

    auto expect = [](std::vector<std::uint8_t> bytes, const std::string& needle) {
        try {
            decode_tensor(bytes);
            FAIL("decoded a malformed file");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::format);
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
        }
    };
    auto bad = good;
    bad[0] = 'X';
    expect(bad, "bad magic at offset 0");
    bad = good;
    bad[4] = 2;
    expect(bad, "unsupported version 2 at offset 4");
    bad = good;
    bad[6] = 1;
    expect(bad, "dtype code 1 at offset 6");
    expect({good.begin(), good.begin() + 5}, "header truncated");
    expect({good.begin(), good.end() - 1}, "at offset 12");
    bad = good;
    bad.push_back(0);
    expect(bad, "payload holds 9 bytes");
}

TEST_CASE("video and latent tensors keep their shapes") {
    Video v(2, 3, 4);
    for (size_t i = 0; i < v.pixels.size(); ++i) {
        v.pixels[i] = static_cast<float>(i) / 100.0f;
    }
    const Tensor t = to_tensor(v);
    CHECK(t.dims == std::vector<std::uint32_t>{2, 3, 4, 3});
    CHECK(video_from_tensor(t) == v);

    LatentVideo z(LatentGrid{2, 2, 2}, 5);
    z.data.setRandom();
    const LatentVideo back = latent_from_tensor(to_tensor(z));
    CHECK(back.grid == z.grid);
    CHECK(back.data == z.data);
    CHECK(kind_of([&] { video_from_tensor(to_tensor(z)); }) == ErrorKind::format);
}

TEST_CASE("files, frames and json") {
    TempDir dir("io");
    Tensor t;
    t.dims = {3};
    t.data = {1, 2, 3};
    write_tensor(dir / "a/b/t.tvlv", t);
    CHECK(read_tensor(dir / "a/b/t.tvlv") == t);
    CHECK(kind_of([&] { read_tensor(dir / "missing.tvlv"); }) == ErrorKind::io);

    Video v(3, 4, 5);
    for (size_t i = 0; i < v.pixels.size(); ++i) {
        v.pixels[i] = static_cast<float>(i % 256) / 255.0f;
    }
    const auto names = dump_frames(dir / "frames", v);
    CHECK(names == std::vector<std::string>{"0000.png", "0001.png", "0002.png"});
    const Video loaded = load_frames(dir / "frames");
    REQUIRE(loaded.same_shape(v));
    for (size_t i = 0; i < v.pixels.size(); ++i) {
        CHECK(loaded.pixels[i] == doctest::Approx(v.pixels[i]).epsilon(0.5 / 255.0));
    }
    CHECK(sha256_file(dir / "frames/0001.png") == sha256_file(dir / "frames/0001.png"));
    dump_frames(dir / "again", v);
    CHECK(sha256_file(dir / "again/0002.png") == sha256_file(dir / "frames/0002.png"));

    const Json j = {{"b", 1}, {"a", {{"z", 2}, {"y", 3}}}};
    CHECK(dump_json(j) == "{\n  \"a\": {\n    \"y\": 3,\n    \"z\": 2\n  },\n  \"b\": 1\n}\n");
    write_text(dir / "bad.json", "{oops");
    CHECK(kind_of([&] { read_json(dir / "bad.json"); }) == ErrorKind::format);
}

TEST_CASE("sha256 known answer") {
    const std::string abc = "abc";
    CHECK(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("tokenizer and prompt embedding") {
    CHECK(tokenize("A Dog, running!  in the park") ==
          std::vector<std::string>{"a", "dog", "running", "in", "the", "park"});
    CHECK(tokenize("").empty());
    const PromptEmbedder emb(4, 8, 1);
    const auto e = emb.embed("one two three four five");
    CHECK(e.truncated);
    CHECK(e.tokens.size() == 4);
    const auto short_e = emb.embed("dog");
    CHECK(short_e.rows.row(0) == emb.token_vector("dog"));
    CHECK(short_e.rows.row(3) == emb.token_vector("<pad>"));
    CHECK(emb.embed("Dog").rows == short_e.rows);
}

TEST_CASE("gaussian stream is seeded and unit-scaled") {
    GaussianStream a(7), b(7);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = a.next();
        CHECK(x == b.next());
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / 20000.0) < 0.03);
    CHECK(std::abs(sq / 20000.0 - 1.0) < 0.05);
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

}
