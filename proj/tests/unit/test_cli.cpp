// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/harness.hpp"

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

using kvedit::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run kvedit_cli(const std::string& args, const std::string& redirect) {
    const std::string cmd = std::string(KVEDIT_CLI) + " " + args + " " + redirect;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    Run r;
    char buf[512];
    while (std::fgets(buf, sizeof(buf), p)) {
        r.out += buf;
    }
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
        s.replace(at, from.size(), to);
    }
    return s;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("error lines and exit codes match the golden table") {
    TempDir tmp("cli");
    const std::string golden = KVEDIT_GOLDEN_DIR;
    std::ifstream in(golden + "/cli_errors.tsv");
    REQUIRE(in.good());
    std::string line;
    int cases = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 + 1);
        REQUIRE(t2 != std::string::npos);
        const std::string args = replace_all(line.substr(0, t1), "{golden}", golden);
        const int code = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        const std::string expect = replace_all(line.substr(t2 + 1), "{golden}", golden) + "\n";
        const auto out = (tmp / ("case" + std::to_string(cases))).string();
        const Run r = kvedit_cli(args + " --out " + out, "2>&1 >/dev/null");
        CAPTURE(args);
        CHECK(r.code == code);
        CHECK(r.out == expect);
        ++cases;
    }
    CHECK(cases >= 14);
}

TEST_CASE("success prints command, id and directory") {
    TempDir tmp("cli-ok");
    const auto dir = (tmp / "g").string();
    const Run r = kvedit_cli("generate --prompt \"a red kite\" --steps 4 --out " + dir, "2>/dev/null");
    CHECK(r.code == 0);
    const auto m = kvedit::Manifest::load(dir);
    CHECK(r.out == "generate " + m.id + " " + dir + "\n");

    // a manifest passed as --config re-runs the same experiment
    const auto again = (tmp / "h").string();
    const Run r2 = kvedit_cli("generate --config " + dir + "/manifest.json --out " + again, "2>/dev/null");
    CHECK(r2.code == 0);
    CHECK(kvedit::Manifest::load(again).id == m.id);
    CHECK(kvedit::sha256_file(dir + "/video.tvlv") == kvedit::sha256_file(again + "/video.tvlv"));
}

TEST_CASE("help and version exit cleanly") {
    CHECK(kvedit_cli("--help", "2>&1").code == 0);
    const Run v = kvedit_cli("--version", "2>&1");
    CHECK(v.code == 0);
    CHECK(v.out == "kvedit 0.1.0\n");
    CHECK(kvedit_cli("edit-add --help", "2>&1").out.find("--t-mask") != std::string::npos);
}

}
