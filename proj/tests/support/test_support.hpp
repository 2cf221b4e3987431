// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "modigen/io.hpp"

namespace modigen::test {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(MODIGEN_FIXTURES_DIR) / rel; }

inline std::string fixture_text(const std::string& rel) { return read_file(fixture(rel)); }

inline std::vector<fs::path> corpus_files() {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(fixture("corpus")))
        if (e.path().extension() == ".mo") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = fs::temp_directory_path() / ("modigen-test-" + std::to_string(rng()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

}  // namespace modigen::test
