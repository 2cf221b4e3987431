// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace modigen {

/// Reads a whole file. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file and renames it over `path`, so readers
/// never observe a partial file. Parent directories are created. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Non-blank lines of a JSONL file, with trailing '\r' removed. Throws IoError.
std::vector<std::string> read_jsonl_lines(const std::filesystem::path& path);

}  // namespace modigen
