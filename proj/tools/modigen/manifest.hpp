// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace modigen::cli {

struct RunManifest {
    std::string tool_version;
    std::string subcommand;
    std::map<std::string, std::string> flags;
    std::map<std::string, std::string> input_digests;  // path -> sha256 hex, or "missing"
    std::string started;
    std::string finished;
    int exit_code = 0;
};

/// Hex SHA-256 of a file's bytes. Throws IoError when it cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Current UTC time as an ISO-8601 string with millisecond precision.
std::string utc_timestamp();

std::string to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace modigen::cli
