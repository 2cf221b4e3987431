// SPDX-License-Identifier: Apache-2.0
#include "manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "modigen/error.hpp"
#include "modigen/io.hpp"

namespace modigen::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
        if (in.eof()) break;
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    hex.reserve(len * 2);
    char pair[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(pair, sizeof pair, "%02x", md[i]);
        hex += pair;
    }
    return hex;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

std::string to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool_version"] = m.tool_version;
    j["subcommand"] = m.subcommand;
    j["flags"] = m.flags;
    j["input_digests"] = m.input_digests;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["exit_code"] = m.exit_code;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    write_file_atomic(path, to_json(m));
}

}  // namespace modigen::cli
