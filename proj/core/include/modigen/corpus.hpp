// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modigen {

struct SourceUnit {
    std::filesystem::path path;
    std::string library_name;
    std::string modelica_version;
    std::string content;
};

struct ScanIssue {
    std::string path;
    std::string message;
};

struct ScanResult {
    std::vector<SourceUnit> units;
    std::vector<ScanIssue> issues;  // unreadable files; never fatal
};

/// One Dataset_all entry. Serialized with exactly five keys in this order:
/// "modelica version", "description", "documentation", "model", "source".
struct CorpusRecord {
    std::string modelica_version;
    std::string description;
    std::string documentation;
    std::string model;
    std::string source;

    /// source + "." + the record's class name. Not serialized; recomputed after loading.
    std::string qualified_name() const;

    bool operator==(const CorpusRecord& o) const {
        return modelica_version == o.modelica_version && description == o.description &&
               documentation == o.documentation && model == o.model && source == o.source;
    }
};

/// One Dataset_sft entry: "instruction", "query", "response".
struct SftRecord {
    std::string instruction;
    std::string query;
    std::string response;

    bool operator==(const SftRecord&) const = default;
};

enum class RejectReason { MissingDescription, MissingDocumentation, OversizeModel, NonModeling, Duplicate, ParseFailure };

std::string_view to_string(RejectReason reason);

struct Rejection {
    std::string qualified_name;
    RejectReason reason;
    std::string detail;
};

using RejectionLog = std::vector<Rejection>;

struct FilterPolicy {
    std::size_t max_model_chars = 20000;
    bool require_description = true;
    bool require_documentation = true;
    /// Off: reject only when every required field is empty. On: reject when any is.
    bool reject_any_missing = false;
    std::vector<std::string> excluded_name_markers = {"UserGuide", "UsersGuide", "Icon"};
};

/// Recursive scan in lexicographic path order; only regular `.mo` files are kept.
/// Throws IoError when `root` itself is not a readable directory.
ScanResult scan_library(const std::filesystem::path& root, std::string_view library_name,
                        std::string_view modelica_version);

/// Parses every unit and turns each non-package class into a record. Files that fail
/// to parse are logged as ParseFailure. Parsing fans out over `workers` threads, but
/// record order always follows unit order.
std::pair<std::vector<CorpusRecord>, RejectionLog> build_records(const std::vector<SourceUnit>& units,
                                                                 std::size_t workers = 1);

std::pair<std::vector<CorpusRecord>, RejectionLog> filter_records(const std::vector<CorpusRecord>& records,
                                                                  const FilterPolicy& policy);

/// Keeps the first record for each whitespace-normalized model text.
std::pair<std::vector<CorpusRecord>, RejectionLog> dedupe(const std::vector<CorpusRecord>& records);

/// Substitutes {description}, {documentation}, {source} and {model}.
/// Throws UnknownPlaceholder for any other {identifier}.
std::string fill_template(std::string_view tmpl, const CorpusRecord& record);

std::vector<SftRecord> build_sft_records(const std::vector<CorpusRecord>& records,
                                         std::string_view instruction_template, std::string_view query_template);

std::string to_json_line(const CorpusRecord& record);
std::string to_json_line(const SftRecord& record);
std::string to_json_line(const Rejection& rejection);
CorpusRecord corpus_record_from_json(std::string_view line);
SftRecord sft_record_from_json(std::string_view line);

/// Writes one JSON object per line (LF), atomically. Every model/response is checked
/// to re-parse as exactly one top-level class first; a violation throws FormatError
/// and nothing is written. Returns the number of lines.
std::size_t emit_jsonl(const std::vector<CorpusRecord>& records, const std::filesystem::path& out);
std::size_t emit_jsonl(const std::vector<SftRecord>& records, const std::filesystem::path& out);
void emit_rejections(const RejectionLog& log, const std::filesystem::path& out);

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);
std::vector<SftRecord> read_sft(const std::filesystem::path& path);

}  // namespace modigen
