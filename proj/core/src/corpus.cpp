// SPDX-License-Identifier: Apache-2.0
#include "modigen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "modigen/clean.hpp"
#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/parallel.hpp"
#include "modigen/parser.hpp"

namespace modigen {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::MissingDescription: return "MissingDescription";
        case RejectReason::MissingDocumentation: return "MissingDocumentation";
        case RejectReason::OversizeModel: return "OversizeModel";
        case RejectReason::NonModeling: return "NonModeling";
        case RejectReason::Duplicate: return "Duplicate";
        case RejectReason::ParseFailure: return "ParseFailure";
    }
    return "?";
}

std::string CorpusRecord::qualified_name() const {
    const std::string name = first_class_name(model);
    if (source.empty()) return name;
    if (name.empty()) return source;
    return source + "." + name;
}

ScanResult scan_library(const fs::path& root, std::string_view library_name, std::string_view modelica_version) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError(root.string(), "not a readable directory");

    std::vector<fs::path> files;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw IoError(root.string(), ec.message());
    for (const fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
        if (ec) break;
        if (it->is_regular_file(ec) && it->path().extension() == ".mo") files.push_back(it->path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

    ScanResult result;
    for (const auto& f : files) {
        try {
            result.units.push_back({f, std::string(library_name), std::string(modelica_version), read_file(f)});
        } catch (const IoError& e) {
            result.issues.push_back({f.string(), e.what()});
        }
    }
    return result;
}

namespace {

bool single_top_level_class(std::string_view text) {
    try {
        const auto comps = parse_unit(text);
        return std::count_if(comps.begin(), comps.end(), [](const Component& c) { return c.enclosing.empty(); }) == 1;
    } catch (const Error&) {
        return false;
    }
}

std::string parent_path(const std::string& qualified) {
    const auto dot = qualified.rfind('.');
    return dot == std::string::npos ? std::string{} : qualified.substr(0, dot);
}

}  // namespace

std::pair<std::vector<CorpusRecord>, RejectionLog> build_records(const std::vector<SourceUnit>& units,
                                                                 std::size_t workers) {
    struct UnitOutcome {
        std::vector<CorpusRecord> records;
        std::optional<Rejection> failure;
    };
    std::vector<UnitOutcome> outcomes(units.size());

    parallel_for(units.size(), workers, [&](std::size_t, std::size_t i) {
        const SourceUnit& u = units[i];
        try {
            for (const Component& c : parse_unit(u.content, u.library_name)) {
                if (c.kind == ComponentKind::Package) continue;
                CorpusRecord r;
                r.modelica_version = u.modelica_version;
                r.description = c.description;
                r.documentation = c.documentation;
                r.model = c.cleaned_source;
                r.source = parent_path(c.qualified_name);
                outcomes[i].records.push_back(std::move(r));
            }
        } catch (const Error& e) {
            outcomes[i].failure = Rejection{u.path.string(), RejectReason::ParseFailure, e.what()};
        }
    });

    std::vector<CorpusRecord> records;
    RejectionLog log;
    for (auto& o : outcomes) {
        if (o.failure) log.push_back(std::move(*o.failure));
        for (auto& r : o.records) records.push_back(std::move(r));
    }
    return {std::move(records), std::move(log)};
}

std::pair<std::vector<CorpusRecord>, RejectionLog> filter_records(const std::vector<CorpusRecord>& records,
                                                                  const FilterPolicy& policy) {
    if (policy.max_model_chars == 0) throw Error("max_model_chars must be positive");
    std::vector<CorpusRecord> kept;
    RejectionLog log;
    for (const auto& r : records) {
        const std::string name = r.qualified_name();
        const bool non_modeling =
            std::any_of(policy.excluded_name_markers.begin(), policy.excluded_name_markers.end(),
                        [&](const std::string& m) { return !m.empty() && name.find(m) != std::string::npos; });
        if (non_modeling) {
            log.push_back({name, RejectReason::NonModeling, {}});
            continue;
        }

        std::vector<RejectReason> missing;
        int required = 0;
        if (policy.require_description) {
            ++required;
            if (r.description.empty()) missing.push_back(RejectReason::MissingDescription);
        }
        if (policy.require_documentation) {
            ++required;
            if (r.documentation.empty()) missing.push_back(RejectReason::MissingDocumentation);
        }
        const bool reject_missing = policy.reject_any_missing
                                        ? !missing.empty()
                                        : required > 0 && static_cast<int>(missing.size()) == required;
        if (reject_missing) {
            log.push_back({name, missing.front(), {}});
            continue;
        }

        if (r.model.size() > policy.max_model_chars) {
            log.push_back({name, RejectReason::OversizeModel, std::to_string(r.model.size()) + " chars"});
            continue;
        }
        kept.push_back(r);
    }
    return {std::move(kept), std::move(log)};
}

std::pair<std::vector<CorpusRecord>, RejectionLog> dedupe(const std::vector<CorpusRecord>& records) {
    std::unordered_set<std::string> seen;
    std::vector<CorpusRecord> kept;
    RejectionLog log;
    for (const auto& r : records) {
        if (seen.insert(normalize_whitespace(r.model)).second)
            kept.push_back(r);
        else
            log.push_back({r.qualified_name(), RejectReason::Duplicate, {}});
    }
    return {std::move(kept), std::move(log)};
}

std::string fill_template(std::string_view tmpl, const CorpusRecord& record) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out += tmpl[i++];
            continue;
        }
        std::size_t j = i + 1;
        while (j < tmpl.size() && (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
        if (j == i + 1 || j >= tmpl.size() || tmpl[j] != '}') {
            out += tmpl[i++];  // not a placeholder, e.g. a Modelica array literal
            continue;
        }
        const std::string_view name = tmpl.substr(i + 1, j - i - 1);
        if (name == "description")
            out += record.description;
        else if (name == "documentation")
            out += record.documentation;
        else if (name == "source")
            out += record.source;
        else if (name == "model")
            out += record.model;
        else
            throw UnknownPlaceholder(std::string(name));
        i = j + 1;
    }
    return out;
}

std::vector<SftRecord> build_sft_records(const std::vector<CorpusRecord>& records,
                                         std::string_view instruction_template, std::string_view query_template) {
    std::vector<SftRecord> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back({fill_template(instruction_template, r), fill_template(query_template, r), r.model});
    return out;
}

std::string to_json_line(const CorpusRecord& r) {
    ojson j;
    j["modelica version"] = r.modelica_version;
    j["description"] = r.description;
    j["documentation"] = r.documentation;
    j["model"] = r.model;
    j["source"] = r.source;
    return j.dump();
}

std::string to_json_line(const SftRecord& r) {
    ojson j;
    j["instruction"] = r.instruction;
    j["query"] = r.query;
    j["response"] = r.response;
    return j.dump();
}

std::string to_json_line(const Rejection& r) {
    ojson j;
    j["name"] = r.qualified_name;
    j["reason"] = to_string(r.reason);
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j.dump();
}

namespace {

ojson parse_object(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid JSON line: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("JSON line is not an object");
    return j;
}

std::string required_string(const ojson& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw FormatError(std::string("missing string field \"") + key + "\"");
    return it->get<std::string>();
}

}  // namespace

CorpusRecord corpus_record_from_json(std::string_view line) {
    const ojson j = parse_object(line);
    return {required_string(j, "modelica version"), required_string(j, "description"),
            required_string(j, "documentation"), required_string(j, "model"), required_string(j, "source")};
}

SftRecord sft_record_from_json(std::string_view line) {
    const ojson j = parse_object(line);
    return {required_string(j, "instruction"), required_string(j, "query"), required_string(j, "response")};
}

std::size_t emit_jsonl(const std::vector<CorpusRecord>& records, const fs::path& out) {
    std::string text;
    for (const auto& r : records) {
        if (r.model.empty() || !single_top_level_class(r.model))
            throw FormatError("record " + r.qualified_name() + ": model does not re-parse as exactly one class");
        text += to_json_line(r);
        text += '\n';
    }
    write_file_atomic(out, text);
    return records.size();
}

std::size_t emit_jsonl(const std::vector<SftRecord>& records, const fs::path& out) {
    std::string text;
    for (const auto& r : records) {
        if (!single_top_level_class(r.response))
            throw FormatError("SFT response does not re-parse as exactly one class");
        text += to_json_line(r);
        text += '\n';
    }
    write_file_atomic(out, text);
    return records.size();
}

void emit_rejections(const RejectionLog& log, const fs::path& out) {
    std::string text;
    for (const auto& r : log) {
        text += to_json_line(r);
        text += '\n';
    }
    write_file_atomic(out, text);
}

std::vector<CorpusRecord> read_corpus(const fs::path& path) {
    std::vector<CorpusRecord> out;
    for (const auto& line : read_jsonl_lines(path)) out.push_back(corpus_record_from_json(line));
    return out;
}

std::vector<SftRecord> read_sft(const fs::path& path) {
    std::vector<SftRecord> out;
    for (const auto& line : read_jsonl_lines(path)) out.push_back(sft_record_from_json(line));
    return out;
}

}  // namespace modigen
