// SPDX-License-Identifier: Apache-2.0
#include "modigen/clean.hpp"

#include <cctype>
#include <vector>

#include "modigen/error.hpp"
#include "modigen/lexer.hpp"

namespace modigen {
namespace {

bool only_blanks_before(std::string_view src, std::size_t offset) {
    while (offset > 0) {
        char c = src[offset - 1];
        if (c == '\n') return true;
        if (c != ' ' && c != '\t' && c != '\r') return false;
        --offset;
    }
    return true;
}

// Index of the token closing the parenthesis opened at `open`, or npos.
std::size_t matching_paren(const std::vector<Token>& toks, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < toks.size(); ++i) {
        if (toks[i].kind != TokenKind::Punctuation) continue;
        if (toks[i].text == "(") ++depth;
        if (toks[i].text == ")" && --depth == 0) return i;
    }
    return std::string::npos;
}

std::string tidy_lines(std::string_view text) {
    std::string out;
    std::size_t start = 0;
    bool prev_blank = false;
    bool first = true;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        std::size_t end = line.find_last_not_of(" \t\r\f\v");
        line = end == std::string_view::npos ? std::string_view{} : line.substr(0, end + 1);
        const bool blank = line.empty();
        if (!(blank && prev_blank)) {
            if (!first) out += '\n';
            out += line;
            first = false;
        }
        prev_blank = blank;
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    // Drop blank lines at the very end but keep a single final newline if one was present.
    const bool had_final_newline = !text.empty() && text.back() == '\n';
    while (!out.empty() && out.back() == '\n') out.pop_back();
    if (had_final_newline && !out.empty()) out += '\n';
    return out;
}

}  // namespace

std::string strip_annotations(std::string_view source) {
    const TokenList list = tokenize(source);
    const auto& toks = list.tokens;

    std::string out;
    out.reserve(source.size());
    std::size_t copied = 0;  // source offset up to which text has been emitted

    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!toks[i].is_keyword("annotation")) continue;
        const std::size_t kw = i;
        std::size_t open = kw + 1;
        while (open < toks.size() && toks[open].kind == TokenKind::Comment) ++open;
        if (open >= toks.size() || !toks[open].is(TokenKind::Punctuation, "("))
            throw UnbalancedAnnotation(toks[kw].line, toks[kw].column);
        const std::size_t close = matching_paren(toks, open);
        if (close == std::string::npos) throw UnbalancedAnnotation(toks[kw].line, toks[kw].column);
        i = close;

        std::size_t cut_begin = toks[kw].offset;
        std::size_t cut_end = toks[close].end_offset();

        // Previous token, comments included, and previous significant token.
        const Token* prev_any = kw > 0 ? &toks[kw - 1] : nullptr;
        const Token* prev = nullptr;
        for (std::size_t j = kw; j-- > 0;) {
            if (toks[j].kind != TokenKind::Comment) {
                prev = &toks[j];
                break;
            }
        }
        const bool standalone = prev == nullptr || prev->is(TokenKind::Punctuation, ";") ||
                                prev->is_keyword("equation") || prev->is_keyword("algorithm") ||
                                prev->is_keyword("public") || prev->is_keyword("protected");
        const bool line_leading = only_blanks_before(source, cut_begin);

        if (standalone && close + 1 < toks.size() && toks[close + 1].is(TokenKind::Punctuation, ";")) {
            // Annotation element: drop its ';' too, and the whole line when it stood alone.
            std::size_t rest = toks[close + 1].end_offset();
            while (rest < source.size() && (source[rest] == ' ' || source[rest] == '\t' || source[rest] == '\r')) ++rest;
            std::size_t line_start = cut_begin;
            while (line_start > 0 && source[line_start - 1] != '\n') --line_start;
            i = close + 1;
            if (line_leading && (rest >= source.size() || source[rest] == '\n') && line_start >= copied) {
                cut_begin = line_start;
                cut_end = rest < source.size() ? rest + 1 : rest;
            } else {
                cut_end = toks[close + 1].end_offset();
                while (cut_begin > copied && (source[cut_begin - 1] == ' ' || source[cut_begin - 1] == '\t')) --cut_begin;
            }
        } else if (line_leading && !standalone && prev_any != nullptr && prev_any->kind != TokenKind::Comment) {
            // Continuation of a declaration: join what follows onto the previous line.
            while (cut_begin > copied && std::isspace(static_cast<unsigned char>(source[cut_begin - 1]))) --cut_begin;
        } else if (!standalone && prev != nullptr &&
                   (prev->kind == TokenKind::String || prev->is(TokenKind::Punctuation, ")"))) {
            while (cut_begin > copied && (source[cut_begin - 1] == ' ' || source[cut_begin - 1] == '\t')) --cut_begin;
        }

        out.append(source.substr(copied, cut_begin - copied));
        copied = cut_end;
    }
    out.append(source.substr(copied));
    return tidy_lines(out);
}

std::string unquote_string(std::string_view lit) {
    if (lit.size() >= 2 && lit.front() == '"' && lit.back() == '"') lit = lit.substr(1, lit.size() - 2);
    std::string out;
    out.reserve(lit.size());
    for (std::size_t i = 0; i < lit.size(); ++i) {
        if (lit[i] == '\\' && i + 1 < lit.size()) {
            char n = lit[++i];
            switch (n) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case '\'': out += '\''; break;
                default: out += '\\'; out += n; break;
            }
        } else {
            out += lit[i];
        }
    }
    return out;
}

std::string extract_documentation(std::string_view annotation_text) {
    TokenList list;
    try {
        list = tokenize(annotation_text);
    } catch (const Error&) {
        return {};
    }
    std::vector<Token> toks;
    for (auto& t : list.tokens)
        if (t.kind != TokenKind::Comment) toks.push_back(std::move(t));

    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        if (!(toks[i].is(TokenKind::Identifier, "Documentation") && toks[i + 1].is(TokenKind::Punctuation, "(")))
            continue;
        const std::size_t close = matching_paren(toks, i + 1);
        const std::size_t limit = close == std::string::npos ? toks.size() : close;
        int depth = 0;
        for (std::size_t j = i + 2; j < limit; ++j) {
            const auto& t = toks[j];
            if (t.kind == TokenKind::Punctuation && (t.text == "(" || t.text == "{" || t.text == "[")) ++depth;
            if (t.kind == TokenKind::Punctuation && (t.text == ")" || t.text == "}" || t.text == "]")) --depth;
            if (depth != 0 || !t.is(TokenKind::Identifier, "info")) continue;
            if (j + 2 >= limit || !toks[j + 1].is(TokenKind::Operator, "=")) continue;
            std::string doc;
            std::size_t k = j + 2;
            while (k < limit && toks[k].kind == TokenKind::String) {
                doc += unquote_string(toks[k].text);
                if (k + 2 < limit && toks[k + 1].is(TokenKind::Operator, "+") && toks[k + 2].kind == TokenKind::String)
                    k += 2;
                else
                    break;
            }
            return doc;
        }
    }
    return {};
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

}  // namespace modigen
