// SPDX-License-Identifier: Apache-2.0
#include "modigen/lexer.hpp"

#include <algorithm>
#include <array>

#include "modigen/error.hpp"

namespace modigen {
namespace {

constexpr std::array<std::string_view, 59> kKeywords = {
    "algorithm",   "and",       "annotation", "block",         "break",     "class",
    "connect",     "connector", "constant",   "constrainedby", "der",       "discrete",
    "each",        "else",      "elseif",     "elsewhen",      "encapsulated", "end",
    "enumeration", "equation",  "expandable", "extends",       "external",  "false",
    "final",       "flow",      "for",        "function",      "if",        "import",
    "impure",      "in",        "initial",    "inner",         "input",     "loop",
    "model",       "not",       "operator",   "or",            "outer",     "output",
    "package",     "parameter", "partial",    "protected",     "public",    "pure",
    "record",      "redeclare", "replaceable", "return",       "stream",    "then",
    "true",        "type",      "when",       "while",         "within",
};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    TokenList run() {
        TokenList out;
        std::size_t ws_start = 0;
        // A UTF-8 byte order mark is carried as leading whitespace of the first token.
        if (src_.substr(0, 3) == "\xEF\xBB\xBF") {
            pos_ = 3;
        }
        while (true) {
            while (pos_ < src_.size() && is_space(src_[pos_])) advance(1);
            std::string leading(src_.substr(ws_start, pos_ - ws_start));
            if (pos_ >= src_.size()) {
                out.trailing = std::move(leading);
                return out;
            }
            Token tok = next();
            tok.leading = std::move(leading);
            out.tokens.push_back(std::move(tok));
            ws_start = pos_;
        }
    }

private:
    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
        }
    }

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    Token make(TokenKind kind, std::size_t start, int line, int col) const {
        Token t;
        t.kind = kind;
        t.text = std::string(src_.substr(start, pos_ - start));
        t.line = line;
        t.column = col;
        t.offset = start;
        return t;
    }

    Token next() {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        const char c = peek();

        if (c == '/' && peek(1) == '/') {
            while (pos_ < src_.size() && src_[pos_] != '\n') advance(1);
            return make(TokenKind::Comment, start, line, col);
        }
        if (c == '/' && peek(1) == '*') {
            advance(2);
            while (true) {
                if (pos_ >= src_.size()) throw UnterminatedComment(line, col);
                if (peek() == '*' && peek(1) == '/') {
                    advance(2);
                    break;
                }
                advance(1);
            }
            return make(TokenKind::Comment, start, line, col);
        }
        if (c == '"') {
            advance(1);
            while (true) {
                if (pos_ >= src_.size()) throw UnterminatedString(line, col);
                if (peek() == '\\') {
                    advance(2);
                    continue;
                }
                if (peek() == '"') {
                    advance(1);
                    break;
                }
                advance(1);
            }
            return make(TokenKind::String, start, line, col);
        }
        if (c == '\'') {
            // Quoted identifier.
            advance(1);
            while (true) {
                if (pos_ >= src_.size() || peek() == '\n') throw UnterminatedString(line, col);
                if (peek() == '\\') {
                    advance(2);
                    continue;
                }
                if (peek() == '\'') {
                    advance(1);
                    break;
                }
                advance(1);
            }
            return make(TokenKind::Identifier, start, line, col);
        }
        if (is_ident_start(c)) {
            while (is_ident_char(peek())) advance(1);
            Token t = make(TokenKind::Identifier, start, line, col);
            if (is_keyword(t.text)) t.kind = TokenKind::Keyword;
            return t;
        }
        if (is_digit(c)) {
            while (is_digit(peek())) advance(1);
            if (peek() == '.' && !(peek(1) == '+' || peek(1) == '-' || peek(1) == '*' ||
                                   peek(1) == '/' || peek(1) == '^')) {
                advance(1);
                while (is_digit(peek())) advance(1);
            }
            if (peek() == 'e' || peek() == 'E') {
                std::size_t k = 1;
                if (peek(1) == '+' || peek(1) == '-') k = 2;
                if (is_digit(peek(k))) {
                    advance(k);
                    while (is_digit(peek())) advance(1);
                }
            }
            return make(TokenKind::Number, start, line, col);
        }

        auto two = src_.substr(pos_, 2);
        static constexpr std::array<std::string_view, 10> kTwoCharOps = {
            ":=", "<=", ">=", "==", "<>", ".+", ".-", ".*", "./", ".^"};
        if (std::find(kTwoCharOps.begin(), kTwoCharOps.end(), two) != kTwoCharOps.end()) {
            advance(2);
            return make(TokenKind::Operator, start, line, col);
        }
        switch (c) {
            case '=': case '+': case '-': case '*': case '/': case '^': case '<': case '>':
                advance(1);
                return make(TokenKind::Operator, start, line, col);
            case ';': case ',': case '(': case ')': case '[': case ']': case '{': case '}':
            case '.': case ':':
                advance(1);
                return make(TokenKind::Punctuation, start, line, col);
            default:
                break;
        }
        std::string shown = (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f)
                                ? "byte 0x" + to_hex(static_cast<unsigned char>(c))
                                : std::string("'") + c + "'";
        throw InvalidCharacter(line, col, "unexpected character " + shown);
    }

    static std::string to_hex(unsigned char b) {
        static constexpr char digits[] = "0123456789abcdef";
        return {digits[b >> 4], digits[b & 0xf]};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace

std::string_view to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Keyword: return "keyword";
        case TokenKind::Identifier: return "identifier";
        case TokenKind::Number: return "number";
        case TokenKind::String: return "string";
        case TokenKind::Operator: return "operator";
        case TokenKind::Punctuation: return "punctuation";
        case TokenKind::Comment: return "comment";
    }
    return "?";
}

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

TokenList tokenize(std::string_view source) { return Lexer(source).run(); }

std::string detokenize(const TokenList& list) {
    std::string out;
    for (const auto& t : list.tokens) {
        out += t.leading;
        out += t.text;
    }
    out += list.trailing;
    return out;
}

}  // namespace modigen
