// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace modigen {

enum class TokenKind { Keyword, Identifier, Number, String, Operator, Punctuation, Comment };

std::string_view to_string(TokenKind kind);

struct Token {
    TokenKind kind;
    std::string text;     // verbatim slice of the input
    std::string leading;  // whitespace between the previous token and this one
    int line = 1;
    int column = 1;
    std::size_t offset = 0;  // byte offset of text in the input

    std::size_t end_offset() const { return offset + text.size(); }
    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_keyword(std::string_view t) const { return is(TokenKind::Keyword, t); }
};

/// Token stream plus whatever whitespace follows the final token.
struct TokenList {
    std::vector<Token> tokens;
    std::string trailing;
};

bool is_keyword(std::string_view word);

/// Lossless lexer for Modelica source. Comments are kept as Comment tokens.
/// Throws UnterminatedString, UnterminatedComment or InvalidCharacter.
TokenList tokenize(std::string_view source);

/// Inverse of tokenize: reproduces the original input byte-for-byte.
std::string detokenize(const TokenList& list);

}  // namespace modigen
