// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "modigen/error.hpp"
#include "modigen/lexer.hpp"
#include "test_support.hpp"

namespace modigen {
namespace {

std::vector<std::pair<TokenKind, std::string>> kinds(std::string_view src) {
    std::vector<std::pair<TokenKind, std::string>> out;
    for (const auto& t : tokenize(src).tokens) out.emplace_back(t.kind, t.text);
    return out;
}

TEST(Lexer, MinimalUnit) {
    using K = TokenKind;
    const auto got = kinds("model A end A;");
    const std::vector<std::pair<TokenKind, std::string>> want = {
        {K::Keyword, "model"}, {K::Identifier, "A"}, {K::Keyword, "end"}, {K::Identifier, "A"}, {K::Punctuation, ";"}};
    EXPECT_EQ(got, want);
}

TEST(Lexer, BouncingBallKeywords) {
    const auto list = tokenize(test::fixture_text("listings/BouncingBall.mo"));
    for (const char* kw : {"model", "constant", "parameter", "equation", "when", "then", "end"}) {
        const bool found = std::any_of(list.tokens.begin(), list.tokens.end(),
                                       [&](const Token& t) { return t.is_keyword(kw); });
        EXPECT_TRUE(found) << kw;
    }
    // the misspelt identifier is kept as-is
    EXPECT_TRUE(std::any_of(list.tokens.begin(), list.tokens.end(),
                            [](const Token& t) { return t.is(TokenKind::Identifier, "redius"); }));
}

TEST(Lexer, CommentsAreTokens) {
    const auto got = kinds("x = 1; // tail\n/* block\n comment */ y");
    ASSERT_EQ(got.size(), 7u);
    EXPECT_EQ(got[4], std::make_pair(TokenKind::Comment, std::string("// tail")));
    EXPECT_EQ(got[5], std::make_pair(TokenKind::Comment, std::string("/* block\n comment */")));
}

TEST(Lexer, NumbersStringsOperators) {
    using K = TokenKind;
    const auto got = kinds("a := 1.5e-3 .* b <= \"s\\\"q\" <> 'q id' .5");
    const std::vector<std::pair<TokenKind, std::string>> want = {
        {K::Identifier, "a"}, {K::Operator, ":="}, {K::Number, "1.5e-3"}, {K::Operator, ".*"},
        {K::Identifier, "b"}, {K::Operator, "<="}, {K::String, "\"s\\\"q\""}, {K::Operator, "<>"},
        {K::Identifier, "'q id'"}, {K::Punctuation, "."}, {K::Number, "5"}};  // no leading-dot numbers
    EXPECT_EQ(got, want);
}

TEST(Lexer, Positions) {
    const auto list = tokenize("model A\n  Real x;\nend A;");
    const Token& x = list.tokens[3];
    EXPECT_EQ(x.text, "x");
    EXPECT_EQ(x.line, 2);
    EXPECT_EQ(x.column, 8);
}

TEST(Lexer, UnterminatedComment) {
    try {
        tokenize("x = /*unterminated");
        FAIL();
    } catch (const UnterminatedComment& e) {
        EXPECT_EQ(e.line(), 1);
        EXPECT_EQ(e.column(), 5);
    }
}

TEST(Lexer, UnterminatedString) {
    try {
        tokenize("model A\n  parameter String s = \"open;\nend A;");
        FAIL();
    } catch (const UnterminatedString& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.column(), 24);
    }
}

TEST(Lexer, InvalidCharacter) { EXPECT_THROW(tokenize("x = 1 # 2;"), InvalidCharacter); }

TEST(LexerProperty, LosslessOverCorpus) {
    const auto files = test::corpus_files();
    ASSERT_GE(files.size(), 20u);
    for (const auto& f : files) {
        const std::string src = read_file(f);
        EXPECT_EQ(detokenize(tokenize(src)), src) << f;
    }
}

TEST(LexerProperty, LosslessOnRandomTokenSoup) {
    const std::vector<std::string> pieces = {"model", " ", "\n", "x1", "=", "1.25", "\"s\"", "// c\n", "/* c */",
                                             "(", ")", ";", "der", "\t", "'q'", "<=", ".", "e", "2"};
    std::mt19937 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        std::string src;
        const int n = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int i = 0; i < n; ++i) src += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
        TokenList list;
        try {
            list = tokenize(src);
        } catch (const Error&) {
            continue;
        }
        ASSERT_EQ(detokenize(list), src);
        for (const auto& t : list.tokens) ASSERT_EQ(src.substr(t.offset, t.text.size()), t.text);
    }
}

}  // namespace
}  // namespace modigen
