// SPDX-License-Identifier: Apache-2.0
#include "modigen/parser.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>

#include "modigen/clean.hpp"
#include "modigen/error.hpp"
#include "modigen/lexer.hpp"

namespace modigen {

std::string_view to_string(ComponentKind kind) {
    switch (kind) {
        case ComponentKind::Model: return "model";
        case ComponentKind::PartialModel: return "partial model";
        case ComponentKind::Function: return "function";
        case ComponentKind::Block: return "block";
        case ComponentKind::Connector: return "connector";
        case ComponentKind::Class: return "class";
        case ComponentKind::Record: return "record";
        case ComponentKind::Package: return "package";
        case ComponentKind::Type: return "type";
    }
    return "?";
}

std::optional<ComponentKind> component_kind_from_string(std::string_view s) {
    for (auto k : {ComponentKind::Model, ComponentKind::PartialModel, ComponentKind::Function,
                   ComponentKind::Block, ComponentKind::Connector, ComponentKind::Class,
                   ComponentKind::Record, ComponentKind::Package, ComponentKind::Type}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

bool Component::same_structure(const Component& o) const {
    auto eq_text = [](const std::vector<Equation>& a, const std::vector<Equation>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].kind != b[i].kind || normalize_whitespace(a[i].text) != normalize_whitespace(b[i].text))
                return false;
        }
        return true;
    };
    return kind == o.kind && is_partial == o.is_partial && name == o.name && qualified_name == o.qualified_name &&
           description == o.description && parameters == o.parameters && constants == o.constants &&
           variables == o.variables && extends_clauses == o.extends_clauses &&
           instantiations == o.instantiations && connects == o.connects && eq_text(equations, o.equations);
}

namespace {

// Removes up to `indent` leading blanks from every line after the first, leaving
// lines that start inside a string literal untouched.
std::string dedent(std::string_view text, std::size_t indent) {
    if (indent == 0) return std::string(text);
    std::vector<std::pair<std::size_t, std::size_t>> strings;
    try {
        for (const auto& t : tokenize(text).tokens)
            if (t.kind == TokenKind::String) strings.emplace_back(t.offset, t.end_offset());
    } catch (const Error&) {
        return std::string(text);
    }
    auto in_string = [&](std::size_t off) {
        for (const auto& [b, e] : strings)
            if (off > b && off < e) return true;
        return false;
    };
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        out += text[i];
        if (text[i] != '\n' || in_string(i + 1)) continue;
        std::size_t k = 0;
        while (k < indent && i + 1 < text.size() && (text[i + 1] == ' ' || text[i + 1] == '\t')) {
            ++i;
            ++k;
        }
    }
    return out;
}


bool is_builtin_type(std::string_view t) {
    return t == "Real" || t == "Integer" || t == "Boolean" || t == "String";
}

bool starts_class_definition(const Token& t) {
    static const std::set<std::string_view> kw = {"class",   "model",    "record",   "block",
                                                  "connector", "expandable", "type",  "package",
                                                  "function", "operator", "pure",     "impure",
                                                  "partial",  "encapsulated"};
    return t.kind == TokenKind::Keyword && kw.count(t.text) != 0;
}

struct Modification {
    std::vector<std::pair<std::string, std::string>> args;
    std::optional<std::string> binding;
};

class Parser {
public:
    Parser(std::string_view src, std::string prefix) : src_(src), prefix_(std::move(prefix)) {
        TokenList list = tokenize(src);
        for (auto& t : list.tokens)
            if (t.kind != TokenKind::Comment) toks_.push_back(std::move(t));
        Token eof;
        eof.kind = TokenKind::Punctuation;
        eof.offset = src.size();
        compute_end_position(eof.line, eof.column);
        toks_.push_back(std::move(eof));
    }

    std::vector<Component> parse_stored_definition() {
        std::string within;
        bool has_within = false;
        if (at_kw("within")) {
            advance();
            has_within = true;
            if (!at_punct(";")) within = parse_name();
            expect_semicolon();
        }
        const std::string top_prefix = has_within && !within.empty() ? within : prefix_;
        while (!at_eof()) {
            if (accept_punct(";")) continue;
            if (at_kw("import")) {
                skip_to_semicolon();
                expect_semicolon();
                continue;
            }
            accept_kw("final");
            if (!starts_class_definition(cur()))
                fail_expected("class definition (model, block, function, connector, record, package, type)");
            parse_class_definition(top_prefix, "", cur().offset);
            expect_semicolon();
        }
        return std::move(out_);
    }

    Expr parse_standalone_expression() {
        Expr e = parse_expression();
        if (!at_eof()) fail_expected("end of expression");
        return e;
    }

private:
    // ---- token access -------------------------------------------------------

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t ahead = 1) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    const Token& prev_tok() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
    bool at_eof() const { return pos_ + 1 >= toks_.size(); }
    void advance() {
        if (!at_eof()) ++pos_;
    }
    bool at_kw(std::string_view k) const { return cur().is_keyword(k); }
    bool at_punct(std::string_view p) const { return !at_eof() && cur().is(TokenKind::Punctuation, p); }
    bool at_op(std::string_view o) const { return cur().is(TokenKind::Operator, o); }
    bool at_ident() const { return cur().kind == TokenKind::Identifier; }
    bool accept_kw(std::string_view k) {
        if (!at_kw(k)) return false;
        advance();
        return true;
    }
    bool accept_punct(std::string_view p) {
        if (!at_punct(p)) return false;
        advance();
        return true;
    }
    bool accept_op(std::string_view o) {
        if (!at_op(o)) return false;
        advance();
        return true;
    }

    std::string describe(const Token& t) const {
        if (&t == &toks_.back()) return "end of input";
        return "'" + t.text + "'";
    }

    [[noreturn]] void fail_expected(const std::string& what) const {
        throw SyntaxError(cur().line, cur().column, "expected " + what + " but found " + describe(cur()));
    }
    [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
        throw SyntaxError(t.line, t.column, msg);
    }

    void expect_punct(std::string_view p) {
        if (!accept_punct(p)) fail_expected("'" + std::string(p) + "'");
    }
    void expect_kw(std::string_view k) {
        if (!accept_kw(k)) fail_expected("'" + std::string(k) + "'");
    }
    void expect_op(std::string_view o) {
        if (!accept_op(o)) fail_expected("'" + std::string(o) + "'");
    }
    std::string expect_ident(std::string_view what = "identifier") {
        if (!at_ident()) fail_expected(std::string(what));
        std::string s = cur().text;
        advance();
        return s;
    }

    // Missing ';' is reported just past the previous token, where the author left it out.
    void expect_semicolon() {
        if (accept_punct(";")) return;
        int line = cur().line;
        int col = cur().column;
        if (pos_ > 0) end_position(prev_tok(), line, col);
        throw SyntaxError(line, col,
                          "missing semicolon before " + describe(cur()));
    }

    static void end_position(const Token& t, int& line, int& col) {
        line = t.line;
        col = t.column;
        for (char c : t.text) {
            if (c == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    }

    void compute_end_position(int& line, int& col) const {
        line = 1;
        col = 1;
        for (char c : src_) {
            if (c == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    }

    std::string slice(std::size_t from_tok, std::size_t to_tok_exclusive) const {
        if (to_tok_exclusive <= from_tok) return {};
        const std::size_t b = toks_[from_tok].offset;
        const std::size_t e = toks_[to_tok_exclusive - 1].end_offset();
        return std::string(src_.substr(b, e - b));
    }

    // Skips a balanced group starting at an opening bracket.
    void skip_balanced() {
        int depth = 0;
        do {
            if (at_eof()) fail_expected("closing bracket");
            const Token& t = cur();
            if (t.kind == TokenKind::Punctuation) {
                if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
                if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
            }
            advance();
        } while (depth > 0);
    }

    // Advances to the next ';' at bracket depth 0 without consuming it.
    void skip_to_semicolon() {
        while (!at_eof() && !at_punct(";")) {
            if (at_punct("(") || at_punct("[") || at_punct("{"))
                skip_balanced();
            else
                advance();
        }
    }

    // ---- names and comments ------------------------------------------------

    std::string parse_name() {
        std::string name;
        if (accept_punct(".")) name = ".";
        name += expect_ident("name");
        while (at_punct(".") && peek().kind == TokenKind::Identifier) {
            advance();
            name += "." + cur().text;
            advance();
        }
        return name;
    }

    std::string parse_string_comment() {
        std::string s;
        if (cur().kind != TokenKind::String) return s;
        s = unquote_string(cur().text);
        advance();
        while (at_op("+") && peek().kind == TokenKind::String) {
            advance();
            s += unquote_string(cur().text);
            advance();
        }
        return s;
    }

    // Returns the verbatim text of an `annotation(...)` clause.
    std::string parse_annotation() {
        const std::size_t start = pos_;
        expect_kw("annotation");
        if (!at_punct("(")) fail_expected("'(' after annotation");
        skip_balanced();
        return slice(start, pos_);
    }

    std::string parse_comment() {
        std::string desc = parse_string_comment();
        if (at_kw("annotation")) parse_annotation();
        return desc;
    }

    // ---- modifications -----------------------------------------------------

    Modification parse_modification() {
        Modification m;
        if (at_punct("(")) {
            m.args = parse_class_modification();
            if (accept_op("=")) m.binding = parse_expression_text();
        } else if (accept_op("=") || accept_op(":=")) {
            m.binding = parse_expression_text();
        }
        return m;
    }

    std::vector<std::pair<std::string, std::string>> parse_class_modification() {
        std::vector<std::pair<std::string, std::string>> args;
        expect_punct("(");
        if (accept_punct(")")) return args;
        do {
            if (at_kw("redeclare") || at_kw("replaceable")) {
                // Element redeclarations are kept verbatim only.
                while (!at_eof() && !at_punct(",") && !at_punct(")")) {
                    if (at_punct("(") || at_punct("[") || at_punct("{"))
                        skip_balanced();
                    else
                        advance();
                }
                continue;
            }
            accept_kw("each");
            accept_kw("final");
            std::string name = parse_name();
            const std::size_t value_start = pos_;
            Modification inner = parse_modification();
            std::string value;
            if (inner.args.empty() && inner.binding) {
                value = *inner.binding;
            } else {
                value = slice(value_start, pos_);
            }
            parse_string_comment();
            args.emplace_back(std::move(name), std::move(value));
        } while (accept_punct(","));
        expect_punct(")");
        return args;
    }

    void parse_array_subscripts() {
        expect_punct("[");
        do {
            if (!accept_punct(":")) parse_expression();
        } while (accept_punct(","));
        expect_punct("]");
    }

    // ---- class definitions -------------------------------------------------

    // `element_offset` is where the enclosing element starts, prefixes such as
    // `replaceable` included; it only decides the indentation removed from the source.
    void parse_class_definition(const std::string& prefix, const std::string& enclosing, std::size_t element_offset) {
        const Token& start_tok = cur();
        const std::size_t start_offset = start_tok.offset;
        accept_kw("encapsulated");
        const bool partial = accept_kw("partial");

        ComponentKind kind;
        if (accept_kw("class")) {
            kind = ComponentKind::Class;
        } else if (accept_kw("model")) {
            kind = partial ? ComponentKind::PartialModel : ComponentKind::Model;
        } else if (accept_kw("record")) {
            kind = ComponentKind::Record;
        } else if (accept_kw("block")) {
            kind = ComponentKind::Block;
        } else if (accept_kw("expandable")) {
            expect_kw("connector");
            kind = ComponentKind::Connector;
        } else if (accept_kw("connector")) {
            kind = ComponentKind::Connector;
        } else if (accept_kw("type")) {
            kind = ComponentKind::Type;
        } else if (accept_kw("package")) {
            kind = ComponentKind::Package;
        } else if (at_kw("pure") || at_kw("impure") || at_kw("function")) {
            accept_kw("pure");
            accept_kw("impure");
            accept_kw("operator");
            expect_kw("function");
            kind = ComponentKind::Function;
        } else if (accept_kw("operator")) {
            if (accept_kw("function"))
                kind = ComponentKind::Function;
            else if (accept_kw("record"))
                kind = ComponentKind::Record;
            else
                kind = ComponentKind::Class;
        } else {
            fail_expected("class restriction (model, block, function, connector, record, package, type, class)");
        }

        const std::size_t slot = out_.size();
        out_.emplace_back();
        {
            Component& c = out_[slot];
            c.kind = kind;
            c.is_partial = partial;
            c.line = start_tok.line;
            c.enclosing = enclosing;
        }

        if (at_kw("extends")) {
            // `model extends Base ... end Base;`
            advance();
        }
        std::string name = expect_ident("class name");
        out_[slot].name = name;
        out_[slot].qualified_name = prefix.empty() ? name : prefix + "." + name;
        const std::string qualified = out_[slot].qualified_name;

        const bool short_class = accept_op("=");
        if (short_class) {
            // Short class definition.
            if (accept_kw("enumeration")) {
                if (!at_punct("(")) fail_expected("'(' after enumeration");
                skip_balanced();
            } else {
                if (!accept_kw("input")) accept_kw("output");
                std::string base = parse_name();
                if (at_punct("[")) parse_array_subscripts();
                if (at_punct("(")) parse_class_modification();
                out_[slot].extends_clauses.push_back(base);
            }
            out_[slot].description = parse_comment();
        } else {
            if (at_punct("(")) parse_class_modification();  // modification of a `class extends`
            out_[slot].description = parse_string_comment();
            parse_composition(slot, qualified);
            const Token& end_tok = cur();
            expect_kw("end");
            if (!at_ident()) fail_expected("'" + name + "' after end");
            if (cur().text != name)
                fail_at(cur(), "end name '" + cur().text + "' does not match class name '" + name + "'");
            advance();
            (void)end_tok;
        }

        std::size_t end_offset = prev_tok().end_offset();
        if (at_punct(";")) end_offset = cur().end_offset();
        std::size_t indent = 0;
        while (indent < element_offset &&
               (src_[element_offset - indent - 1] == ' ' || src_[element_offset - indent - 1] == '\t'))
            ++indent;
        if (indent < element_offset && src_[element_offset - indent - 1] != '\n') indent = 0;
        std::string text(src_.substr(start_offset, end_offset - start_offset));
        // A short class followed by a constraining clause ends before its ';'.
        if (!at_punct(";") && start_offset < end_offset && src_[end_offset - 1] != ';' && short_class) text += ';';
        out_[slot].cleaned_source = strip_annotations(dedent(text, indent));
        if (out_[slot].kind == ComponentKind::Function) out_[slot].equations.clear();
    }

    bool at_section_boundary() const {
        if (at_eof()) return true;
        if (at_kw("end") || at_kw("equation") || at_kw("algorithm") || at_kw("public") ||
            at_kw("protected") || at_kw("external") || at_kw("annotation"))
            return true;
        if (at_kw("initial") && (peek().is_keyword("equation") || peek().is_keyword("algorithm"))) return true;
        return false;
    }

    void parse_composition(std::size_t slot, const std::string& qualified) {
        std::set<std::string> declared;
        while (true) {
            if (at_eof()) fail_expected("'end'");
            if (at_kw("end")) return;
            if (accept_kw("public") || accept_kw("protected")) continue;
            if (accept_punct(";")) continue;
            if (at_kw("initial") && peek().is_keyword("equation")) {
                advance();
                advance();
                parse_equation_section(slot, /*initial=*/true);
                continue;
            }
            if (at_kw("initial") && peek().is_keyword("algorithm")) {
                advance();
                advance();
                parse_algorithm_section();
                continue;
            }
            if (accept_kw("equation")) {
                parse_equation_section(slot, /*initial=*/false);
                continue;
            }
            if (accept_kw("algorithm")) {
                parse_algorithm_section();
                continue;
            }
            if (at_kw("external")) {
                skip_to_semicolon();
                expect_semicolon();
                continue;
            }
            if (at_kw("annotation")) {
                std::string text = parse_annotation();
                std::string doc = extract_documentation(text);
                if (!doc.empty() && out_[slot].documentation.empty()) out_[slot].documentation = std::move(doc);
                expect_semicolon();
                continue;
            }
            parse_element(slot, qualified, declared);
            expect_semicolon();
        }
    }

    void parse_element(std::size_t slot, const std::string& qualified, std::set<std::string>& declared) {
        const std::size_t element_start = cur().offset;
        if (at_kw("import")) {
            skip_to_semicolon();
            return;
        }
        bool excluded = false;
        bool replaceable = false;
        while (true) {
            if (accept_kw("redeclare") || accept_kw("inner") || accept_kw("outer")) {
                excluded = true;
            } else if (accept_kw("final")) {
            } else if (accept_kw("replaceable")) {
                replaceable = true;
            } else {
                break;
            }
        }
        if (accept_kw("extends")) {
            std::string base = parse_name();
            if (at_punct("(")) parse_class_modification();
            if (at_kw("annotation")) parse_annotation();
            if (!excluded) out_[slot].extends_clauses.push_back(base);
            return;
        }
        if (starts_class_definition(cur())) {
            parse_class_definition(qualified, qualified, element_start);
            if (replaceable) parse_constraining_clause();
            return;
        }
        parse_component_clause(slot, excluded, declared);
        if (replaceable) parse_constraining_clause();
    }

    void parse_constraining_clause() {
        if (!accept_kw("constrainedby")) return;
        parse_name();
        if (at_punct("(")) parse_class_modification();
        parse_comment();
    }

    void parse_component_clause(std::size_t slot, bool excluded, std::set<std::string>& declared) {
        bool parameter = false;
        bool constant = false;
        bool discrete = false;
        Causality causality = Causality::None;
        while (true) {
            if (accept_kw("flow") || accept_kw("stream")) {
            } else if (accept_kw("discrete")) {
                discrete = true;
            } else if (accept_kw("parameter")) {
                parameter = true;
            } else if (accept_kw("constant")) {
                constant = true;
            } else if (accept_kw("input")) {
                causality = Causality::Input;
            } else if (accept_kw("output")) {
                causality = Causality::Output;
            } else {
                break;
            }
        }
        if (!at_ident() && !at_punct(".")) fail_expected("type name or element");
        const std::string type_name = parse_name();
        if (at_punct("[")) parse_array_subscripts();

        do {
            const Token& decl_tok = cur();
            std::string name = expect_ident("component name");
            if (at_punct("[")) parse_array_subscripts();
            Modification mod = parse_modification();
            bool conditional = false;
            if (accept_kw("if")) {
                parse_expression();
                conditional = true;
            }
            std::string description = parse_comment();
            if (excluded || conditional) continue;

            if (!declared.insert(name).second) fail_at(decl_tok, "duplicate declaration of '" + name + "'");

            auto find_mod = [&](std::string_view key) -> std::optional<std::string> {
                for (const auto& [k, v] : mod.args)
                    if (k == key) return v;
                return std::nullopt;
            };
            Component& c = out_[slot];
            if (parameter || constant) {
                Parameter p{name, type_name, mod.binding, description, find_mod("start")};
                (constant ? c.constants : c.parameters).push_back(std::move(p));
            } else if (is_builtin_type(type_name)) {
                Variable v;
                v.name = name;
                v.type_name = type_name;
                v.start_value = find_mod("start");
                v.description = description;
                v.binding = mod.binding;
                v.causality = causality;
                v.discrete = discrete;
                c.variables.push_back(std::move(v));
            } else {
                Instantiation inst{name, type_name, mod.args, description};
                c.instantiations.push_back(std::move(inst));
            }
        } while (accept_punct(","));
    }

    // ---- equations ---------------------------------------------------------

    void parse_equation_section(std::size_t slot, bool initial) {
        while (!at_section_boundary()) {
            if (accept_punct(";")) continue;
            std::optional<Equation> eq;
            std::optional<Connect> conn;
            parse_equation(eq, conn);
            expect_semicolon();
            if (initial) continue;
            if (conn) out_[slot].connects.push_back(std::move(*conn));
            if (eq) out_[slot].equations.push_back(std::move(*eq));
        }
    }

    void parse_equation_list_until(std::initializer_list<std::string_view> stops) {
        while (true) {
            if (at_eof()) fail_expected("'end'");
            for (auto s : stops)
                if (at_kw(s)) return;
            if (accept_punct(";")) continue;
            std::optional<Equation> eq;
            std::optional<Connect> conn;
            parse_equation(eq, conn);
            expect_semicolon();
        }
    }

    void parse_for_indices() {
        do {
            expect_ident("loop variable");
            if (accept_kw("in")) parse_expression();
        } while (accept_punct(","));
    }

    std::string parse_component_reference_text() {
        const std::size_t start = pos_;
        accept_punct(".");
        expect_ident("component reference");
        if (at_punct("[")) parse_array_subscripts();
        while (at_punct(".") && peek().kind == TokenKind::Identifier) {
            advance();
            advance();
            if (at_punct("[")) parse_array_subscripts();
        }
        return slice(start, pos_);
    }

    void parse_equation(std::optional<Equation>& eq, std::optional<Connect>& conn) {
        const std::size_t start = pos_;
        const int line = cur().line;
        if (accept_kw("connect")) {
            expect_punct("(");
            Connect c;
            c.lhs = parse_component_reference_text();
            expect_punct(",");
            c.rhs = parse_component_reference_text();
            expect_punct(")");
            parse_comment();
            conn = std::move(c);
            return;
        }
        if (accept_kw("if")) {
            parse_expression();
            expect_kw("then");
            while (true) {
                parse_equation_list_until({"elseif", "else", "end"});
                if (accept_kw("elseif")) {
                    parse_expression();
                    expect_kw("then");
                    continue;
                }
                if (accept_kw("else")) {
                    parse_equation_list_until({"end"});
                }
                break;
            }
            expect_kw("end");
            expect_kw("if");
            Equation e;
            e.kind = EquationKind::Simple;
            e.text = slice(start, pos_);
            e.line = line;
            parse_comment();
            eq = std::move(e);
            return;
        }
        if (accept_kw("for")) {
            parse_for_indices();
            expect_kw("loop");
            parse_equation_list_until({"end"});
            expect_kw("end");
            expect_kw("for");
            Equation e;
            e.kind = EquationKind::Simple;
            e.text = slice(start, pos_);
            e.line = line;
            parse_comment();
            eq = std::move(e);
            return;
        }
        if (accept_kw("when")) {
            Equation e;
            e.kind = EquationKind::When;
            e.line = line;
            const std::size_t cond_start = pos_;
            e.condition = parse_expression();
            e.condition_text = slice(cond_start, pos_);
            expect_kw("then");
            bool first_branch = true;
            while (true) {
                while (!at_kw("elsewhen") && !at_kw("end")) {
                    if (at_eof()) fail_expected("'end when'");
                    if (accept_punct(";")) continue;
                    const std::size_t action_start = pos_;
                    std::optional<Equation> inner;
                    std::optional<Connect> inner_conn;
                    parse_equation(inner, inner_conn);
                    const std::string action_text = slice(action_start, pos_);
                    expect_semicolon();
                    if (!first_branch || !inner) continue;
                    WhenAction a;
                    a.text = action_text;
                    if (inner->lhs && !inner->rhs && inner->lhs->is_call("reinit") &&
                        inner->lhs->args.size() == 2 && inner->lhs->args[0].is_reference()) {
                        a.kind = WhenAction::Kind::Reinit;
                        a.target = inner->lhs->args[0].text;
                        a.value = inner->lhs->args[1];
                    } else if (inner->lhs && inner->rhs && inner->lhs->is_reference()) {
                        a.kind = WhenAction::Kind::Assign;
                        a.target = inner->lhs->text;
                        a.value = *inner->rhs;
                    } else {
                        a.kind = WhenAction::Kind::Call;
                        if (inner->lhs) a.value = *inner->lhs;
                    }
                    e.actions.push_back(std::move(a));
                }
                if (accept_kw("elsewhen")) {
                    e.has_elsewhen = true;
                    first_branch = false;
                    parse_expression();
                    expect_kw("then");
                    continue;
                }
                break;
            }
            expect_kw("end");
            expect_kw("when");
            e.text = slice(start, pos_);
            parse_comment();
            eq = std::move(e);
            return;
        }

        Equation e;
        e.line = line;
        Expr lhs = parse_simple_expression();
        if (accept_op("=")) {
            const std::size_t rhs_start = pos_;
            Expr rhs = parse_expression();
            e.rhs_text = slice(rhs_start, pos_);
            if (lhs.is_call("der") && lhs.args.size() == 1 && lhs.arg_names[0].empty() &&
                lhs.args[0].is_reference() && lhs.args[0].text.find_first_of(".[") == std::string::npos) {
                e.kind = EquationKind::Derivative;
                e.state = lhs.args[0].text;
            }
            e.lhs = std::move(lhs);
            e.rhs = std::move(rhs);
        } else {
            if (lhs.kind != ExprKind::Call) {
                if (at_op(":="))
                    fail_at(cur(), "':=' is not allowed in an equation section; use '='");
                fail_expected("'=' in equation");
            }
            e.lhs = std::move(lhs);
        }
        e.text = slice(start, pos_);
        parse_comment();
        eq = std::move(e);
    }

    // ---- algorithms --------------------------------------------------------

    void parse_algorithm_section() {
        while (!at_section_boundary()) {
            if (accept_punct(";")) continue;
            parse_statement();
            expect_semicolon();
        }
    }

    void parse_statement_list_until(std::initializer_list<std::string_view> stops) {
        while (true) {
            if (at_eof()) fail_expected("'end'");
            for (auto s : stops)
                if (at_kw(s)) return;
            if (accept_punct(";")) continue;
            parse_statement();
            expect_semicolon();
        }
    }

    void parse_statement() {
        if (accept_kw("break") || accept_kw("return")) {
            parse_comment();
            return;
        }
        if (accept_kw("if")) {
            parse_expression();
            expect_kw("then");
            while (true) {
                parse_statement_list_until({"elseif", "else", "end"});
                if (accept_kw("elseif")) {
                    parse_expression();
                    expect_kw("then");
                    continue;
                }
                if (accept_kw("else")) parse_statement_list_until({"end"});
                break;
            }
            expect_kw("end");
            expect_kw("if");
        } else if (accept_kw("for")) {
            parse_for_indices();
            expect_kw("loop");
            parse_statement_list_until({"end"});
            expect_kw("end");
            expect_kw("for");
        } else if (accept_kw("while")) {
            parse_expression();
            expect_kw("loop");
            parse_statement_list_until({"end"});
            expect_kw("end");
            expect_kw("while");
        } else if (accept_kw("when")) {
            parse_expression();
            expect_kw("then");
            while (true) {
                parse_statement_list_until({"elsewhen", "end"});
                if (accept_kw("elsewhen")) {
                    parse_expression();
                    expect_kw("then");
                    continue;
                }
                break;
            }
            expect_kw("end");
            expect_kw("when");
        } else if (at_punct("(")) {
            parse_primary();  // output expression list
            expect_op(":=");
            parse_component_reference_text();
            parse_function_call_args();
        } else {
            if (!at_ident() && !at_punct(".") && !at_kw("der") && !at_kw("initial"))
                fail_expected("statement");
            if (at_kw("der") || at_kw("initial")) advance();
            else parse_component_reference_text();
            if (at_punct("(")) {
                parse_function_call_args();
            } else if (!accept_op(":=")) {
                if (at_op("=")) fail_at(cur(), "'=' is not allowed in an algorithm section; use ':='");
                fail_expected("':='");
            } else {
                parse_expression();
            }
        }
        parse_comment();
    }

    // ---- expressions -------------------------------------------------------

    std::string parse_expression_text() {
        const std::size_t start = pos_;
        parse_expression();
        return slice(start, pos_);
    }

    Expr parse_expression() {
        if (accept_kw("if")) {
            Expr e;
            e.kind = ExprKind::If;
            e.args.push_back(parse_expression());
            expect_kw("then");
            e.args.push_back(parse_expression());
            while (accept_kw("elseif")) {
                e.args.push_back(parse_expression());
                expect_kw("then");
                e.args.push_back(parse_expression());
            }
            expect_kw("else");
            e.args.push_back(parse_expression());
            return e;
        }
        return parse_simple_expression();
    }

    Expr parse_simple_expression() {
        Expr first = parse_logical_expression();
        if (!at_punct(":")) return first;
        Expr r;
        r.kind = ExprKind::Range;
        r.args.push_back(std::move(first));
        advance();
        r.args.push_back(parse_logical_expression());
        if (accept_punct(":")) r.args.push_back(parse_logical_expression());
        return r;
    }

    static Expr binary(std::string op, Expr a, Expr b) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.text = std::move(op);
        e.args.push_back(std::move(a));
        e.args.push_back(std::move(b));
        return e;
    }

    Expr parse_logical_expression() {
        Expr e = parse_logical_term();
        while (accept_kw("or")) e = binary("or", std::move(e), parse_logical_term());
        return e;
    }

    Expr parse_logical_term() {
        Expr e = parse_logical_factor();
        while (accept_kw("and")) e = binary("and", std::move(e), parse_logical_factor());
        return e;
    }

    Expr parse_logical_factor() {
        if (accept_kw("not")) {
            Expr e;
            e.kind = ExprKind::Unary;
            e.text = "not";
            e.args.push_back(parse_relation());
            return e;
        }
        return parse_relation();
    }

    Expr parse_relation() {
        Expr e = parse_arithmetic();
        static const std::set<std::string_view> rel = {"<", "<=", ">", ">=", "==", "<>"};
        if (cur().kind == TokenKind::Operator && rel.count(cur().text)) {
            std::string op = cur().text;
            advance();
            e = binary(op, std::move(e), parse_arithmetic());
        }
        return e;
    }

    bool at_add_op() const {
        return cur().kind == TokenKind::Operator &&
               (cur().text == "+" || cur().text == "-" || cur().text == ".+" || cur().text == ".-");
    }

    Expr parse_arithmetic() {
        Expr e;
        if (at_add_op()) {
            std::string op = cur().text;
            advance();
            Expr u;
            u.kind = ExprKind::Unary;
            u.text = op.back() == '-' ? "-" : "+";
            u.args.push_back(parse_term());
            e = std::move(u);
        } else {
            e = parse_term();
        }
        while (at_add_op()) {
            std::string op = cur().text;
            advance();
            e = binary(op, std::move(e), parse_term());
        }
        return e;
    }

    Expr parse_term() {
        Expr e = parse_factor();
        while (cur().kind == TokenKind::Operator &&
               (cur().text == "*" || cur().text == "/" || cur().text == ".*" || cur().text == "./")) {
            std::string op = cur().text;
            advance();
            e = binary(op, std::move(e), parse_factor());
        }
        return e;
    }

    Expr parse_factor() {
        Expr e = parse_primary();
        if (at_op("^") || at_op(".^")) {
            std::string op = cur().text;
            advance();
            e = binary(op, std::move(e), parse_primary());
        }
        return e;
    }

    Expr parse_function_call_args() {
        Expr call;
        call.kind = ExprKind::Call;
        expect_punct("(");
        if (accept_punct(")")) return call;
        do {
            if (at_ident() && peek().is(TokenKind::Operator, "=")) {
                std::string name = cur().text;
                advance();
                advance();
                call.args.push_back(parse_expression());
                call.arg_names.push_back(std::move(name));
                continue;
            }
            if (accept_kw("function")) {
                // Function partial application: kept as a reference.
                Expr f;
                f.kind = ExprKind::Reference;
                f.text = parse_name();
                if (at_punct("(")) skip_balanced();
                call.args.push_back(std::move(f));
                call.arg_names.emplace_back();
                continue;
            }
            call.args.push_back(parse_expression());
            call.arg_names.emplace_back();
            if (accept_kw("for")) {
                parse_for_indices();
                break;
            }
        } while (accept_punct(","));
        expect_punct(")");
        return call;
    }

    Expr parse_primary() {
        const Token& t = cur();
        if (t.kind == TokenKind::Number) {
            Expr e;
            e.kind = ExprKind::Number;
            e.text = t.text;
            e.number = std::strtod(t.text.c_str(), nullptr);
            advance();
            return e;
        }
        if (t.kind == TokenKind::String) {
            Expr e;
            e.kind = ExprKind::String;
            e.text = unquote_string(t.text);
            advance();
            while (at_op("+") && peek().kind == TokenKind::String) {
                // String concatenation is left to the generic binary path.
                break;
            }
            return e;
        }
        if (t.is_keyword("true") || t.is_keyword("false")) {
            Expr e;
            e.kind = ExprKind::Boolean;
            e.text = t.text;
            e.number = t.text == "true" ? 1.0 : 0.0;
            advance();
            return e;
        }
        if (t.is_keyword("end")) {
            Expr e;
            e.kind = ExprKind::End;
            advance();
            return e;
        }
        if (t.is(TokenKind::Punctuation, "(")) {
            advance();
            std::vector<Expr> items;
            bool tuple = false;
            while (true) {
                if (at_punct(",") || at_punct(")")) {
                    Expr empty;
                    items.push_back(empty);
                } else {
                    items.push_back(parse_expression());
                }
                if (accept_punct(",")) {
                    tuple = true;
                    continue;
                }
                break;
            }
            expect_punct(")");
            if (!tuple && items.size() == 1 && items[0].kind != ExprKind::Empty) return std::move(items[0]);
            Expr e;
            e.kind = ExprKind::Tuple;
            e.args = std::move(items);
            return e;
        }
        if (t.is(TokenKind::Punctuation, "[")) {
            advance();
            Expr e;
            e.kind = ExprKind::Matrix;
            do {
                do {
                    e.args.push_back(parse_expression());
                } while (accept_punct(","));
            } while (accept_punct(";"));
            expect_punct("]");
            return e;
        }
        if (t.is(TokenKind::Punctuation, "{")) {
            advance();
            Expr e;
            e.kind = ExprKind::Array;
            if (!at_punct("}")) {
                e.args.push_back(parse_expression());
                if (accept_kw("for")) {
                    parse_for_indices();
                } else {
                    while (accept_punct(",")) e.args.push_back(parse_expression());
                }
            }
            expect_punct("}");
            return e;
        }
        if (t.is_keyword("der") || t.is_keyword("initial") || t.is_keyword("pure")) {
            std::string name = t.text;
            advance();
            Expr call = parse_function_call_args();
            call.text = std::move(name);
            return call;
        }
        if (t.kind == TokenKind::Identifier || t.is(TokenKind::Punctuation, ".")) {
            const std::size_t start = pos_;
            std::string plain;  // the dotted name without subscripts
            if (accept_punct(".")) plain = ".";
            plain += expect_ident();
            if (at_punct("[")) parse_array_subscripts();
            while (at_punct(".") && peek().kind == TokenKind::Identifier) {
                advance();
                plain += "." + cur().text;
                advance();
                if (at_punct("[")) parse_array_subscripts();
            }
            if (at_punct("(")) {
                Expr call = parse_function_call_args();
                call.text = std::move(plain);
                return call;
            }
            Expr e;
            e.kind = ExprKind::Reference;
            e.text = slice(start, pos_);
            return e;
        }
        fail_expected("expression");
    }

    std::string_view src_;
    std::string prefix_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<Component> out_;
};

void collect_names(const Expr& e, std::vector<std::string>& out) {
    if (e.kind == ExprKind::Reference) {
        std::string name;
        int depth = 0;
        for (char c : e.text) {
            if (c == '[') ++depth;
            if (depth == 0 && c != ' ' && c != '\t' && c != '\n' && c != '\r') name += c;
            if (c == ']') --depth;
        }
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
        return;
    }
    for (const auto& a : e.args) collect_names(a, out);
}

}  // namespace

std::vector<Component> parse_unit(std::string_view source, std::string_view root_prefix) {
    Parser p(source, std::string(root_prefix));
    return p.parse_stored_definition();
}

Expr parse_expression(std::string_view text) {
    Parser p(text, {});
    return p.parse_standalone_expression();
}

std::string first_class_name(std::string_view code) {
    TokenList list;
    try {
        list = tokenize(code);
    } catch (const Error&) {
        return {};
    }
    static const std::set<std::string_view> restriction = {"class", "model", "record", "block",
                                                           "connector", "type", "package", "function"};
    for (std::size_t i = 0; i < list.tokens.size(); ++i) {
        const Token& t = list.tokens[i];
        if (t.kind != TokenKind::Keyword || !restriction.count(t.text)) continue;
        for (std::size_t j = i + 1; j < list.tokens.size(); ++j) {
            const Token& n = list.tokens[j];
            if (n.kind == TokenKind::Comment) continue;
            if (n.is_keyword("extends")) continue;
            if (n.kind == TokenKind::Identifier) return n.text;
            break;
        }
    }
    return {};
}

std::vector<std::string> referenced_names(const Expr& e) {
    std::vector<std::string> out;
    collect_names(e, out);
    return out;
}

}  // namespace modigen
