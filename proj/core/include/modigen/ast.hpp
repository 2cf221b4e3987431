// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modigen {

enum class ExprKind {
    Number,
    String,
    Boolean,
    Reference,  // text holds the dotted path, subscripts included verbatim
    Call,       // text holds the function name; args/arg_names the arguments
    Unary,      // text holds the operator ("-", "+", "not")
    Binary,     // text holds the operator
    If,         // args: cond1, value1, cond2, value2, ..., else-value
    Array,      // {a, b, c}
    Matrix,     // [a, b; c, d] -- rows flattened, not interpreted
    Range,      // a:b or a:b:c
    Tuple,      // (a, b) output list
    End,        // `end` inside subscripts
    Empty,      // omitted slot in an output list
};

struct Expr {
    ExprKind kind = ExprKind::Empty;
    std::string text;
    double number = 0.0;
    std::vector<Expr> args;
    std::vector<std::string> arg_names;  // parallel to args for calls; "" for positional

    bool is_reference() const { return kind == ExprKind::Reference; }
    bool is_call(std::string_view name) const { return kind == ExprKind::Call && text == name; }
};

enum class ComponentKind { Model, PartialModel, Function, Block, Connector, Class, Record, Package, Type };

std::string_view to_string(ComponentKind kind);
std::optional<ComponentKind> component_kind_from_string(std::string_view s);

struct Parameter {
    std::string name;
    std::string type_name;
    std::optional<std::string> default_value;
    std::string description;
    std::optional<std::string> start_value;

    bool operator==(const Parameter&) const = default;
};

enum class Causality { None, Input, Output };

struct Variable {
    std::string name;
    std::string type_name;
    std::optional<std::string> start_value;
    std::string description;
    std::optional<std::string> binding;  // declaration equation `Real y = expr`
    Causality causality = Causality::None;
    bool discrete = false;

    bool operator==(const Variable&) const = default;
};

struct Instantiation {
    std::string instance_name;
    std::string type_path;
    std::vector<std::pair<std::string, std::string>> modifiers;
    std::string description;

    bool operator==(const Instantiation&) const = default;
};

struct Connect {
    std::string lhs;
    std::string rhs;

    bool operator==(const Connect&) const = default;
};

enum class EquationKind { Simple, Derivative, When };

struct WhenAction {
    enum class Kind { Reinit, Assign, Call };
    Kind kind = Kind::Call;
    std::string target;  // reinit/assignment target
    std::string text;    // verbatim action text
    Expr value;          // reinit expression, assignment rhs, or the call itself
};

struct Equation {
    EquationKind kind = EquationKind::Simple;
    std::string text;  // verbatim equation text, without the terminating ';'
    int line = 0;

    // Simple equations in `lhs = rhs` form. Absent for if/for equations and bare calls.
    std::optional<Expr> lhs;
    std::optional<Expr> rhs;
    std::string rhs_text;

    // Derivative: der(state) = rhs
    std::string state;

    // When
    std::string condition_text;
    std::optional<Expr> condition;
    std::vector<WhenAction> actions;
    bool has_elsewhen = false;
};

struct Component {
    ComponentKind kind = ComponentKind::Model;
    bool is_partial = false;
    std::string name;
    std::string qualified_name;
    std::string enclosing;  // qualified name of the enclosing class, empty at top level
    std::string description;
    std::string documentation;
    std::vector<Parameter> parameters;
    std::vector<Parameter> constants;
    std::vector<Variable> variables;
    std::vector<std::string> extends_clauses;
    std::vector<Instantiation> instantiations;
    std::vector<Connect> connects;
    std::vector<Equation> equations;
    std::string cleaned_source;
    int line = 0;

    /// Field-wise equality over the structured fields (ignores source text and positions).
    bool same_structure(const Component& other) const;
};

}  // namespace modigen
