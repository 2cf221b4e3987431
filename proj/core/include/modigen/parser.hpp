// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/ast.hpp"

namespace modigen {

/// Parses one Modelica source unit into a flat list of class definitions.
///
/// Nested classes follow their parent in the list with dot-joined qualified names.
/// A `within` clause supplies the qualified-name prefix; without one, `root_prefix`
/// is used. Conditional components, `redeclare`, and `inner`/`outer` elements are
/// accepted and kept in cleaned_source but left out of the structured fields.
///
/// Throws SyntaxError (and the lexer errors) with a 1-based position.
std::vector<Component> parse_unit(std::string_view source, std::string_view root_prefix = {});

/// Parses a single Modelica expression. Throws SyntaxError on trailing input.
Expr parse_expression(std::string_view text);

/// Name of the first class defined in `code`, found by a token scan that tolerates
/// syntax errors later in the text. Empty when no class header is found or lexing fails.
std::string first_class_name(std::string_view code);

/// Returns the referenced names (dotted paths, subscripts dropped) in `e`, in first-seen order.
/// Function names of calls are not included.
std::vector<std::string> referenced_names(const Expr& e);

}  // namespace modigen
