// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace modigen {

/// Removes every `annotation(...)` clause, collapses runs of blank lines to a single
/// blank line and trims trailing whitespace on each line. An annotation that is the
/// only element on its line is removed together with its terminating ';' and the line.
///
/// Documentation text is not preserved here; parse_unit extracts it beforehand.
/// Throws UnbalancedAnnotation when an annotation has no matching ')'.
std::string strip_annotations(std::string_view source);

/// Extracts the `info` string of a Documentation annotation found in `annotation_text`
/// (the tokens of a single `annotation(...)` clause). Empty when absent.
std::string extract_documentation(std::string_view annotation_text);

/// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Decodes a Modelica string literal including its quotes ("a\"b" -> a"b).
std::string unquote_string(std::string_view literal);

}  // namespace modigen
