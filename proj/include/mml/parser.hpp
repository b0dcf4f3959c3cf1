#pragma once

#include "mml/ast.hpp"
#include "mml/lexer.hpp"

#include <span>
#include <string>
#include <string_view>

namespace mml {

/// Recursive-descent parser over a token sequence. Throws SyntaxError on the first error; no
/// partial tree is returned.
ast::SyntaxTree parse(std::span<const Token> tokens);

/// tokenize + parse.
ast::SyntaxTree parse_source(std::string_view source, const std::string& file_name = "<input>");

/// Parses a single expression (used by tests and the CLI `--set` handling).
ast::Expr parse_expression(std::string_view source);

} // namespace mml
