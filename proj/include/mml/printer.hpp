#pragma once

#include "mml/ast.hpp"

#include <string>

namespace mml {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

std::string to_source(const ast::Expr& expr);
std::string to_source(const ast::SyntaxTree& tree);

} // namespace mml
