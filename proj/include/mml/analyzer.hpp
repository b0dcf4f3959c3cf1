#pragma once

#include "mml/ast.hpp"
#include "mml/model.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mml {

struct AnalyzerOptions {
    /// Model-level parameter bindings (`--set name=value`). A name must be declared at model
    /// level or referenced by the model, otherwise analysis fails.
    std::map<std::string, double> overrides;
};

/// Resolves names, classifies processes and compiles the continuous subsystem.
/// Throws CompileError on the first semantic error.
CompiledModel analyze(const ast::SyntaxTree& tree, const AnalyzerOptions& options = {});

/// One transformation column: (species index, coefficient) pairs.
struct Transformation {
    std::vector<std::pair<int, int>> inputs;
    std::vector<std::pair<int, int>> outputs;
};

/// N[i][j] = (coefficient of species i in outputs of j) - (coefficient in inputs of j).
std::vector<std::vector<int>> build_stoichiometry(const std::vector<Transformation>& procs, int species_count);

/// Source tree with every implicit declaration written out explicitly.
ast::SyntaxTree amend_with_implicit(const ast::SyntaxTree& tree, const CompiledModel& model);

/// Walks the spatial scope ladder for `symbol` as seen from particles of `group`:
/// local attribute, then each enclosing region's scalar and field, innermost first.
ScopeResolution resolve_spatial(const CompiledModel& model, int group, const std::string& symbol);

} // namespace mml
