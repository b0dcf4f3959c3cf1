#pragma once

#include "mml/model.hpp"

#include <string>

namespace mml {

/// Canonical text dump of a compiled model. Implicit flags are omitted so a model and its
/// amended source describe identically.
std::string describe(const CompiledModel& model);

/// Human-readable summary printed by `mml check`.
std::string check_report(const CompiledModel& model);

/// Renders a stoichiometry matrix with species rows and process columns.
std::string format_matrix(const ReactionNetwork& network);

} // namespace mml
