#pragma once

#include "mml/continuous.hpp"
#include "mml/diagnostics.hpp"
#include "mml/model.hpp"
#include "mml/neighbor.hpp"
#include "mml/state.hpp"

#include <cstdint>
#include <functional>
#include <set>
#include <vector>

namespace mml {

class FieldEngine;

struct Crossing {
    double t = 0.0;
    bool rising = true; // g goes from <= 0 to > 0
};

/// Sign changes of g on [t0, t1]: `samples` uniform brackets, each refined by bisection to `tol`.
std::vector<Crossing> detect_crossings(const std::function<double(double)>& g, double t0, double t1, double tol,
                                       int samples = 8);

/// Per-rule counters for one run.
struct FiringStats {
    std::uint64_t matched = 0;
    std::uint64_t fired = 0;
};

/// Phase A: link attach/detach, then discrete processes in declaration order.
class DiscreteEngine {
public:
    DiscreteEngine(const CompiledModel& model, DiagnosticLog* log = nullptr);

    /// Detaches links whose while-predicate fails, then attaches dynamic links whose when-predicate holds.
    void update_links(SimState& state, const FieldEngine* fields);
    /// Matches and fires every discrete rule once. Consumes armed triggers.
    void fire_all(SimState& state, FieldEngine* fields);
    void step(SimState& state, FieldEngine* fields)
    {
        update_links(state, fields);
        fire_all(state, fields);
    }

    /// Candidate tuples of rule `r` (handles, ascending lexicographic), before probabilities.
    std::vector<std::vector<Handle>> match(const SimState& state, std::size_t r, const FieldEngine* fields);

    /// Scans the last continuous step for rising crossings of single-particle state predicates and
    /// arms them in state.triggers. Returns the located crossing times (absolute).
    std::vector<double> arm_triggers(SimState& state, ContinuousEngine& continuous, FieldEngine* fields);

    const std::vector<FiringStats>& stats() const { return stats_; }
    /// Largest number of firings any single particle took part in during one step so far.
    std::uint32_t max_participation() const { return max_participation_; }
    bool disabled(std::size_t r) const { return disabled_[r]; }
    void set_disabled(std::size_t r, bool v) { disabled_[r] = v; }

private:
    bool accept(const SimState& state, const DiscreteRule& rule, const std::vector<std::size_t>& idx,
                const FieldEngine* fields) const;
    void fire(SimState& state, std::size_t r, const std::vector<Handle>& tuple, FieldEngine* fields,
              std::uint64_t tuple_key);
    void refresh_index(const SimState& state);

    const CompiledModel* model_;
    DiagnosticLog* log_;
    NeighborIndex index_;
    bool has_index_ = false;
    std::vector<FiringStats> stats_;
    std::vector<bool> disabled_;
    std::set<std::size_t> clamp_warned_;
    std::uint32_t max_participation_ = 0;
};

} // namespace mml
