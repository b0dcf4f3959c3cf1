#pragma once

#include "mml/continuous.hpp"
#include "mml/diagnostics.hpp"
#include "mml/discrete.hpp"
#include "mml/fields.hpp"
#include "mml/forces.hpp"
#include "mml/model.hpp"
#include "mml/neighbor.hpp"
#include "mml/state.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>

namespace mml {

/// Places the initial particles of a compiled model: surfaces, single particles, fills, explicit links.
/// Returns the surface bags used for region volumes.
std::vector<SurfaceBag> instantiate(const CompiledModel& model, SimState& state, DiagnosticLog* log = nullptr);

/// Rebuilds the surface bags of an instantiated or restored state from its surface groups.
std::vector<SurfaceBag> surface_bags(const CompiledModel& model, const SimState& state);

/// A compiled model bound to its runtime state and engines. Each step runs phase A (links and
/// discrete processes), phase B (continuous state, RK4) and phase C (particles, velocity-Verlet).
class Simulation {
public:
    Simulation(const CompiledModel& model, std::uint64_t seed, DiagnosticLog* log = nullptr);
    /// Continues from a checkpoint written by save_checkpoint.
    Simulation(const CompiledModel& model, std::istream& checkpoint, DiagnosticLog* log = nullptr);

    void step(double dt);

    const CompiledModel& model() const { return *model_; }
    SimState& state() { return state_; }
    const SimState& state() const { return state_; }
    FieldEngine& fields() { return fields_; }
    ForceEngine& forces() { return forces_; }
    ContinuousEngine& continuous() { return continuous_; }
    DiscreteEngine& discrete() { return discrete_; }
    NeighborIndex& index() { return index_; }

    /// State plus the run-start choices needed to continue bit-exactly.
    void save_checkpoint(std::ostream& out) const;

private:
    void setup();
    void update_region_volumes();
    FieldEngine* field_ptr() { return fields_.size() > 0 ? &fields_ : nullptr; }

    const CompiledModel* model_;
    DiagnosticLog* log_;
    SimState state_;
    FieldEngine fields_;
    ForceEngine forces_;
    ContinuousEngine continuous_;
    DiscreteEngine discrete_;
    ParticleIntegrator integrator_;
    NeighborIndex index_;
};

} // namespace mml
