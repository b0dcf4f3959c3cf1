#pragma once

#include "mml/diagnostics.hpp"
#include "mml/forces.hpp"
#include "mml/model.hpp"
#include "mml/neighbor.hpp"
#include "mml/state.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace mml {

class FieldEngine;

/// The continuous subsystem: region values C plus every conc/amount particle column, integrated
/// with fixed-step RK4 while positions and velocities stay frozen.
class ContinuousEngine {
public:
    ContinuousEngine(const CompiledModel& model, DiagnosticLog* log = nullptr);

    /// True when the model has no network column and no flux rule.
    bool idle() const;

    /// Flattened state vector: C, then each continuous column of each particle type.
    std::vector<double> gather(const SimState& state) const;
    void scatter(const std::vector<double>& y, SimState& state) const;
    /// Offset of particle i's attribute a inside the flattened vector, or -1 if not continuous.
    long offset_of(const SimState& state, std::size_t i, int a) const;

    /// Caches flux pairs for the current positions. step() calls it; direct eval_rhs users must too.
    void prepare(const SimState& state);
    /// dy/dt at the values currently stored in `state`. Rebinds fields first when there are any.
    std::vector<double> eval_rhs(const SimState& state, FieldEngine* fields) const;

    /// One RK4 step. Restores the state and throws if any output is non-finite.
    void step(SimState& state, FieldEngine* fields, double dt);

    /// Values at the start and end of the last step with end-point slopes for Hermite interpolation.
    struct StepRecord {
        double dt = 0.0;
        std::vector<double> y0, f0, y1, f1;
        std::vector<double> at(double theta) const;
    };
    /// Fills rec.f1 lazily; crossing detection is the only consumer.
    const StepRecord& record(SimState& state, FieldEngine* fields);

    /// Number of rate evaluations since construction.
    std::uint64_t evaluations() const { return evaluations_; }

private:
    struct Column {
        int type;
        int attr;
    };
    struct FluxPair {
        std::uint32_t a, b;
    };
    std::vector<std::size_t> bases(const SimState& state) const;
    void check_negative(const SimState& state, const std::vector<double>& y);

    const CompiledModel* model_;
    DiagnosticLog* log_;
    std::vector<Column> columns_;
    std::vector<std::vector<int>> column_of_; // [type][attr] -> column or -1
    NeighborIndex flux_index_;
    std::vector<std::vector<FluxPair>> flux_pairs_; // [flux rule]
    StepRecord last_;
    bool have_f1_ = false;
    mutable std::uint64_t evaluations_ = 0;
    std::set<std::string> warned_;
};

/// Velocity-Verlet with two force evaluations per step and reflecting domain walls.
class ParticleIntegrator {
public:
    ParticleIntegrator(const CompiledModel& model, ForceEngine& forces, DiagnosticLog* log = nullptr);

    void step(SimState& state, NeighborIndex& index, FieldEngine* fields, double dt);
    const std::vector<Vec3>& last_forces() const { return forces_; }

private:
    void reflect(SimState& state) const;

    const CompiledModel* model_;
    ForceEngine* engine_;
    DiagnosticLog* log_;
    std::vector<Vec3> forces_;
};

} // namespace mml
