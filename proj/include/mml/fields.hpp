#pragma once

#include "mml/model.hpp"
#include "mml/state.hpp"
#include "mml/vec3.hpp"

#include <cstddef>
#include <vector>

namespace mml {

/// Cubic B-spline weight with support 2h (unnormalized; Shepard normalization divides it out).
double cubic_spline(double r, double h);

/// Kernel-sum fields A(r) = sum_i f(A_i, r, r_i) over the source particles of each field.
class FieldEngine {
public:
    explicit FieldEngine(const CompiledModel& model);

    /// Fixes automatic smoothing lengths from the source spacing in `state`. Called once per run.
    void calibrate(const SimState& state);
    /// Rebuilds source lists from the current particle set. Must precede eval after any change.
    void bind(const SimState& state);

    double eval(std::size_t field, const Vec3& point) const;
    double smoothing(std::size_t field) const { return h_[field]; }
    void set_smoothing(std::size_t field, double h) { h_[field] = h; }
    std::size_t size() const { return defs_->size(); }

private:
    struct Sources {
        std::vector<Vec3> pos;
        std::vector<double> value;
        // Uniform grid for compact kernels.
        double cell = 0.0;
        Vec3 lower;
        int nx = 0, ny = 0, nz = 0;
        std::vector<std::size_t> start;
        std::vector<std::size_t> order;
    };
    double support(std::size_t field) const;
    template <class F>
    void for_sources(std::size_t field, const Vec3& point, double radius, F&& f) const;

    const std::vector<FieldDef>* defs_;
    std::vector<double> h_;
    std::vector<Sources> sources_;
};

} // namespace mml
