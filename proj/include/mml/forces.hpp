#pragma once

#include "mml/diagnostics.hpp"
#include "mml/geometry.hpp"
#include "mml/model.hpp"
#include "mml/neighbor.hpp"
#include "mml/state.hpp"

#include <cstdint>
#include <vector>

namespace mml {

class FieldEngine;

/// DPD weight w(r) = 1 - r/rc inside the cutoff, 0 outside.
double dpd_weight(double r, double rc);

/// Force on i from j for separation rij = r_i - r_j.
Vec3 conservative_force(const Vec3& rij, double a, double rc);
Vec3 dissipative_force(const Vec3& rij, const Vec3& vij, double gamma, double rc);
Vec3 random_force(const Vec3& rij, double sigma, double rc, double xi, double dt);

/// Closed surface of a region instance whose vertices are particles.
struct SurfaceBag {
    int region = 0;
    std::vector<Handle> vertices;
    std::vector<Face> faces;
    double rest_volume = 0.0;
    double stiffness = 0.0; // volume penalty k_v; 0 disables it
};

/// Which contributions of the net force to include.
struct ForceTerms {
    bool conservative = true;
    bool dissipative = true;
    bool random = true;
    bool links = true;
    bool external = true;
    bool volume = true;
};

/// Net force per particle: links, DPD pair forces, non-bonded link rules, external and volume terms.
class ForceEngine {
public:
    ForceEngine(const CompiledModel& model, DiagnosticLog* log = nullptr);

    /// Largest pair cutoff among DPD parameters and non-bonded link rules.
    double max_cutoff() const { return max_cutoff_; }
    void set_surfaces(std::vector<SurfaceBag> bags) { bags_ = std::move(bags); }
    const std::vector<SurfaceBag>& surfaces() const { return bags_; }
    ForceTerms terms;

    /// Fills `forces` (one entry per particle). `noise_key` selects the random-force draw.
    void compute(const SimState& state, const NeighborIndex& index, const FieldEngine* fields, double dt,
                 std::uint64_t noise_key, std::vector<Vec3>& forces) const;

    /// Scalar of link `k` (positive attracts) and the unit vector from a toward b.
    double link_scalar(const SimState& state, std::size_t k, const FieldEngine* fields, Vec3& direction,
                       double& distance) const;

private:
    void add_links(const SimState& state, const FieldEngine* fields, std::vector<Vec3>& forces) const;
    void add_pairs(const SimState& state, const NeighborIndex& index, double dt, std::uint64_t noise_key,
                   std::vector<Vec3>& forces) const;
    void add_nonbonded(const SimState& state, const NeighborIndex& index, const FieldEngine* fields,
                       std::vector<Vec3>& forces) const;
    void add_volume(const SimState& state, std::vector<Vec3>& forces) const;

    const CompiledModel* model_;
    DiagnosticLog* log_;
    double max_cutoff_ = 0.0;
    std::vector<SurfaceBag> bags_;
};

} // namespace mml
