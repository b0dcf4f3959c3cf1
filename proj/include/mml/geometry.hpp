#pragma once

#include "mml/vec3.hpp"

#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

namespace mml {

using Face = std::array<int, 3>;

/// Closed triangle mesh with outward winding.
struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    /// Unique undirected edges (i < j), sorted.
    std::vector<std::pair<int, int>> edges() const;
    /// V - E + F.
    int euler_characteristic() const;
    /// Every edge is shared by exactly two faces with opposite orientation.
    bool closed() const;
};

/// Icosahedron subdivided `resolution` times and projected onto the sphere.
SurfaceMesh make_icosphere(double radius, int resolution, const Vec3& center = {});

/// Signed divergence-theorem volume. Throws on open or degenerate meshes.
double mesh_volume(const std::vector<Vec3>& vertices, const std::vector<Face>& faces);
double mesh_volume(const SurfaceMesh& mesh);

/// dV/dr for every vertex.
std::vector<Vec3> volume_gradient(const std::vector<Vec3>& vertices, const std::vector<Face>& faces);

/// Spherical obstacle excluded from a fill.
struct Obstacle {
    Vec3 center;
    double radius = 0.0;
};

/// Simple-cubic lattice at spacing 2r centered on `center`, keeping sites at least r inside the
/// sphere and at least r clear of every obstacle.
std::vector<Vec3> fill_sphere(const Vec3& center, double radius, double particle_radius,
                              const std::vector<Obstacle>& obstacles = {});

/// Same lattice anchored at lower + r, clipped to the box shrunk by r.
std::vector<Vec3> fill_box(const Vec3& lower, const Vec3& upper, double particle_radius,
                           const std::vector<Obstacle>& obstacles = {});

/// Wavefront OBJ text (v and f records, 1-based indices).
void write_obj(std::ostream& out, const SurfaceMesh& mesh);

} // namespace mml
