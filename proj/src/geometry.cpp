#include "mml/geometry.hpp"

#include "mml/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

namespace mml {

std::vector<std::pair<int, int>> SurfaceMesh::edges() const
{
    std::vector<std::pair<int, int>> out;
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            out.emplace_back(std::min(a, b), std::max(a, b));
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

int SurfaceMesh::euler_characteristic() const
{
    return static_cast<int>(vertices.size()) - static_cast<int>(edges().size()) + static_cast<int>(faces.size());
}

bool SurfaceMesh::closed() const
{
    std::map<std::pair<int, int>, int> directed;
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k)
            ++directed[{f[k], f[(k + 1) % 3]}];
    for (const auto& [e, n] : directed) {
        if (n != 1)
            return false;
        auto back = directed.find({e.second, e.first});
        if (back == directed.end() || back->second != 1)
            return false;
    }
    return !faces.empty();
}

SurfaceMesh make_icosphere(double radius, int resolution, const Vec3& center)
{
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw RuntimeError("sphere radius must be positive, got " + std::to_string(radius));
    if (resolution < 0 || resolution > 7)
        throw RuntimeError("sphere resolution must be in 0..7, got " + std::to_string(resolution));
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : v)
        p = p / norm(p);
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int level = 0; level < resolution; ++level) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            Vec3 m = 0.5 * (v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]);
            v.push_back(m / norm(m));
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& tri : f) {
            const int a = midpoint(tri[0], tri[1]);
            const int b = midpoint(tri[1], tri[2]);
            const int c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    SurfaceMesh mesh;
    mesh.faces = std::move(f);
    mesh.vertices.reserve(v.size());
    for (const Vec3& p : v)
        mesh.vertices.push_back(center + radius * p);
    return mesh;
}

double mesh_volume(const std::vector<Vec3>& vertices, const std::vector<Face>& faces)
{
    SurfaceMesh probe;
    probe.faces = faces;
    if (!probe.closed())
        throw RuntimeError("region volume needs a closed surface mesh");
    double six = 0.0;
    double extent = 0.0;
    for (const Face& tri : faces) {
        const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
        six += dot(a, cross(b, c));
    }
    for (const Vec3& p : vertices)
        extent = std::max(extent, norm(p - vertices[0]));
    const double volume = six / 6.0;
    if (!(volume > 1e-12 * extent * extent * extent) || !std::isfinite(volume))
        throw RuntimeError("degenerate surface mesh: volume " + std::to_string(volume));
    return volume;
}

double mesh_volume(const SurfaceMesh& mesh) { return mesh_volume(mesh.vertices, mesh.faces); }

std::vector<Vec3> volume_gradient(const std::vector<Vec3>& vertices, const std::vector<Face>& faces)
{
    std::vector<Vec3> g(vertices.size());
    for (const Face& tri : faces) {
        const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
        g[static_cast<std::size_t>(tri[0])] += cross(b, c) / 6.0;
        g[static_cast<std::size_t>(tri[1])] += cross(c, a) / 6.0;
        g[static_cast<std::size_t>(tri[2])] += cross(a, b) / 6.0;
    }
    return g;
}

namespace {

constexpr double kSlack = 1e-9;

bool clear_of(const Vec3& p, double r, const std::vector<Obstacle>& obstacles)
{
    for (const Obstacle& o : obstacles)
        if (norm(p - o.center) < o.radius + r - kSlack)
            return false;
    return true;
}

} // namespace

std::vector<Vec3> fill_sphere(const Vec3& center, double radius, double particle_radius,
                              const std::vector<Obstacle>& obstacles)
{
    if (!(particle_radius > 0.0))
        throw RuntimeError("fill needs particles with a positive radius");
    std::vector<Vec3> out;
    const double spacing = 2.0 * particle_radius;
    const double reach = radius - particle_radius;
    if (reach < -kSlack)
        return out;
    const int n = static_cast<int>(std::floor(reach / spacing + kSlack));
    for (int k = -n; k <= n; ++k)
        for (int j = -n; j <= n; ++j)
            for (int i = -n; i <= n; ++i) {
                const Vec3 p = center + Vec3{i * spacing, j * spacing, k * spacing};
                if (norm(p - center) <= reach + kSlack && clear_of(p, particle_radius, obstacles))
                    out.push_back(p);
            }
    return out;
}

std::vector<Vec3> fill_box(const Vec3& lower, const Vec3& upper, double particle_radius,
                           const std::vector<Obstacle>& obstacles)
{
    if (!(particle_radius > 0.0))
        throw RuntimeError("fill needs particles with a positive radius");
    std::vector<Vec3> out;
    const double spacing = 2.0 * particle_radius;
    const Vec3 lo = lower + Vec3{particle_radius, particle_radius, particle_radius};
    const Vec3 hi = upper - Vec3{particle_radius, particle_radius, particle_radius};
    auto count = [&](double a, double b) { return b < a - kSlack ? 0 : static_cast<int>(std::floor((b - a) / spacing + kSlack)) + 1; };
    const int nx = count(lo.x, hi.x), ny = count(lo.y, hi.y), nz = count(lo.z, hi.z);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Vec3 p = lo + Vec3{i * spacing, j * spacing, k * spacing};
                if (clear_of(p, particle_radius, obstacles))
                    out.push_back(p);
            }
    return out;
}

void write_obj(std::ostream& out, const SurfaceMesh& mesh)
{
    out.precision(17);
    for (const Vec3& p : mesh.vertices)
        out << "v " << p.x << ' ' << p.y << ' ' << p.z << '\n';
    for (const Face& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

} // namespace mml
