#include <doctest.h>

#include "mml/diagnostics.hpp"
#include "mml/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mml;

namespace {

/// Lattice points of spacing 2r, one axis at a time, kept r inside the sphere.
std::size_t lattice_in_sphere(double R, double r)
{
    const double s = 2.0 * r;
    const int n = static_cast<int>(std::ceil(R / s)) + 1;
    std::size_t count = 0;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j)
            for (int k = -n; k <= n; ++k) {
                const double d = std::sqrt(double(i * i + j * j + k * k)) * s;
                if (d + r <= R + 1e-9)
                    ++count;
            }
    return count;
}

} // namespace

TEST_CASE("icosphere counts and topology")
{
    const auto m0 = make_icosphere(1.0, 0);
    CHECK(m0.vertices.size() == 12);
    CHECK(m0.faces.size() == 20);
    const auto m1 = make_icosphere(1.0, 1);
    CHECK(m1.vertices.size() == 42);
    CHECK(m1.faces.size() == 80);
    for (int res = 0; res <= 4; ++res) {
        const auto m = make_icosphere(2.0, res, {1, 2, 3});
        CHECK(m.euler_characteristic() == 2);
        CHECK(m.closed());
        const std::size_t v = m0.vertices.size(), e = m0.edges().size();
        if (res == 1)
            CHECK(m.vertices.size() == v + e);
        for (const auto& p : m.vertices)
            CHECK(norm(p - Vec3{1, 2, 3}) == doctest::Approx(2.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(make_icosphere(0.0, 1), RuntimeError);
    CHECK_THROWS_AS(make_icosphere(1.0, -1), RuntimeError);
}

TEST_CASE("mesh volume")
{
    const double exact = 4.0 / 3.0 * std::numbers::pi * 125.0;
    const double v3 = mesh_volume(make_icosphere(5.0, 3));
    CHECK(std::abs(v3 - exact) / exact < 0.02);
    double prev = 0.0;
    for (int res = 0; res <= 5; ++res) {
        const double v = mesh_volume(make_icosphere(5.0, res));
        CHECK(v > prev);
        CHECK(v < exact);
        prev = v;
    }
    auto m = make_icosphere(1.0, 2);
    const double v = mesh_volume(m);
    for (auto& p : m.vertices)
        p = 2.0 * p;
    CHECK(mesh_volume(m) == doctest::Approx(8.0 * v).epsilon(1e-12));

    auto flat = make_icosphere(1.0, 1);
    for (auto& p : flat.vertices)
        p.z = 0.0;
    CHECK_THROWS_AS(mesh_volume(flat), RuntimeError);
    auto open = make_icosphere(1.0, 1);
    open.faces.pop_back();
    CHECK_THROWS_AS(mesh_volume(open), RuntimeError);
}

TEST_CASE("volume gradient matches finite differences")
{
    auto m = make_icosphere(1.5, 1);
    m.vertices[3].x += 0.1;
    const auto g = volume_gradient(m.vertices, m.faces);
    const double h = 1e-6;
    for (std::size_t i = 0; i < m.vertices.size(); i += 7) {
        for (int k = 0; k < 3; ++k) {
            auto plus = m.vertices, minus = m.vertices;
            plus[i][k] += h;
            minus[i][k] -= h;
            const double fd = (mesh_volume(plus, m.faces) - mesh_volume(minus, m.faces)) / (2 * h);
            CHECK(g[i][k] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("sphere fill")
{
    const auto one = fill_sphere({}, 5.0, 5.0);
    REQUIRE(one.size() == 1);
    CHECK(norm(one[0]) < 1e-12);
    for (double r : {1.0, 0.7, 0.5}) {
        const auto pts = fill_sphere({3, -1, 2}, 5.0, r);
        CHECK(pts.size() == lattice_in_sphere(5.0, r));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            CHECK(norm(pts[i] - Vec3{3, -1, 2}) + r <= 5.0 + 1e-9);
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                REQUIRE(norm(pts[i] - pts[j]) >= 2 * r - 1e-12);
        }
    }
    CHECK(fill_sphere({}, 1.0, 2.0).empty());
    CHECK_THROWS_AS(fill_sphere({}, 1.0, 0.0), RuntimeError);
}

TEST_CASE("fills leave sub-objects empty")
{
    const Obstacle inner{{0, 0, 0}, 2.0};
    const auto pts = fill_sphere({}, 6.0, 0.5, {inner});
    CHECK(!pts.empty());
    for (const auto& p : pts)
        CHECK(norm(p) >= 2.0 + 0.5 - 1e-9);
    const auto box = fill_box({0, 0, 0}, {4, 4, 4}, 0.5);
    CHECK(box.size() == 64);
    const auto holed = fill_box({0, 0, 0}, {4, 4, 4}, 0.5, {{{2, 2, 2}, 1.0}});
    CHECK(holed.size() < box.size());
    for (const auto& p : holed)
        CHECK(norm(p - Vec3{2, 2, 2}) >= 1.5 - 1e-9);
}

TEST_CASE("obj export")
{
    std::ostringstream out;
    write_obj(out, make_icosphere(1.0, 0));
    const std::string s = out.str();
    std::size_t v = 0, f = 0;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
        v += line.rfind("v ", 0) == 0;
        f += line.rfind("f ", 0) == 0;
    }
    CHECK(v == 12);
    CHECK(f == 20);
}
