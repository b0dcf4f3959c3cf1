#include <doctest.h>

#include "mml/forces.hpp"
#include "mml/simulation.hpp"

#include "support.hpp"

#include <cmath>
#include <random>

using namespace mml;

namespace {

const char* kGas = "BoundingPlanes : Box{lower:[0,0,0], upper:[5,5,5]};\n"
                   "type W : particle { radius: 0.35; dpd: DPD{a: 25, gamma: 4.5, kT: 1.0, cutoff: 1.0}; };\n"
                   "gas : fill(type=W);\n";

double kinetic_temperature(const SimState& s)
{
    double e = 0.0;
    for (std::size_t i = 0; i < s.count(); ++i)
        e += s.mass(i) * norm2(s.vel(i));
    return e / (3.0 * static_cast<double>(s.count()));
}

} // namespace

TEST_CASE("DPD pair force terms")
{
    CHECK(dpd_weight(0.25, 1.0) == 0.75);
    CHECK(dpd_weight(1.0, 1.0) == 0.0);
    const Vec3 rij{0.5, 0, 0};
    CHECK(conservative_force(rij, 25, 1.0) == Vec3{12.5, 0, 0});
    CHECK(conservative_force(Vec3{2, 0, 0}, 25, 1.0) == Vec3{});
    // Approaching pair is slowed: v_ij points from j toward i reversed.
    const Vec3 fd = dissipative_force(rij, Vec3{-1, 0, 0}, 4.5, 1.0);
    CHECK(fd.x == doctest::Approx(4.5 * 0.25));
    const Vec3 fr = random_force(rij, 3.0, 1.0, 0.8, 0.01);
    CHECK(fr.x == doctest::Approx(3.0 * 0.5 * 0.8 / 0.1));
    CHECK(DpdParams{25, 4.5, 1.0, 1.0}.sigma() == doctest::Approx(3.0));
}

TEST_CASE("positive link scalar attracts")
{
    auto m = test::compile("a:particle(0,0,0); b:particle(2,0,0); link(a,b){3};");
    Simulation sim(m, 1);
    std::vector<Vec3> f;
    sim.index().rebuild(sim.state().positions());
    sim.forces().compute(sim.state(), sim.index(), nullptr, 0.01, 0, f);
    CHECK(f[0] == Vec3{3, 0, 0});
    CHECK(f[1] == Vec3{-3, 0, 0});
}

TEST_CASE("coincident link endpoints give zero force and a warning")
{
    auto m = test::compile("a:particle(0,0,0); b:particle(0,0,0); link(a,b){3};");
    DiagnosticLog log;
    Simulation sim(m, 1, &log);
    std::vector<Vec3> f;
    sim.forces().compute(sim.state(), sim.index(), nullptr, 0.01, 0, f);
    CHECK(f[0] == Vec3{});
    CHECK(log.size() == 1);
}

TEST_CASE("pair forces are antisymmetric and independent of the Verlet skin")
{
    auto m = test::compile(kGas);
    Simulation sim(m, 3);
    auto& s = sim.state();
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> d(-0.2, 0.2);
    for (std::size_t i = 0; i < s.count(); ++i)
        s.pos(i) += Vec3{d(gen), d(gen), d(gen)};
    NeighborIndex tight(1.0, 0.0), loose(1.0, 0.9);
    tight.rebuild(s.positions());
    loose.rebuild(s.positions());
    REQUIRE(tight.candidates().size() < loose.candidates().size());
    std::vector<Vec3> a, b;
    sim.forces().compute(s, tight, nullptr, 0.01, 42, a);
    sim.forces().compute(s, loose, nullptr, 0.01, 42, b);
    CHECK(a == b);
    Vec3 total;
    for (const auto& f : a)
        total += f;
    CHECK(norm(total) < 1e-9);
}

TEST_CASE("noise key changes only the random term")
{
    auto m = test::compile(kGas);
    Simulation sim(m, 3);
    auto& s = sim.state();
    sim.index().rebuild(s.positions());
    std::vector<Vec3> a, b;
    sim.forces().compute(s, sim.index(), nullptr, 0.01, 1, a);
    sim.forces().compute(s, sim.index(), nullptr, 0.01, 2, b);
    CHECK(a != b);
    sim.forces().terms.random = false;
    sim.forces().compute(s, sim.index(), nullptr, 0.01, 1, a);
    sim.forces().compute(s, sim.index(), nullptr, 0.01, 2, b);
    CHECK(a == b);
}

TEST_CASE("DPD gas holds the configured temperature")
{
    auto m = test::compile(kGas);
    Simulation sim(m, 9);
    for (int i = 0; i < 2000; ++i)
        sim.step(0.01);
    double sum = 0.0;
    const int n = 8000;
    for (int i = 0; i < n; ++i) {
        sim.step(0.01);
        sum += kinetic_temperature(sim.state());
    }
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("volume penalty pushes a compressed surface outward")
{
    auto m = test::compile("type Bag : MaterialRegion { surface: Sphere{radius: 2, resolution: 1}; volume_preservation: 10; };\n"
                           "bag : Bag{};");
    Simulation sim(m, 1);
    auto& s = sim.state();
    for (std::size_t i = 0; i < s.count(); ++i)
        s.pos(i) = 0.9 * s.pos(i);
    sim.forces().terms.links = false;
    std::vector<Vec3> f;
    sim.forces().compute(s, sim.index(), nullptr, 0.01, 0, f);
    for (std::size_t i = 0; i < s.count(); ++i)
        CHECK(dot(f[i], s.pos(i)) > 0.0);
}

TEST_CASE("reflecting walls keep particles inside")
{
    auto m = test::compile("BoundingPlanes : Box{lower:[0,0,0], upper:[2,2,2]};\n"
                           "a : particle(1,1,1,velocity=[3,-5,0.5]);");
    Simulation sim(m, 1);
    for (int i = 0; i < 1000; ++i) {
        sim.step(0.01);
        const Vec3 r = sim.state().pos(0);
        REQUIRE((r.x >= 0 && r.x <= 2 && r.y >= 0 && r.y <= 2 && r.z >= 0 && r.z <= 2));
    }
    CHECK(norm(sim.state().vel(0)) == doctest::Approx(std::sqrt(9 + 25 + 0.25)));
}
