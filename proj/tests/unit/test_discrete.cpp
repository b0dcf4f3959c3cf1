#include <doctest.h>

#include "mml/discrete.hpp"
#include "mml/simulation.hpp"

#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace mml;

namespace {

const char* kPair = "type A : particle { radius: 1; }; type B : particle { radius: 2; };\n";

std::size_t count_of(const Simulation& sim, const CompiledModel& m, const std::string& type)
{
    return sim.state().members(m.find_particle_type(type)).size();
}

std::string snapshot(const SimState& s)
{
    std::ostringstream out;
    s.save(out);
    return out.str();
}

} // namespace

TEST_CASE("pair match respects the distance cutoff")
{
    for (const double d : {4.9, 5.0, 6.0}) {
        auto m = test::compile(std::string(kPair) + "a1 : A(0,0,0); a2 : A(" + std::to_string(d) + ",0,0);\n" +
                               "proc (a:A, b:A) -> (B) when (dist(a,b) < 5) {1.0};");
        Simulation sim(m, 1);
        const auto tuples = sim.discrete().match(sim.state(), 0, nullptr);
        CHECK(tuples.size() == (d < 5.0 ? 1u : 0u));
    }
}

TEST_CASE("A + A -> B places B at the midpoint with conserved momentum")
{
    auto m = test::compile(std::string(kPair) +
                           "a1 : A(0,0,0,velocity=[1,0,0]); a2 : A(3,1,0,velocity=[0,2,0]);\n"
                           "proc (a:A, b:A) -> (B) when (dist(a,b) < 5);");
    Simulation sim(m, 1);
    sim.discrete().step(sim.state(), nullptr);
    REQUIRE(count_of(sim, m, "A") == 0);
    REQUIRE(count_of(sim, m, "B") == 1);
    const auto& s = sim.state();
    CHECK(s.pos(0) == Vec3{1.5, 0.5, 0});
    // Default particle masses are 1, so v = (m1 v1 + m2 v2) / m_B.
    CHECK(s.vel(0) == Vec3{1, 2, 0});
}

TEST_CASE("a particle takes part in one firing per step")
{
    auto m = test::compile(std::string(kPair) + "a1 : A(0,0,0); a2 : A(1,0,0); a3 : A(2,0,0);\n" +
                           "proc (a:A, b:A) -> (B) when (dist(a,b) < 5);");
    Simulation sim(m, 1);
    sim.discrete().step(sim.state(), nullptr);
    CHECK(count_of(sim, m, "A") == 1);
    CHECK(count_of(sim, m, "B") == 1);
    CHECK(sim.discrete().max_participation() == 1);
}

TEST_CASE("one-to-two decay spaces the products")
{
    auto m = test::compile(std::string(kPair) + "b : B(0,0,0); proc (a:B) -> (A, A) {1.0};");
    Simulation sim(m, 1);
    sim.discrete().step(sim.state(), nullptr);
    REQUIRE(count_of(sim, m, "A") == 2);
    const auto& s = sim.state();
    CHECK(norm(s.pos(0) - s.pos(1)) == doctest::Approx(2.0));
    CHECK(norm(0.5 * (s.pos(0) + s.pos(1))) < 1e-12);
}

TEST_CASE("activation toggle changes exactly one attribute")
{
    auto m = test::compile("type A : particle { radius: 0.5; activated: enum(Inactive, Active); Q: conc(2.0); };\n"
                           "type Activator : particle { radius: 0.5; };\n"
                           "x : A(0,0,0); y : Activator(1,0,0); far : A(9,0,0);\n" +
                           test::corpus("activation_toggle.mml"));
    Simulation sim(m, 1);
    SimState before = sim.state();
    sim.discrete().step(sim.state(), nullptr);
    const auto& after = sim.state();
    const int a = m.find_particle_type("A");
    const int act = m.particle_types[static_cast<std::size_t>(a)].find("activated");
    REQUIRE(act >= 0);
    CHECK(after.attr(after.index(0), static_cast<std::size_t>(act)) == 1.0);
    CHECK(after.attr(after.index(2), static_cast<std::size_t>(act)) == 0.0);
    before.attr(before.index(0), static_cast<std::size_t>(act)) = 1.0;
    CHECK(snapshot(before) == snapshot(after));

    // Already active: the pattern no longer matches.
    CHECK(sim.discrete().match(sim.state(), 0, nullptr).empty());
}

TEST_CASE("binding sites cap the number of links")
{
    auto m = test::compile("k: 1;" + test::corpus("binding_sites.mml") +
                           "\np1 : A(0,0,0); p2 : A(1,0,0);");
    Simulation sim(m, 1);
    for (int i = 0; i < 5; ++i)
        sim.discrete().step(sim.state(), nullptr);
    CHECK(sim.state().links().size() == 2);
    CHECK(sim.discrete().match(sim.state(), 0, nullptr).empty());
    for (const auto& l : sim.state().links()) {
        CHECK(l.site_a == 0);
        CHECK(l.site_b == 1);
    }
}

TEST_CASE("firing frequency matches the probability")
{
    auto m = test::compile(std::string(kPair) + "a : A(0,0,0); proc (x:A) -> (B) {0.3}; proc (x:B) -> (A) {1.0};");
    Simulation sim(m, 17);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        sim.discrete().step(sim.state(), nullptr);
        sim.state().step += 1;
    }
    const double fired = static_cast<double>(sim.discrete().stats()[0].fired);
    const double sd = std::sqrt(n * 0.3 * 0.7);
    CHECK(std::abs(fired - 0.3 * n) < 3.0 * sd);
    CHECK(sim.discrete().stats()[0].matched == static_cast<std::uint64_t>(n));
}

TEST_CASE("same seed gives the same firings")
{
    auto m = test::compile(std::string(kPair) + "a : A(0,0,0); proc (x:A) -> (B) {0.5}; proc (x:B) -> (A) {0.5};");
    auto run = [&](std::uint64_t seed) {
        Simulation sim(m, seed);
        std::string trace;
        for (int i = 0; i < 200; ++i) {
            sim.step(0.01);
            trace += count_of(sim, m, "A") ? 'A' : 'B';
        }
        return trace;
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
}

TEST_CASE("non-finite probability disables the rule")
{
    auto m = test::compile(std::string(kPair) + "a1 : A(0,0,0); a2 : A(1,0,0);\n" +
                           "proc (a:A, b:A) -> (B) when (dist(a,b) < 5) {sqrt(dist(a,b) - 3)};");
    DiagnosticLog log;
    Simulation sim(m, 1, &log);
    sim.discrete().step(sim.state(), nullptr);
    CHECK(sim.discrete().disabled(0));
    CHECK(count_of(sim, m, "A") == 2);
    REQUIRE(log.size() >= 1);
    sim.discrete().step(sim.state(), nullptr);
    CHECK(count_of(sim, m, "A") == 2);
}

TEST_CASE("out-of-range probability is clamped with one warning")
{
    auto m = test::compile(std::string(kPair) + "a : A(0,0,0); b : A(10,0,0); c : A(20,0,0); proc (x:A) -> (B) {2.5};");
    DiagnosticLog log;
    Simulation sim(m, 1, &log);
    sim.discrete().step(sim.state(), nullptr);
    CHECK(count_of(sim, m, "B") == 3);
    CHECK(log.size() == 1);
}

TEST_CASE("dynamic plane link attaches, holds and detaches")
{
    auto m = test::compile("k: 1;\nBoundingPlanes : Box{lower:[-5,-5,0], upper:[5,5,10]};\n"
                           "type P : particle { radius: 0.2; }; p : P(0,0,3);\n"
                           "link(a:P, b:BoundingPlanes[FLOOR]) when (dist(a,b) < .5) while (dist(a,b) < 2) {k*dist(a,b)};");
    REQUIRE(m.link_rules.size() == 1);
    CHECK(m.link_rules[0].mode == LinkRule::Mode::Dynamic);
    Simulation sim(m, 1);
    auto& s = sim.state();
    auto at = [&](double z) {
        s.pos(0) = {0.25, -0.5, z};
        sim.discrete().update_links(s, nullptr);
        return s.links().size();
    };
    CHECK(at(3.0) == 0);
    CHECK(at(1.5) == 0);
    CHECK(at(0.4) == 1);
    CHECK(s.links()[0].anchor == Vec3{0.25, -0.5, 0});
    CHECK(at(1.0) == 1);
    CHECK(at(1.5) == 1);
    CHECK(at(2.5) == 0);
    CHECK(at(1.5) == 0);
}

TEST_CASE("attached plane link pulls the particle toward the floor")
{
    auto m = test::compile("k: 4;\nBoundingPlanes : Box{lower:[-5,-5,0], upper:[5,5,10]};\n"
                           "type P : particle { radius: 0.2; }; p : P(0,0,0.3,velocity=[0,0,1]);\n"
                           "link(a:P, b:BoundingPlanes[FLOOR]) when (dist(a,b) < .5) while (dist(a,b) < 2) {k*dist(a,b)};");
    Simulation sim(m, 1);
    double top = 0.0;
    for (int i = 0; i < 400; ++i) {
        sim.step(0.01);
        top = std::max(top, sim.state().pos(0).z);
    }
    CHECK(sim.state().links().size() == 1);
    CHECK(top < 2.0);
}

TEST_CASE("crossing detection on known functions")
{
    auto lin = detect_crossings([](double t) { return t - 0.3; }, 0.0, 1.0, 1e-9);
    REQUIRE(lin.size() == 1);
    CHECK(lin[0].t == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(lin[0].rising);

    auto cubic = detect_crossings([](double t) { return (t - 0.2) * (t - 0.5) * (t - 0.8); }, 0.0, 1.0, 1e-9);
    REQUIRE(cubic.size() == 3);
    CHECK(cubic[0].t == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(cubic[0].rising);
    CHECK(cubic[1].t == doctest::Approx(0.5).epsilon(1e-8));
    CHECK_FALSE(cubic[1].rising);
    CHECK(cubic[2].t == doctest::Approx(0.8).epsilon(1e-8));
    CHECK(cubic[2].rising);

    CHECK(detect_crossings([](double t) { return 1.0 + t; }, 0.0, 1.0, 1e-9).empty());
}

TEST_CASE("state predicate fires on the step after its crossing")
{
    auto m = test::compile("type P : particle { radius: 0.5; A: amount(0.0); S: const amount(1.0); proc (S) -> (A) {1.0}; };\n"
                           "type Q : particle { radius: 0.5; };\n"
                           "p : P(0,0,0); proc (x:P) -> (Q) when (x.A > 0.055);");
    Simulation sim(m, 1);
    int fired_at = -1;
    for (int i = 1; i <= 10 && fired_at < 0; ++i) {
        sim.step(0.01);
        if (count_of(sim, m, "Q") == 1)
            fired_at = i;
    }
    // A crosses 0.055 during step 6; the rule fires at the start of step 7.
    CHECK(fired_at == 7);
}
