#include <doctest.h>

#include "mml/diagnostics.hpp"
#include "mml/fields.hpp"
#include "mml/model.hpp"
#include "mml/parser.hpp"
#include "mml/state.hpp"

#include <cmath>
#include <numbers>

using namespace mml;

namespace {

CompiledModel one_field(KernelKind kind, double smoothing = 0.0)
{
    CompiledModel m;
    ParticleType p;
    p.name = "P";
    p.radius = 0.5;
    AttributeDef a;
    a.name = "A";
    p.attributes.push_back(a);
    m.particle_types.push_back(p);
    RegionType root;
    m.region_types.push_back(root);
    m.regions.push_back(RegionInstance{});
    Group g;
    g.path = "src";
    m.groups.push_back(g);
    FieldDef f;
    f.name = "F";
    f.groups = {0};
    f.attribute = "A";
    f.attr_by_type[0] = 0;
    f.kernel = kind;
    f.smoothing = smoothing;
    m.fields.push_back(f);
    return m;
}

SimState state_for(const CompiledModel& m) { return SimState::from_model(m); }

} // namespace

TEST_CASE("cubic spline shape")
{
    CHECK(cubic_spline(0.0, 1.0) == 1.0);
    CHECK(cubic_spline(1.0, 1.0) == doctest::Approx(0.25));
    CHECK(cubic_spline(1.5, 1.0) == doctest::Approx(0.25 * 0.125));
    CHECK(cubic_spline(2.0, 1.0) == 0.0);
    CHECK(cubic_spline(1.0, 2.0) == doctest::Approx(1 - 1.5 * 0.25 + 0.75 * 0.125));
}

TEST_CASE("concentration field reproduces a uniform value")
{
    auto m = one_field(KernelKind::Concentration);
    auto s = state_for(m);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            s.create_particle(0, {double(i), double(j), 0}, {}, {{0, 3.0}}, 0);
    FieldEngine f(m);
    f.calibrate(s);
    CHECK(f.smoothing(0) == doctest::Approx(2.0));
    CHECK(f.eval(0, {2.0, 2.0, 0.0}) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.eval(0, {1.3, 2.7, 0.4}) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.eval(0, {100, 0, 0}) == 0.0);
}

TEST_CASE("concentration field interpolates between sources")
{
    auto m = one_field(KernelKind::Concentration, 1.0);
    auto s = state_for(m);
    s.create_particle(0, {0, 0, 0}, {}, {{0, 1.0}}, 0);
    s.create_particle(0, {1, 0, 0}, {}, {{0, 3.0}}, 0);
    FieldEngine f(m);
    f.bind(s);
    CHECK(f.eval(0, {0.5, 0, 0}) == doctest::Approx(2.0));
    const double w0 = cubic_spline(0.25, 1.0), w1 = cubic_spline(0.75, 1.0);
    CHECK(f.eval(0, {0.25, 0, 0}) == doctest::Approx((w0 * 1 + w1 * 3) / (w0 + w1)));
}

TEST_CASE("charge field is the Coulomb sum")
{
    auto m = one_field(KernelKind::Charge);
    auto s = state_for(m);
    s.create_particle(0, {0, 0, 0}, {}, {{0, 2.0}}, 0);
    s.create_particle(0, {3, 0, 0}, {}, {{0, -1.0}}, 0);
    FieldEngine f(m);
    f.bind(s);
    const double eps0 = m.fields[0].epsilon0;
    const double k = 1.0 / (4 * std::numbers::pi * eps0);
    CHECK(f.eval(0, {1, 0, 0}) == doctest::Approx(k * (2.0 / 1.0 - 1.0 / 2.0)));
    CHECK_THROWS_AS(f.eval(0, {0, 0, 0}), RuntimeError);
}

TEST_CASE("user kernel sums the compiled body")
{
    auto m = one_field(KernelKind::User);
    ir::Program p;
    p.code = {{ir::Op::Load, 0, 0}, {ir::Op::Load, 1, 0}, {ir::Op::Mul, 0, 0}};
    p.bindings = {{ir::Source::KernelValue}, {ir::Source::KernelDist}};
    p.max_stack = 2;
    m.fields[0].user_kernel = p;
    auto s = state_for(m);
    s.create_particle(0, {0, 0, 0}, {}, {{0, 2.0}}, 0);
    s.create_particle(0, {0, 4, 0}, {}, {{0, 5.0}}, 0);
    FieldEngine f(m);
    f.bind(s);
    CHECK(f.eval(0, {0, 1, 0}) == doctest::Approx(2.0 * 1 + 5.0 * 3));
}
