#include <doctest.h>

#include "mml/diagnostics.hpp"
#include "mml/model.hpp"
#include "mml/state.hpp"

#include "support.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace mml;

namespace {

SimState two_types()
{
    TypeSchema a{"A", {"C", "N"}, {1.0, 2.0}, {true, false}, 1.0, 2.0};
    TypeSchema b{"B", {"s"}, {kSiteEmpty}, {false}, 2.0, 1.0};
    RegionSchema root{"", 0, {true, false}};
    return SimState({a, b}, {root}, 2);
}

bool links_resolve(const SimState& s)
{
    for (const auto& l : s.links())
        if (!s.alive(l.a) || (l.b != kNoHandle && !s.alive(l.b)))
            return false;
    return true;
}

} // namespace

TEST_CASE("create takes defaults and overrides")
{
    auto s = two_types();
    const Handle h0 = s.create_particle(0, {0, 0, 0});
    const Handle h1 = s.create_particle(0, {1, 0, 0}, {}, {{0, 2.5}});
    CHECK(h0 == 0);
    CHECK(s.count() == 2);
    CHECK(s.pos(s.index(h0)) == Vec3{0, 0, 0});
    CHECK(s.attr(s.index(h0), 0) == 1.0);
    CHECK(s.attr(s.index(h1), 0) == 2.5);
    CHECK(s.attr(s.index(h1), 1) == 2.0);
    CHECK_THROWS_AS(s.create_particle(7, {}), RuntimeError);
}

TEST_CASE("capacity doubles and handles stay put")
{
    auto s = two_types();
    std::vector<Handle> hs;
    for (int i = 0; i < 4; ++i)
        hs.push_back(s.create_particle(0, {double(i), 0, 0}));
    while (s.count() < s.capacity())
        hs.push_back(s.create_particle(0, {double(hs.size()), 0, 0}));
    const auto cap = s.capacity();
    hs.push_back(s.create_particle(0, {double(hs.size()), 0, 0}));
    CHECK(s.capacity() == 2 * cap);
    for (std::size_t k = 0; k < hs.size(); ++k)
        CHECK(s.pos(s.index(hs[k])).x == double(k));
}

TEST_CASE("destroy compacts and detaches every link")
{
    auto s = two_types();
    const Handle a = s.create_particle(0, {0, 0, 0});
    const Handle b = s.create_particle(0, {1, 0, 0});
    const Handle c = s.create_particle(0, {2, 0, 0});
    const Handle d = s.create_particle(0, {3, 0, 0});
    for (Handle o : {a, c, d}) {
        LinkInstance l;
        l.a = b;
        l.b = o;
        l.spec = 0;
        CHECK(s.add_link(l) != 0);
    }
    LinkInstance keep;
    keep.a = a;
    keep.b = c;
    keep.spec = 0;
    s.add_link(keep);
    REQUIRE(s.links().size() == 4);
    s.destroy_particle(b);
    CHECK(s.links().size() == 1);
    CHECK(s.count() == 3);
    CHECK(s.pos(s.index(d)).x == 3.0);
    CHECK(s.pos(s.index(c)).x == 2.0);
    CHECK_THROWS_AS(s.index(b), RuntimeError);
    CHECK_THROWS_AS(s.destroy_particle(b), RuntimeError);
}

TEST_CASE("destroy the sole particle")
{
    auto s = two_types();
    s.destroy_particle(s.create_particle(1, {}));
    CHECK(s.count() == 0);
    CHECK(s.links().empty());
}

TEST_CASE("link sites bind and release")
{
    auto s = two_types();
    const Handle a = s.create_particle(1, {});
    const Handle b = s.create_particle(1, {1, 0, 0});
    LinkInstance l;
    l.a = a;
    l.b = b;
    l.spec = 0;
    l.site_a = 0;
    l.site_b = 0;
    const auto id = s.add_link(l);
    CHECK(s.attr(s.index(a), 0) == double(id));
    CHECK(s.attr(s.index(b), 0) == double(id));
    CHECK(s.add_link(l) == 0);
    s.remove_link(0);
    CHECK(s.attr(s.index(a), 0) == kSiteEmpty);
    CHECK(s.attr(s.index(b), 0) == kSiteEmpty);
}

TEST_CASE("random create and destroy keeps arrays and links consistent")
{
    auto s = two_types();
    std::mt19937_64 gen(7);
    std::set<Handle> live;
    std::map<Handle, double> tag;
    for (int step = 0; step < 2000; ++step) {
        const bool make = live.size() < 3 || gen() % 3 != 0;
        if (make) {
            const double x = double(gen() % 1000);
            const Handle h = s.create_particle(int(gen() % 2), {x, 0, 0});
            live.insert(h);
            tag[h] = x;
            if (live.size() > 1 && gen() % 2) {
                LinkInstance l;
                l.a = h;
                l.b = *live.begin();
                l.spec = 0;
                if (l.b != h)
                    s.add_link(l);
            }
        } else {
            auto it = live.begin();
            std::advance(it, long(gen() % live.size()));
            s.destroy_particle(*it);
            tag.erase(*it);
            live.erase(it);
        }
        REQUIRE(s.count() == live.size());
        REQUIRE(s.positions().size() == live.size());
        REQUIRE(s.members(0).size() + s.members(1).size() == live.size());
        REQUIRE(links_resolve(s));
    }
    for (Handle h : live)
        CHECK(s.pos(s.index(h)).x == tag[h]);
}

TEST_CASE("concentration rescales with volume, amounts do not")
{
    auto s = two_types();
    const Handle h = s.create_particle(0, {}, {}, {{0, 4.0}, {1, 1.23}});
    const double total0 = s.attr(s.index(h), 0) * s.volume(s.index(h));
    s.rescale_particle(h, 4.0);
    CHECK(s.attr(s.index(h), 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s.attr(s.index(h), 1) == 1.23);
    CHECK(std::abs(s.attr(s.index(h), 0) * 4.0 - total0) < 1e-12);
    s.rescale_particle(h, 4.0);
    CHECK(s.attr(s.index(h), 0) == 2.0);
    CHECK_THROWS_AS(s.rescale_particle(h, 0.0), RuntimeError);

    s.C = {4.0, 1.23};
    s.region_volume = {1.0};
    s.rescale_region(0, 2.0);
    CHECK(s.C[0] == 2.0);
    CHECK(s.C[1] == 1.23);
}

TEST_CASE("checkpoint round trip is exact")
{
    auto s = two_types();
    s.seed = 99;
    s.time = 0.1 + 0.2;
    s.step = 3;
    s.C = {1.0 / 3.0, 2.0};
    for (int i = 0; i < 5; ++i)
        s.create_particle(i % 2, {0.1 * i, 1.0 / (i + 1), -2.0}, {1e-17 * i, 0, 3});
    s.destroy_particle(1);
    LinkInstance l;
    l.a = 0;
    l.b = kNoHandle;
    l.plane = 4;
    l.anchor = {1, 2, 0};
    l.spec = 0;
    s.add_link(l);
    s.triggers.emplace_back(2, 3);
    std::stringstream buf;
    s.save(buf);
    const SimState t = SimState::load(buf);
    CHECK(t == s);
    std::stringstream again;
    t.save(again);
    CHECK(again.str() == buf.str());
}

TEST_CASE("from_model copies schemas and region values")
{
    auto m = test::compile("type Cell : MaterialRegion { A: conc(2.0); N: amount(1.23); }; c : Cell{};\n"
                           "type P : particle { radius: 1; Q: conc(0.5); };");
    auto s = SimState::from_model(m);
    CHECK(s.C.size() == m.region_value_count());
    const auto names = m.region_value_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == "c.A")
            CHECK(s.C[k] == 2.0);
        if (names[k] == "c.N")
            CHECK(s.C[k] == 1.23);
    }
    const int p = m.find_particle_type("P");
    CHECK(s.schema(p).volume == doctest::Approx(4.0 / 3.0 * 3.141592653589793));
}
