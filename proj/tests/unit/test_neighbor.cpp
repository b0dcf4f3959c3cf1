#include <doctest.h>

#include "mml/neighbor.hpp"

#include <algorithm>
#include <random>

using namespace mml;

TEST_CASE("indexed pairs equal brute force")
{
    std::mt19937_64 gen(12345);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + gen() % 499;
        std::uniform_real_distribution<double> box(0.0, 2.0 + double(gen() % 20));
        std::vector<Vec3> pos(n);
        for (auto& p : pos)
            p = {box(gen), box(gen), box(gen)};
        if (trial % 10 == 0)
            pos[1] = pos[0];
        const double cutoff = 0.5 + 0.1 * double(gen() % 20);
        NeighborIndex index(cutoff, 0.3);
        index.rebuild(pos);
        REQUIRE(index.pairs(pos, cutoff) == brute_force_pairs(pos, cutoff));
        REQUIRE(index.pairs(pos, 0.5 * cutoff) == brute_force_pairs(pos, 0.5 * cutoff));
    }
}

TEST_CASE("pairs stay exact under motion below the skin")
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 8.0), d(-0.05, 0.05);
    std::vector<Vec3> pos(300);
    for (auto& p : pos)
        p = {u(gen), u(gen), u(gen)};
    NeighborIndex index(1.0, 0.4);
    index.update(pos, 1);
    const auto builds = index.rebuild_count();
    for (int step = 0; step < 50; ++step) {
        for (auto& p : pos)
            p += Vec3{d(gen), d(gen), d(gen)};
        index.update(pos, 1);
        REQUIRE(index.pairs(pos, 1.0) == brute_force_pairs(pos, 1.0));
    }
    CHECK(index.rebuild_count() > builds);
    CHECK(index.rebuild_count() < builds + 50);
    const auto before = index.rebuild_count();
    index.update(pos, 2);
    CHECK(index.rebuild_count() == before + 1);
}

TEST_CASE("boundary distance is included")
{
    std::vector<Vec3> pos{{0, 0, 0}, {1, 0, 0}, {2.5, 0, 0}};
    NeighborIndex index(1.0, 0.0);
    index.rebuild(pos);
    const auto p = index.pairs(pos, 1.0);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == IndexPair{0, 1});
    CHECK_THROWS(NeighborIndex(0.0, 0.1));
}
