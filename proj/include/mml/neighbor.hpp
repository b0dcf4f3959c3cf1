#pragma once

#include "mml/vec3.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mml {

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;

/// Verlet pair list built from a cell grid. Candidates are the pairs within cutoff + skin at the
/// last rebuild, ordered by (i, j) with i < j.
class NeighborIndex {
public:
    NeighborIndex() = default;
    NeighborIndex(double cutoff, double skin) { configure(cutoff, skin); }

    void configure(double cutoff, double skin);
    double cutoff() const { return cutoff_; }
    double skin() const { return skin_; }

    /// Rebuilds when the particle set changed or any particle moved more than skin/2.
    bool update(const std::vector<Vec3>& pos, std::uint64_t generation);
    void rebuild(const std::vector<Vec3>& pos, std::uint64_t generation = 0);

    /// Pairs with |r_i - r_j| <= radius (radius must not exceed the configured cutoff).
    std::vector<IndexPair> pairs(const std::vector<Vec3>& pos, double radius) const;
    template <class F>
    void for_each_pair(const std::vector<Vec3>& pos, double radius, F&& f) const
    {
        const double r2 = radius * radius;
        for (const auto& [i, j] : candidates_) {
            const Vec3 d = pos[i] - pos[j];
            const double d2 = norm2(d);
            if (d2 <= r2)
                f(i, j, d, d2);
        }
    }

    const std::vector<IndexPair>& candidates() const { return candidates_; }
    std::size_t rebuild_count() const { return rebuilds_; }

private:
    double cutoff_ = 1.0;
    double skin_ = 0.3;
    std::vector<IndexPair> candidates_;
    std::vector<Vec3> reference_;
    std::uint64_t generation_ = ~std::uint64_t{0};
    std::size_t rebuilds_ = 0;
};

/// O(n^2) reference enumeration with the same inclusion test.
std::vector<IndexPair> brute_force_pairs(const std::vector<Vec3>& pos, double radius);

} // namespace mml
