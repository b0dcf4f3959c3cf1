#include "mml/neighbor.hpp"

#include "mml/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace mml {

void NeighborIndex::configure(double cutoff, double skin)
{
    if (!(cutoff > 0.0) || !(skin >= 0.0))
        throw RuntimeError("neighbor index needs a positive cutoff and a nonnegative skin");
    cutoff_ = cutoff;
    skin_ = skin;
    generation_ = ~std::uint64_t{0};
}

bool NeighborIndex::update(const std::vector<Vec3>& pos, std::uint64_t generation)
{
    bool stale = generation != generation_ || pos.size() != reference_.size();
    const double limit = 0.25 * skin_ * skin_;
    for (std::size_t i = 0; !stale && i < pos.size(); ++i)
        stale = norm2(pos[i] - reference_[i]) > limit;
    if (stale)
        rebuild(pos, generation);
    return stale;
}

void NeighborIndex::rebuild(const std::vector<Vec3>& pos, std::uint64_t generation)
{
    ++rebuilds_;
    generation_ = generation;
    reference_ = pos;
    candidates_.clear();
    const std::size_t n = pos.size();
    if (n < 2)
        return;
    for (const Vec3& p : pos)
        if (!finite(p))
            throw RuntimeError("neighbor index: non-finite position");
    Vec3 lo = pos[0], hi = pos[0];
    for (const Vec3& p : pos) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const double reach = cutoff_ + skin_;
    // Cap the grid at a few cells per particle.
    const double budget = std::max(64.0, 8.0 * static_cast<double>(n));
    double cell = reach;
    const Vec3 ext = hi - lo;
    while ((ext.x / cell + 1) * (ext.y / cell + 1) * (ext.z / cell + 1) > budget)
        cell *= 1.25;
    const int nx = static_cast<int>(ext.x / cell) + 1;
    const int ny = static_cast<int>(ext.y / cell) + 1;
    const int nz = static_cast<int>(ext.z / cell) + 1;
    const std::size_t ncell = static_cast<std::size_t>(nx) * ny * nz;
    std::vector<int> cx(n), cy(n), cz(n);
    std::vector<std::size_t> start(ncell + 1, 0), order(n);
    auto id = [&](int x, int y, int z) { return (static_cast<std::size_t>(z) * ny + y) * nx + x; };
    for (std::size_t i = 0; i < n; ++i) {
        cx[i] = std::min(static_cast<int>((pos[i].x - lo.x) / cell), nx - 1);
        cy[i] = std::min(static_cast<int>((pos[i].y - lo.y) / cell), ny - 1);
        cz[i] = std::min(static_cast<int>((pos[i].z - lo.z) / cell), nz - 1);
        ++start[id(cx[i], cy[i], cz[i]) + 1];
    }
    for (std::size_t c = 0; c < ncell; ++c)
        start[c + 1] += start[c];
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i = 0; i < n; ++i)
            order[fill[id(cx[i], cy[i], cz[i])]++] = i;
    }
    const double r2 = reach * reach;
    for (std::size_t i = 0; i < n; ++i) {
        for (int z = std::max(0, cz[i] - 1); z <= std::min(nz - 1, cz[i] + 1); ++z)
            for (int y = std::max(0, cy[i] - 1); y <= std::min(ny - 1, cy[i] + 1); ++y)
                for (int x = std::max(0, cx[i] - 1); x <= std::min(nx - 1, cx[i] + 1); ++x) {
                    const std::size_t c = id(x, y, z);
                    for (std::size_t k = start[c]; k < start[c + 1]; ++k) {
                        const std::size_t j = order[k];
                        if (j > i && norm2(pos[i] - pos[j]) <= r2)
                            candidates_.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
                    }
                }
    }
    std::sort(candidates_.begin(), candidates_.end());
}

std::vector<IndexPair> NeighborIndex::pairs(const std::vector<Vec3>& pos, double radius) const
{
    std::vector<IndexPair> out;
    for_each_pair(pos, radius, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) { out.emplace_back(i, j); });
    return out;
}

std::vector<IndexPair> brute_force_pairs(const std::vector<Vec3>& pos, double radius)
{
    std::vector<IndexPair> out;
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = i + 1; j < pos.size(); ++j)
            if (norm2(pos[i] - pos[j]) <= r2)
                out.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    return out;
}

} // namespace mml
