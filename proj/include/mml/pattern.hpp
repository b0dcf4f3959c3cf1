#pragma once

#include "mml/model.hpp"
#include "mml/state.hpp"

namespace mml {

/// Type, group and attribute-equality test of one participant pattern.
inline bool matches(const ParticlePattern& p, const SimState& s, std::size_t i)
{
    if (p.plane >= 0 || s.type(i) != p.type || !p.matches_group(s.group(i)))
        return false;
    for (const auto& c : p.constraints)
        if (s.attr(i, c.attr) != c.value)
            return false;
    return true;
}

} // namespace mml
