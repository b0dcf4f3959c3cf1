#include "mml/model.hpp"

#include <algorithm>
#include <numbers>

namespace mml {

int ParticleType::find(const std::string& attr) const
{
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        if (attributes[i].name == attr) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

double ParticleType::volume() const { return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius; }

int RegionType::find(const std::string& attr) const
{
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        if (attributes[i].name == attr) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int Domain::find_plane(const std::string& name) const
{
    for (std::size_t i = 0; i < planes.size(); ++i) {
        if (planes[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const char* to_string(ProcessClass c)
{
    switch (c) {
    case ProcessClass::Continuous: return "continuous";
    case ProcessClass::Rate: return "rate";
    case ProcessClass::Flux: return "flux";
    case ProcessClass::Discrete: return "discrete";
    case ProcessClass::Link: return "link";
    }
    return "?";
}

const char* to_string(ResolutionKind k)
{
    switch (k) {
    case ResolutionKind::LocalAttribute: return "local-attribute";
    case ResolutionKind::RegionScalar: return "region-scalar";
    case ResolutionKind::SpatialField: return "spatial-field";
    case ResolutionKind::Unresolved: return "unresolved";
    }
    return "?";
}

bool ParticlePattern::matches_group(int group) const
{
    return groups.empty() || std::find(groups.begin(), groups.end(), group) != groups.end();
}

std::size_t CompiledModel::region_value_count() const
{
    std::size_t n = 0;
    for (const auto& r : regions) {
        n = std::max(n, r.value_offset + region_types[static_cast<std::size_t>(r.type)].attributes.size());
    }
    return n;
}

int CompiledModel::find_particle_type(const std::string& name) const
{
    for (std::size_t i = 0; i < particle_types.size(); ++i) {
        if (particle_types[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int CompiledModel::find_group(const std::string& path) const
{
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].path == path) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int CompiledModel::find_region(const std::string& path) const
{
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (regions[i].path == path) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const ReactionNetwork* CompiledModel::find_network(const std::string& host) const
{
    for (const auto& n : networks) {
        if (n.host_name == host) {
            return &n;
        }
    }
    return nullptr;
}

std::vector<std::string> CompiledModel::region_value_names() const
{
    std::vector<std::string> names(region_value_count());
    for (const auto& r : regions) {
        const auto& t = region_types[static_cast<std::size_t>(r.type)];
        for (std::size_t a = 0; a < t.attributes.size(); ++a) {
            names[r.value_offset + a] = r.path.empty() ? t.attributes[a].name : r.path + "." + t.attributes[a].name;
        }
    }
    return names;
}

} // namespace mml
