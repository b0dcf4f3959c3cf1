#pragma once

#include "mml/vec3.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace mml {

class CompiledModel;

/// Stable particle reference. Handles are never reused within a run.
using Handle = std::uint32_t;
inline constexpr Handle kNoHandle = 0xffffffffu;

struct TypeSchema {
    std::string name;
    std::vector<std::string> attribute_names;
    std::vector<double> defaults;
    std::vector<bool> concentration; // conc attributes rescale with volume
    double mass = 1.0;
    double volume = 0.0;
};

struct RegionSchema {
    std::string name;
    std::size_t offset = 0;
    std::vector<bool> concentration;
};

enum class LinkOrigin : int { Static = 0, Rule = 1, Discrete = 2 };

struct LinkInstance {
    std::uint64_t id = 0;
    LinkOrigin origin = LinkOrigin::Static;
    int rule = -1; // link rule or discrete rule index
    int spec = -1; // CompiledModel::link_specs index
    Handle a = kNoHandle;
    Handle b = kNoHandle; // kNoHandle when the second endpoint is a plane
    int plane = -1;
    Vec3 anchor;
    int site_a = -1;
    int site_b = -1;
    double rest = 0.0; // Hookean links
};

/// Mutable runtime state: region store C, dense particle arrays with per-type attribute
/// columns, live links, and counters that make the run reproducible.
class SimState {
public:
    SimState() = default;
    SimState(std::vector<TypeSchema> types, std::vector<RegionSchema> regions, std::size_t region_values);
    static SimState from_model(const CompiledModel& model);

    double time = 0.0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<double> C;
    std::vector<double> region_volume;
    /// Crossing triggers armed during the last continuous phase: (discrete rule, particle).
    std::vector<std::pair<int, Handle>> triggers;

    std::size_t count() const { return pos_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t type_count() const { return types_.size(); }
    const TypeSchema& schema(int type) const { return types_.at(static_cast<std::size_t>(type)); }
    const std::vector<RegionSchema>& regions() const { return regions_; }

    Handle create_particle(int type, const Vec3& r, const Vec3& v = {},
                           const std::vector<std::pair<int, double>>& overrides = {}, int group = -1);
    void destroy_particle(Handle h);

    bool alive(Handle h) const;
    /// Bumped by every create or destroy; dense indices are valid while it is unchanged.
    std::uint64_t generation() const { return generation_; }
    std::size_t index(Handle h) const;
    Handle handle(std::size_t i) const { return handle_[i]; }
    int type(std::size_t i) const { return type_[i]; }
    int group(std::size_t i) const { return group_[i]; }

    Vec3& pos(std::size_t i) { return pos_[i]; }
    const Vec3& pos(std::size_t i) const { return pos_[i]; }
    Vec3& vel(std::size_t i) { return vel_[i]; }
    const Vec3& vel(std::size_t i) const { return vel_[i]; }
    double& mass(std::size_t i) { return mass_[i]; }
    double mass(std::size_t i) const { return mass_[i]; }
    double volume(std::size_t i) const { return volume_[i]; }
    const std::vector<Vec3>& positions() const { return pos_; }

    double attr(std::size_t i, int a) const { return columns_[type_[i]][a][slot_[i]]; }
    double& attr(std::size_t i, int a) { return columns_[type_[i]][a][slot_[i]]; }
    std::size_t attr_count(std::size_t i) const { return columns_[type_[i]].size(); }
    /// Dense indices of the live particles of `type`, in column-slot order.
    const std::vector<std::size_t>& members(int type) const { return owner_[type]; }
    std::vector<double>& column(int type, int a) { return columns_[type][a]; }
    const std::vector<double>& column(int type, int a) const { return columns_[type][a]; }
    std::size_t slot(std::size_t i) const { return slot_[i]; }

    const std::vector<LinkInstance>& links() const { return links_; }
    LinkInstance& link(std::size_t k) { return links_[k]; }
    /// Adds a link and binds its sites. Returns 0 when an identical link already exists.
    std::uint64_t add_link(LinkInstance link);
    bool has_link(LinkOrigin origin, int rule, Handle a, Handle b, int plane = -1) const;
    /// Removes link `k` (vector position) and empties any sites it held.
    void remove_link(std::size_t k);
    std::size_t find_link(std::uint64_t id) const;

    /// conc *= old/new for every conc attribute of a particle (by handle) or region instance.
    void rescale_particle(Handle h, double new_volume);
    void rescale_region(int region, double new_volume);

    void save(std::ostream& out) const;
    static SimState load(std::istream& in);

    friend bool operator==(const SimState& a, const SimState& b);

private:
    using LinkKey = std::tuple<int, int, Handle, Handle, int, int, int>; // origin, rule, a, b, plane, sites
    static LinkKey key_of(const LinkInstance& l);
    void grow();

    std::vector<TypeSchema> types_;
    std::vector<RegionSchema> regions_;
    std::size_t capacity_ = 0;

    std::vector<Vec3> pos_;
    std::vector<Vec3> vel_;
    std::vector<double> mass_;
    std::vector<double> volume_;
    std::vector<int> type_;
    std::vector<int> group_;
    std::vector<Handle> handle_;
    std::vector<std::size_t> slot_;

    std::vector<std::vector<std::vector<double>>> columns_; // [type][attr][slot]
    std::vector<std::vector<std::size_t>> owner_;           // [type][slot] -> dense index

    std::vector<std::uint32_t> index_of_; // handle -> dense index
    Handle next_handle_ = 0;

    std::vector<LinkInstance> links_;
    std::map<LinkKey, std::uint64_t> link_keys_;
    std::uint64_t next_link_id_ = 1;
    std::uint64_t generation_ = 0;
};

} // namespace mml
