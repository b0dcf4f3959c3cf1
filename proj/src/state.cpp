#include "mml/state.hpp"

#include "mml/diagnostics.hpp"
#include "mml/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>

namespace mml {

namespace {

constexpr std::uint32_t kDead = 0xffffffffu;

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

} // namespace

SimState::SimState(std::vector<TypeSchema> types, std::vector<RegionSchema> regions, std::size_t region_values)
    : C(region_values, 0.0), region_volume(regions.size(), 1.0), types_(std::move(types)), regions_(std::move(regions))
{
    columns_.resize(types_.size());
    owner_.resize(types_.size());
    for (std::size_t t = 0; t < types_.size(); ++t) {
        columns_[t].resize(types_[t].defaults.size());
    }
}

SimState SimState::from_model(const CompiledModel& model)
{
    std::vector<TypeSchema> types;
    for (const auto& pt : model.particle_types) {
        TypeSchema s;
        s.name = pt.name;
        s.mass = pt.mass;
        s.volume = pt.volume();
        for (const auto& a : pt.attributes) {
            s.attribute_names.push_back(a.name);
            s.defaults.push_back(a.initial);
            s.concentration.push_back(a.kind == AttrKind::Conc);
        }
        types.push_back(std::move(s));
    }
    std::vector<RegionSchema> regions;
    for (const auto& r : model.regions) {
        RegionSchema s;
        s.name = r.path.empty() ? std::string("<root>") : r.path;
        s.offset = r.value_offset;
        for (const auto& a : model.region_types[static_cast<std::size_t>(r.type)].attributes) {
            s.concentration.push_back(a.kind == AttrKind::Conc);
        }
        regions.push_back(std::move(s));
    }
    SimState st(std::move(types), std::move(regions), model.region_value_count());
    for (std::size_t r = 0; r < model.regions.size(); ++r) {
        const auto& inst = model.regions[r];
        for (std::size_t k = 0; k < inst.initial_values.size(); ++k) {
            st.C[inst.value_offset + k] = inst.initial_values[k];
        }
    }
    return st;
}

void SimState::grow()
{
    capacity_ = capacity_ == 0 ? 16 : capacity_ * 2;
    pos_.reserve(capacity_);
    vel_.reserve(capacity_);
    mass_.reserve(capacity_);
    volume_.reserve(capacity_);
    type_.reserve(capacity_);
    group_.reserve(capacity_);
    handle_.reserve(capacity_);
    slot_.reserve(capacity_);
}

Handle SimState::create_particle(int type, const Vec3& r, const Vec3& v,
                                 const std::vector<std::pair<int, double>>& overrides, int group)
{
    if (type < 0 || static_cast<std::size_t>(type) >= types_.size()) {
        throw RuntimeError("create_particle: unknown particle type " + std::to_string(type));
    }
    if (!finite(r) || !finite(v)) {
        throw RuntimeError("create_particle: non-finite position or velocity");
    }
    ++generation_;
    if (pos_.size() == capacity_) {
        grow();
    }
    const auto& schema = types_[type];
    const std::size_t i = pos_.size();
    const Handle h = next_handle_++;
    pos_.push_back(r);
    vel_.push_back(v);
    mass_.push_back(schema.mass);
    volume_.push_back(schema.volume);
    type_.push_back(type);
    group_.push_back(group);
    handle_.push_back(h);
    slot_.push_back(owner_[type].size());
    owner_[type].push_back(i);
    for (std::size_t a = 0; a < schema.defaults.size(); ++a) {
        columns_[type][a].push_back(schema.defaults[a]);
    }
    for (const auto& [a, value] : overrides) {
        if (a < 0 || static_cast<std::size_t>(a) >= schema.defaults.size()) {
            throw RuntimeError("create_particle: attribute index out of range");
        }
        columns_[type][a].back() = value;
    }
    index_of_.push_back(static_cast<std::uint32_t>(i));
    return h;
}

bool SimState::alive(Handle h) const { return h < index_of_.size() && index_of_[h] != kDead; }

std::size_t SimState::index(Handle h) const
{
    if (!alive(h)) {
        throw RuntimeError("stale particle handle " + std::to_string(h));
    }
    return index_of_[h];
}

void SimState::destroy_particle(Handle h)
{
    const std::size_t i = index(h);
    ++generation_;
    for (std::size_t k = links_.size(); k-- > 0;) {
        if (links_[k].a == h || links_[k].b == h) {
            remove_link(k);
        }
    }

    // Compact the type columns.
    const int t = type_[i];
    const std::size_t s = slot_[i];
    const std::size_t last_slot = owner_[t].size() - 1;
    if (s != last_slot) {
        const std::size_t moved = owner_[t][last_slot];
        owner_[t][s] = moved;
        slot_[moved] = s;
        for (auto& col : columns_[t]) {
            col[s] = col[last_slot];
        }
    }
    owner_[t].pop_back();
    for (auto& col : columns_[t]) {
        col.pop_back();
    }

    // Compact the dense arrays.
    const std::size_t last = pos_.size() - 1;
    if (i != last) {
        pos_[i] = pos_[last];
        vel_[i] = vel_[last];
        mass_[i] = mass_[last];
        volume_[i] = volume_[last];
        type_[i] = type_[last];
        group_[i] = group_[last];
        handle_[i] = handle_[last];
        slot_[i] = slot_[last];
        owner_[type_[i]][slot_[i]] = i;
        index_of_[handle_[i]] = static_cast<std::uint32_t>(i);
    }
    pos_.pop_back();
    vel_.pop_back();
    mass_.pop_back();
    volume_.pop_back();
    type_.pop_back();
    group_.pop_back();
    handle_.pop_back();
    slot_.pop_back();
    index_of_[h] = kDead;
    triggers.erase(std::remove_if(triggers.begin(), triggers.end(), [h](const auto& t) { return t.second == h; }),
                   triggers.end());
}

SimState::LinkKey SimState::key_of(const LinkInstance& l)
{
    Handle a = l.a;
    Handle b = l.b;
    int sa = l.site_a;
    int sb = l.site_b;
    if (b != kNoHandle && b < a) {
        std::swap(a, b);
        std::swap(sa, sb);
    }
    return {static_cast<int>(l.origin), l.rule, a, b, l.plane, sa, sb};
}

bool SimState::has_link(LinkOrigin origin, int rule, Handle a, Handle b, int plane) const
{
    LinkInstance probe;
    probe.origin = origin;
    probe.rule = rule;
    probe.a = a;
    probe.b = b;
    probe.plane = plane;
    return link_keys_.count(key_of(probe)) != 0;
}

std::uint64_t SimState::add_link(LinkInstance link)
{
    if (!alive(link.a) || (link.b != kNoHandle && !alive(link.b))) {
        throw RuntimeError("add_link: endpoint is not a live particle");
    }
    if (link.a == link.b) {
        throw RuntimeError("add_link: endpoints must be distinct");
    }
    const LinkKey key = key_of(link);
    if (link_keys_.count(key)) {
        return 0;
    }
    link.id = next_link_id_++;
    if (link.site_a >= 0) {
        attr(index(link.a), link.site_a) = static_cast<double>(link.id);
    }
    if (link.site_b >= 0 && link.b != kNoHandle) {
        attr(index(link.b), link.site_b) = static_cast<double>(link.id);
    }
    link_keys_.emplace(key, link.id);
    links_.push_back(link);
    return link.id;
}

void SimState::remove_link(std::size_t k)
{
    const LinkInstance l = links_[k];
    if (l.site_a >= 0 && alive(l.a)) {
        attr(index(l.a), l.site_a) = kSiteEmpty;
    }
    if (l.site_b >= 0 && l.b != kNoHandle && alive(l.b)) {
        attr(index(l.b), l.site_b) = kSiteEmpty;
    }
    link_keys_.erase(key_of(l));
    // Order-preserving erase keeps force summation order independent of removal history.
    links_.erase(links_.begin() + static_cast<std::ptrdiff_t>(k));
}

std::size_t SimState::find_link(std::uint64_t id) const
{
    for (std::size_t k = 0; k < links_.size(); ++k) {
        if (links_[k].id == id) {
            return k;
        }
    }
    return links_.size();
}

void SimState::rescale_particle(Handle h, double new_volume)
{
    if (!(new_volume > 0.0)) {
        throw RuntimeError("rescale_concentration: volume must be positive");
    }
    const std::size_t i = index(h);
    const double factor = volume_[i] / new_volume;
    const auto& conc = types_[type_[i]].concentration;
    for (std::size_t a = 0; a < conc.size(); ++a) {
        if (conc[a]) {
            attr(i, static_cast<int>(a)) *= factor;
        }
    }
    volume_[i] = new_volume;
}

void SimState::rescale_region(int region, double new_volume)
{
    if (!(new_volume > 0.0)) {
        throw RuntimeError("rescale_concentration: volume must be positive");
    }
    const auto& schema = regions_.at(static_cast<std::size_t>(region));
    const double factor = region_volume[region] / new_volume;
    for (std::size_t a = 0; a < schema.concentration.size(); ++a) {
        if (schema.concentration[a]) {
            C[schema.offset + a] *= factor;
        }
    }
    region_volume[region] = new_volume;
}

void SimState::save(std::ostream& out) const
{
    using nlohmann::json;
    json j;
    j["format"] = "mml-checkpoint";
    j["version"] = 1;
    j["time"] = time;
    j["step"] = step;
    j["seed"] = seed;
    j["C"] = C;
    j["region_volume"] = region_volume;
    json types = json::array();
    for (const auto& t : types_) {
        types.push_back({{"name", t.name},
                         {"attributes", t.attribute_names},
                         {"defaults", t.defaults},
                         {"concentration", t.concentration},
                         {"mass", t.mass},
                         {"volume", t.volume}});
    }
    j["types"] = types;
    json regions = json::array();
    for (const auto& r : regions_) {
        regions.push_back({{"name", r.name}, {"offset", r.offset}, {"concentration", r.concentration}});
    }
    j["regions"] = regions;
    json particles = json::array();
    for (std::size_t i = 0; i < count(); ++i) {
        json attrs = json::array();
        for (std::size_t a = 0; a < attr_count(i); ++a) {
            attrs.push_back(attr(i, static_cast<int>(a)));
        }
        particles.push_back({{"handle", handle_[i]},
                             {"type", type_[i]},
                             {"group", group_[i]},
                             {"r", vec_json(pos_[i])},
                             {"v", vec_json(vel_[i])},
                             {"mass", mass_[i]},
                             {"volume", volume_[i]},
                             {"attributes", attrs}});
    }
    j["particles"] = particles;
    // Column slot order per type is part of the state: it fixes iteration order downstream.
    json slots = json::array();
    for (const auto& own : owner_) {
        json s = json::array();
        for (std::size_t i : own) {
            s.push_back(handle_[i]);
        }
        slots.push_back(s);
    }
    j["slots"] = slots;
    j["next_handle"] = next_handle_;
    json links = json::array();
    for (const auto& l : links_) {
        links.push_back({{"id", l.id},
                         {"origin", static_cast<int>(l.origin)},
                         {"rule", l.rule},
                         {"spec", l.spec},
                         {"a", l.a},
                         {"b", l.b},
                         {"plane", l.plane},
                         {"anchor", vec_json(l.anchor)},
                         {"site_a", l.site_a},
                         {"site_b", l.site_b},
                         {"rest", l.rest}});
    }
    j["links"] = links;
    j["next_link_id"] = next_link_id_;
    json trig = json::array();
    for (const auto& [rule, h] : triggers) {
        trig.push_back({rule, h});
    }
    j["triggers"] = trig;
    out << j.dump(1) << '\n';
}

SimState SimState::load(std::istream& in)
{
    using nlohmann::json;
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw RuntimeError(std::string("checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "mml-checkpoint") {
        throw RuntimeError("checkpoint: not an mml checkpoint");
    }
    try {
        std::vector<TypeSchema> types;
        for (const auto& t : j.at("types")) {
            TypeSchema s;
            s.name = t.at("name").get<std::string>();
            s.attribute_names = t.at("attributes").get<std::vector<std::string>>();
            s.defaults = t.at("defaults").get<std::vector<double>>();
            s.concentration = t.at("concentration").get<std::vector<bool>>();
            s.mass = t.at("mass").get<double>();
            s.volume = t.at("volume").get<double>();
            types.push_back(std::move(s));
        }
        std::vector<RegionSchema> regions;
        for (const auto& r : j.at("regions")) {
            RegionSchema s;
            s.name = r.at("name").get<std::string>();
            s.offset = r.at("offset").get<std::size_t>();
            s.concentration = r.at("concentration").get<std::vector<bool>>();
            regions.push_back(std::move(s));
        }
        auto C = j.at("C").get<std::vector<double>>();
        SimState st(std::move(types), std::move(regions), C.size());
        st.C = std::move(C);
        st.region_volume = j.at("region_volume").get<std::vector<double>>();
        st.time = j.at("time").get<double>();
        st.step = j.at("step").get<std::uint64_t>();
        st.seed = j.at("seed").get<std::uint64_t>();

        // Rebuild dense arrays in saved order, then restore per-type slot order and handles.
        const auto& parts = j.at("particles");
        const Handle next = j.at("next_handle").get<Handle>();
        st.index_of_.assign(next, kDead);
        st.next_handle_ = next;
        for (const auto& p : parts) {
            if (st.pos_.size() == st.capacity_) {
                st.grow();
            }
            const int t = p.at("type").get<int>();
            if (t < 0 || static_cast<std::size_t>(t) >= st.types_.size()) {
                throw RuntimeError("checkpoint: particle type out of range");
            }
            const Handle h = p.at("handle").get<Handle>();
            if (h >= next) {
                throw RuntimeError("checkpoint: handle out of range");
            }
            st.index_of_[h] = static_cast<std::uint32_t>(st.pos_.size());
            st.pos_.push_back(json_vec(p.at("r")));
            st.vel_.push_back(json_vec(p.at("v")));
            st.mass_.push_back(p.at("mass").get<double>());
            st.volume_.push_back(p.at("volume").get<double>());
            st.type_.push_back(t);
            st.group_.push_back(p.at("group").get<int>());
            st.handle_.push_back(h);
            st.slot_.push_back(0);
        }
        const auto& slots = j.at("slots");
        for (std::size_t t = 0; t < st.types_.size(); ++t) {
            for (const auto& hj : slots.at(t)) {
                const std::size_t i = st.index(hj.get<Handle>());
                st.slot_[i] = st.owner_[t].size();
                st.owner_[t].push_back(i);
                const auto& attrs = parts.at(i).at("attributes");
                if (attrs.size() != st.columns_[t].size()) {
                    throw RuntimeError("checkpoint: attribute count mismatch");
                }
                for (std::size_t a = 0; a < attrs.size(); ++a) {
                    st.columns_[t][a].push_back(attrs[a].get<double>());
                }
            }
        }
        for (const auto& lj : j.at("links")) {
            LinkInstance l;
            l.id = lj.at("id").get<std::uint64_t>();
            l.origin = static_cast<LinkOrigin>(lj.at("origin").get<int>());
            l.rule = lj.at("rule").get<int>();
            l.spec = lj.at("spec").get<int>();
            l.a = lj.at("a").get<Handle>();
            l.b = lj.at("b").get<Handle>();
            l.plane = lj.at("plane").get<int>();
            l.anchor = json_vec(lj.at("anchor"));
            l.site_a = lj.at("site_a").get<int>();
            l.site_b = lj.at("site_b").get<int>();
            l.rest = lj.at("rest").get<double>();
            st.link_keys_.emplace(key_of(l), l.id);
            st.links_.push_back(l);
        }
        st.next_link_id_ = j.at("next_link_id").get<std::uint64_t>();
        for (const auto& tj : j.at("triggers")) {
            st.triggers.emplace_back(tj.at(0).get<int>(), tj.at(1).get<Handle>());
        }
        return st;
    } catch (const json::exception& e) {
        throw RuntimeError(std::string("checkpoint: ") + e.what());
    }
}

bool operator==(const SimState& a, const SimState& b)
{
    return a.time == b.time && a.step == b.step && a.seed == b.seed && a.C == b.C &&
           a.region_volume == b.region_volume && a.triggers == b.triggers && a.pos_ == b.pos_ &&
           a.vel_ == b.vel_ && a.mass_ == b.mass_ && a.volume_ == b.volume_ && a.type_ == b.type_ &&
           a.group_ == b.group_ && a.handle_ == b.handle_ && a.slot_ == b.slot_ && a.columns_ == b.columns_ &&
           a.owner_ == b.owner_ && a.index_of_ == b.index_of_ && a.next_handle_ == b.next_handle_ &&
           a.link_keys_ == b.link_keys_ && a.next_link_id_ == b.next_link_id_ &&
           a.links_.size() == b.links_.size() &&
           std::equal(a.links_.begin(), a.links_.end(), b.links_.begin(), [](const auto& x, const auto& y) {
               return x.id == y.id && x.origin == y.origin && x.rule == y.rule && x.spec == y.spec && x.a == y.a &&
                      x.b == y.b && x.plane == y.plane && x.anchor == y.anchor && x.site_a == y.site_a &&
                      x.site_b == y.site_b && x.rest == y.rest;
           });
}

} // namespace mml
