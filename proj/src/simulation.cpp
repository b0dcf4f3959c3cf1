#include "mml/simulation.hpp"

#include "mml/geometry.hpp"
#include "mml/pattern.hpp"
#include "mml/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace mml {

namespace {

int depth_of(const CompiledModel& m, int region)
{
    int d = 0;
    for (int r = region; r > 0; r = m.regions[static_cast<std::size_t>(r)].parent)
        ++d;
    return d;
}

double surface_radius(const CompiledModel& m, int region)
{
    const auto& rt = m.region_types[static_cast<std::size_t>(m.regions[static_cast<std::size_t>(region)].type)];
    return rt.surface ? rt.surface->radius : 0.0;
}

void warn(DiagnosticLog* log, const std::string& msg)
{
    if (log)
        log->warn(msg);
}

} // namespace

std::vector<SurfaceBag> surface_bags(const CompiledModel& model, const SimState& state)
{
    std::vector<SurfaceBag> bags;
    for (std::size_t r = 0; r < model.regions.size(); ++r) {
        const auto& inst = model.regions[r];
        const auto& rt = model.region_types[static_cast<std::size_t>(inst.type)];
        if (!rt.surface || inst.surface_group < 0)
            continue;
        const SurfaceMesh mesh = make_icosphere(rt.surface->radius, rt.surface->resolution, inst.origin);
        SurfaceBag bag;
        bag.region = static_cast<int>(r);
        bag.faces = mesh.faces;
        bag.rest_volume = mesh_volume(mesh);
        bag.stiffness = rt.volume_stiffness;
        for (std::size_t i = 0; i < state.count(); ++i)
            if (state.group(i) == inst.surface_group)
                bag.vertices.push_back(state.handle(i));
        std::sort(bag.vertices.begin(), bag.vertices.end());
        if (bag.vertices.size() != mesh.vertices.size())
            throw RuntimeError("surface of '" + inst.path + "' lost vertices; its mesh cannot be rebuilt");
        bags.push_back(std::move(bag));
    }
    return bags;
}

std::vector<SurfaceBag> instantiate(const CompiledModel& model, SimState& state, DiagnosticLog* log)
{
    const Domain& dom = model.domain;
    if (!state.region_volume.empty()) {
        if (dom.bounded) {
            const Vec3 e = dom.upper - dom.lower;
            state.region_volume[0] = e.x * e.y * e.z;
        }
        for (std::size_t r = 1; r < model.regions.size(); ++r)
            state.region_volume[r] = model.region_types[static_cast<std::size_t>(model.regions[r].type)].volume;
    }

    auto overrides_of = [](const Group& g) {
        std::vector<std::pair<int, double>> o(g.initial_overrides.begin(), g.initial_overrides.end());
        return o;
    };

    // Surfaces, with Hookean links along mesh edges.
    for (std::size_t r = 0; r < model.regions.size(); ++r) {
        const auto& inst = model.regions[r];
        const auto& rt = model.region_types[static_cast<std::size_t>(inst.type)];
        if (!rt.surface || inst.surface_group < 0)
            continue;
        const auto& g = model.groups[static_cast<std::size_t>(inst.surface_group)];
        const SurfaceMesh mesh = make_icosphere(rt.surface->radius, rt.surface->resolution, inst.origin);
        std::vector<Handle> h;
        for (const Vec3& p : mesh.vertices)
            h.push_back(state.create_particle(g.type, p, g.velocity, overrides_of(g), inst.surface_group));
        for (const auto& [a, b] : mesh.edges()) {
            LinkInstance l;
            l.origin = LinkOrigin::Static;
            l.rule = static_cast<int>(r);
            l.spec = rt.surface->edge_spec;
            l.a = h[static_cast<std::size_t>(a)];
            l.b = h[static_cast<std::size_t>(b)];
            l.rest = norm(mesh.vertices[static_cast<std::size_t>(a)] - mesh.vertices[static_cast<std::size_t>(b)]);
            state.add_link(l);
        }
        state.region_volume[r] = mesh_volume(mesh);
    }

    // Single particles.
    for (std::size_t gi = 0; gi < model.groups.size(); ++gi) {
        const Group& g = model.groups[gi];
        if (g.source != GroupSource::Single)
            continue;
        const Handle h = state.create_particle(g.type, g.position, g.velocity, overrides_of(g), static_cast<int>(gi));
        if (g.mass)
            state.mass(state.index(h)) = *g.mass;
    }

    // Fills, innermost region first so outer fills see inner surfaces as obstacles.
    std::vector<FillPlan> fills = model.fills;
    std::stable_sort(fills.begin(), fills.end(), [&](const FillPlan& a, const FillPlan& b) {
        return depth_of(model, a.region) > depth_of(model, b.region);
    });
    for (const FillPlan& f : fills) {
        const Group& g = model.groups[static_cast<std::size_t>(f.group)];
        const auto& pt = model.particle_types[static_cast<std::size_t>(g.type)];
        if (!(pt.radius > 0.0)) {
            warn(log, "fill of '" + g.path + "' skipped: particle type '" + pt.name + "' has no radius");
            continue;
        }
        std::vector<Obstacle> obstacles;
        for (std::size_t r = 1; r < model.regions.size(); ++r)
            if (model.regions[r].parent == f.region && surface_radius(model, static_cast<int>(r)) > 0.0)
                obstacles.push_back({model.regions[r].origin, surface_radius(model, static_cast<int>(r))});
        for (std::size_t gi = 0; gi < model.groups.size(); ++gi) {
            const Group& s = model.groups[gi];
            if (s.source == GroupSource::Single && s.region == f.region)
                obstacles.push_back({s.position, model.particle_types[static_cast<std::size_t>(s.type)].radius});
        }
        std::vector<Vec3> sites;
        if (f.region == 0) {
            if (!dom.bounded)
                throw RuntimeError("fill of '" + g.path + "' needs a bounded domain; declare BoundingPlanes");
            sites = fill_box(dom.lower, dom.upper, pt.radius, obstacles);
        } else {
            const double R = surface_radius(model, f.region);
            if (!(R > 0.0)) {
                warn(log, "fill of '" + g.path + "' skipped: region has no closed surface");
                continue;
            }
            sites = fill_sphere(model.regions[static_cast<std::size_t>(f.region)].origin, R, pt.radius, obstacles);
        }
        if (sites.empty())
            warn(log, "fill of '" + g.path + "' placed no particles: region too small for radius " +
                          std::to_string(pt.radius));
        for (const Vec3& p : sites) {
            const Handle h = state.create_particle(g.type, p, g.velocity, overrides_of(g), f.group);
            if (g.mass)
                state.mass(state.index(h)) = *g.mass;
        }
    }

    // Explicit links join every matching pair once.
    for (std::size_t r = 0; r < model.link_rules.size(); ++r) {
        const LinkRule& rule = model.link_rules[r];
        if (rule.mode != LinkRule::Mode::Explicit)
            continue;
        const auto& spec = model.link_specs[static_cast<std::size_t>(rule.spec)];
        for (std::size_t i = 0; i < state.count(); ++i) {
            if (!matches(rule.a, state, i))
                continue;
            for (std::size_t j = 0; j < state.count(); ++j) {
                if (i == j || !matches(rule.b, state, j))
                    continue;
                LinkInstance l;
                l.origin = LinkOrigin::Rule;
                l.rule = static_cast<int>(r);
                l.spec = rule.spec;
                l.a = state.handle(i);
                l.b = state.handle(j);
                if (spec.kind == LinkSpec::Kind::Hookean)
                    l.rest = norm(state.pos(i) - state.pos(j));
                state.add_link(l);
            }
        }
    }

    // Thermal velocities for DPD particles at rest.
    for (std::size_t i = 0; i < state.count(); ++i) {
        const auto& pt = model.particle_types[static_cast<std::size_t>(state.type(i))];
        if (!pt.dpd || !(pt.dpd->kT > 0.0) || !(state.vel(i) == Vec3{}))
            continue;
        const double s = std::sqrt(pt.dpd->kT / state.mass(i));
        const Handle h = state.handle(i);
        state.vel(i) = {s * rng::normal(rng::hash(state.seed, rng::Stream::Velocity, h, 0)),
                        s * rng::normal(rng::hash(state.seed, rng::Stream::Velocity, h, 1)),
                        s * rng::normal(rng::hash(state.seed, rng::Stream::Velocity, h, 2))};
    }

    return surface_bags(model, state);
}

Simulation::Simulation(const CompiledModel& model, std::uint64_t seed, DiagnosticLog* log)
    : model_(&model), log_(log), state_(SimState::from_model(model)), fields_(model), forces_(model, log),
      continuous_(model, log), discrete_(model, log), integrator_(model, forces_, log)
{
    state_.seed = seed;
    forces_.set_surfaces(instantiate(model, state_, log));
    fields_.calibrate(state_);
    setup();
}

Simulation::Simulation(const CompiledModel& model, std::istream& checkpoint, DiagnosticLog* log)
    : model_(&model), log_(log), fields_(model), forces_(model, log), continuous_(model, log), discrete_(model, log),
      integrator_(model, forces_, log)
{
    nlohmann::json j;
    try {
        checkpoint >> j;
    } catch (const nlohmann::json::exception& e) {
        throw RuntimeError(std::string("unreadable checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "mml-run")
        throw RuntimeError("not a run checkpoint");
    std::istringstream s(j.at("state").dump());
    state_ = SimState::load(s);
    const auto h = j.at("smoothing").get<std::vector<double>>();
    if (h.size() != fields_.size() || state_.C.size() != model.region_value_count() ||
        state_.type_count() != model.particle_types.size())
        throw RuntimeError("checkpoint does not match the model");
    for (std::size_t f = 0; f < h.size(); ++f)
        fields_.set_smoothing(f, h[f]);
    const auto off = j.at("disabled").get<std::vector<std::size_t>>();
    for (std::size_t r : off)
        if (r < model.discrete.size())
            discrete_.set_disabled(r, true);
    forces_.set_surfaces(surface_bags(model, state_));
    fields_.bind(state_);
    setup();
}

void Simulation::setup()
{
    const double cutoff = forces_.max_cutoff();
    if (cutoff > 0.0)
        index_.configure(cutoff, 0.3 * cutoff);
    else
        index_.configure(1e-6, 0.0);
}

void Simulation::save_checkpoint(std::ostream& out) const
{
    std::ostringstream s;
    state_.save(s);
    nlohmann::json j;
    j["format"] = "mml-run";
    j["state"] = nlohmann::json::parse(s.str());
    std::vector<double> h;
    for (std::size_t f = 0; f < fields_.size(); ++f)
        h.push_back(fields_.smoothing(f));
    j["smoothing"] = h;
    std::vector<std::size_t> off;
    for (std::size_t r = 0; r < model_->discrete.size(); ++r)
        if (discrete_.disabled(r))
            off.push_back(r);
    j["disabled"] = off;
    out << j.dump() << '\n';
}

void Simulation::update_region_volumes()
{
    for (const auto& bag : forces_.surfaces()) {
        std::vector<Vec3> v;
        v.reserve(bag.vertices.size());
        for (Handle h : bag.vertices)
            v.push_back(state_.pos(state_.index(h)));
        double volume = 0.0;
        try {
            volume = mesh_volume(v, bag.faces);
        } catch (const RuntimeError&) {
            if (log_)
                log_->warn_at(state_.time, "surface of '" + model_->regions[static_cast<std::size_t>(bag.region)].path +
                                               "' is degenerate; region volume held");
            continue;
        }
        state_.rescale_region(bag.region, volume);
    }
}

void Simulation::step(double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw RuntimeError("time step must be positive");
    FieldEngine* f = field_ptr();
    if (f)
        f->bind(state_);
    discrete_.step(state_, f);

    if (!continuous_.idle()) {
        continuous_.step(state_, f, dt);
        discrete_.arm_triggers(state_, continuous_, f);
    }

    if (f)
        f->bind(state_);
    integrator_.step(state_, index_, f, dt);
    update_region_volumes();

    ++state_.step;
    state_.time = static_cast<double>(state_.step) * dt;
}

} // namespace mml
