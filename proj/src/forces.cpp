#include "mml/forces.hpp"

#include "mml/fields.hpp"
#include "mml/ir.hpp"
#include "mml/parallel.hpp"
#include "mml/pattern.hpp"
#include "mml/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mml {

double dpd_weight(double r, double rc) { return r < rc ? 1.0 - r / rc : 0.0; }

Vec3 conservative_force(const Vec3& rij, double a, double rc)
{
    const double r = norm(rij);
    if (r >= rc || r == 0.0)
        return {};
    return (a * dpd_weight(r, rc) / r) * rij;
}

Vec3 dissipative_force(const Vec3& rij, const Vec3& vij, double gamma, double rc)
{
    const double r = norm(rij);
    if (r >= rc || r == 0.0)
        return {};
    const Vec3 e = rij / r;
    const double w = dpd_weight(r, rc);
    return (-gamma * w * w * dot(e, vij)) * e;
}

Vec3 random_force(const Vec3& rij, double sigma, double rc, double xi, double dt)
{
    const double r = norm(rij);
    if (r >= rc || r == 0.0)
        return {};
    return (sigma * dpd_weight(r, rc) * xi / std::sqrt(dt) / r) * rij;
}

ForceEngine::ForceEngine(const CompiledModel& model, DiagnosticLog* log) : model_(&model), log_(log)
{
    for (const auto& row : model.pair_params)
        for (const auto& p : row)
            if (p)
                max_cutoff_ = std::max(max_cutoff_, p->cutoff);
    for (const auto& rule : model.link_rules)
        if (rule.mode == LinkRule::Mode::NonBonded && rule.b.plane < 0)
            max_cutoff_ = std::max(max_cutoff_, rule.cutoff);
}

void ForceEngine::compute(const SimState& state, const NeighborIndex& index, const FieldEngine* fields, double dt,
                          std::uint64_t noise_key, std::vector<Vec3>& forces) const
{
    forces.assign(state.count(), Vec3{});
    if (terms.links)
        add_links(state, fields, forces);
    if (terms.conservative || terms.dissipative || terms.random)
        add_pairs(state, index, dt, noise_key, forces);
    if (terms.links)
        add_nonbonded(state, index, fields, forces);
    if (terms.external)
        for (std::size_t i = 0; i < state.count(); ++i)
            forces[i] += model_->particle_types[static_cast<std::size_t>(state.type(i))].external_force;
    if (terms.volume)
        add_volume(state, forces);
}

double ForceEngine::link_scalar(const SimState& state, std::size_t k, const FieldEngine* fields, Vec3& direction,
                                double& distance) const
{
    const LinkInstance& l = state.links()[k];
    const std::size_t ia = state.index(l.a);
    ir::EvalContext ctx;
    ctx.state = &state;
    ctx.fields = fields;
    ctx.roles[0] = {ir::Role::Kind::Particle, ia, state.pos(ia), {}};
    Vec3 target;
    if (l.b == kNoHandle) {
        ctx.roles[1] = {ir::Role::Kind::Point, 0, l.anchor, {}};
        target = l.anchor;
    } else {
        const std::size_t ib = state.index(l.b);
        ctx.roles[1] = {ir::Role::Kind::Particle, ib, state.pos(ib), {}};
        target = state.pos(ib);
    }
    const Vec3 d = target - state.pos(ia);
    distance = norm(d);
    direction = distance > 0.0 ? d / distance : Vec3{};
    const LinkSpec& spec = model_->link_specs[static_cast<std::size_t>(l.spec)];
    if (spec.kind == LinkSpec::Kind::Hookean)
        return spec.stiffness * (distance - l.rest);
    return ir::evaluate(spec.force, ctx);
}

void ForceEngine::add_links(const SimState& state, const FieldEngine* fields, std::vector<Vec3>& forces) const
{
    for (std::size_t k = 0; k < state.links().size(); ++k) {
        Vec3 dir;
        double dist = 0.0;
        const double f = link_scalar(state, k, fields, dir, dist);
        const LinkInstance& l = state.links()[k];
        if (!std::isfinite(f))
            throw RuntimeError("link force '" + model_->link_specs[static_cast<std::size_t>(l.spec)].name +
                               "' is not finite between particles " + std::to_string(l.a) + " and " +
                               std::to_string(l.b));
        if (dist == 0.0) {
            if (f != 0.0 && log_)
                log_->warn_at(state.time, "link between coincident endpoints (particle " + std::to_string(l.a) +
                                              "); force set to zero");
            continue;
        }
        forces[state.index(l.a)] += f * dir;
        if (l.b != kNoHandle)
            forces[state.index(l.b)] -= f * dir;
    }
}

void ForceEngine::add_pairs(const SimState& state, const NeighborIndex& index, double dt, std::uint64_t noise_key,
                            std::vector<Vec3>& forces) const
{
    if (max_cutoff_ <= 0.0 || model_->pair_params.empty())
        return;
    const auto& cand = index.candidates();
    std::vector<Vec3> pair_force(cand.size());
    const auto& pos = state.positions();
    parallel_for(cand.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const auto [i, j] = cand[k];
            const auto& p = model_->pair_params[static_cast<std::size_t>(state.type(i))]
                                               [static_cast<std::size_t>(state.type(j))];
            if (!p)
                continue;
            const Vec3 rij = pos[i] - pos[j];
            const double r = norm(rij);
            if (r >= p->cutoff || r == 0.0)
                continue;
            const Vec3 e = rij / r;
            const double w = 1.0 - r / p->cutoff;
            double scalar = 0.0;
            if (terms.conservative)
                scalar += p->a * w;
            if (terms.dissipative)
                scalar -= p->gamma * w * w * dot(e, state.vel(i) - state.vel(j));
            if (terms.random && p->gamma > 0.0 && p->kT > 0.0) {
                const Handle hi = state.handle(i), hj = state.handle(j);
                const double xi =
                    rng::normal(rng::hash(state.seed, rng::Stream::PairNoise, noise_key, std::min(hi, hj), std::max(hi, hj)));
                scalar += p->sigma() * w * xi / std::sqrt(dt);
            }
            pair_force[k] = scalar * e;
        }
    });
    for (std::size_t k = 0; k < cand.size(); ++k) {
        const Vec3& f = pair_force[k];
        if (f.x == 0.0 && f.y == 0.0 && f.z == 0.0)
            continue;
        forces[cand[k].first] += pair_force[k];
        forces[cand[k].second] -= pair_force[k];
    }
}

void ForceEngine::add_nonbonded(const SimState& state, const NeighborIndex& index, const FieldEngine* fields,
                                std::vector<Vec3>& forces) const
{
    for (const auto& rule : model_->link_rules) {
        if (rule.mode != LinkRule::Mode::NonBonded)
            continue;
        const LinkSpec& spec = model_->link_specs[static_cast<std::size_t>(rule.spec)];
        ir::EvalContext ctx;
        ctx.state = &state;
        ctx.fields = fields;
        auto apply = [&](std::size_t ia, const Vec3& target, std::size_t ib, bool plane) {
            const Vec3 d = target - state.pos(ia);
            const double dist = norm(d);
            if (!rule.when.empty() && ir::evaluate(rule.when, ctx) == 0.0)
                return;
            const double f = ir::evaluate(spec.force, ctx);
            if (!std::isfinite(f))
                throw RuntimeError("link force '" + spec.name + "' is not finite");
            if (dist == 0.0)
                return;
            const Vec3 F = (f / dist) * d;
            forces[ia] += F;
            if (!plane)
                forces[ib] -= F;
        };
        if (rule.b.plane >= 0) {
            const Plane& pl = model_->domain.planes[static_cast<std::size_t>(rule.b.plane)];
            for (std::size_t i = 0; i < state.count(); ++i) {
                if (!matches(rule.a, state, i))
                    continue;
                const Vec3 foot = state.pos(i) - dot(state.pos(i) - pl.point, pl.normal) * pl.normal;
                ctx.roles[0] = {ir::Role::Kind::Particle, i, state.pos(i), {}};
                ctx.roles[1] = {ir::Role::Kind::Plane, static_cast<std::size_t>(rule.b.plane), pl.point, pl.normal};
                apply(i, foot, 0, true);
            }
            continue;
        }
        index.for_each_pair(state.positions(), rule.cutoff, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) {
            auto run = [&](std::size_t a, std::size_t b) {
                ctx.roles[0] = {ir::Role::Kind::Particle, a, state.pos(a), {}};
                ctx.roles[1] = {ir::Role::Kind::Particle, b, state.pos(b), {}};
                apply(a, state.pos(b), b, false);
            };
            const bool ab = matches(rule.a, state, i) && matches(rule.b, state, j);
            const bool ba = matches(rule.a, state, j) && matches(rule.b, state, i);
            if (ab)
                run(i, j);
            if (ba && !(rule.symmetric && ab))
                run(j, i);
        });
    }
}

void ForceEngine::add_volume(const SimState& state, std::vector<Vec3>& forces) const
{
    for (const auto& bag : bags_) {
        if (bag.stiffness <= 0.0)
            continue;
        std::vector<Vec3> v;
        v.reserve(bag.vertices.size());
        for (Handle h : bag.vertices)
            v.push_back(state.pos(state.index(h)));
        double volume = 0.0;
        try {
            volume = mesh_volume(v, bag.faces);
        } catch (const RuntimeError& e) {
            if (log_)
                log_->warn_at(state.time, std::string("volume preservation skipped: ") + e.what());
            continue;
        }
        const auto grad = volume_gradient(v, bag.faces);
        const double scale = -bag.stiffness * (volume - bag.rest_volume);
        for (std::size_t k = 0; k < bag.vertices.size(); ++k)
            forces[state.index(bag.vertices[k])] += scale * grad[k];
    }
}

} // namespace mml
