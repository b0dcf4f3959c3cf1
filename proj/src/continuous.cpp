#include "mml/continuous.hpp"

#include "mml/fields.hpp"
#include "mml/ir.hpp"
#include "mml/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mml {

namespace {

bool in(const std::vector<int>& groups, int g) { return std::find(groups.begin(), groups.end(), g) != groups.end(); }

bool all_finite(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

std::vector<double> ContinuousEngine::StepRecord::at(double theta) const
{
    const double t = theta, t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    std::vector<double> y(y0.size());
    for (std::size_t k = 0; k < y.size(); ++k)
        y[k] = h00 * y0[k] + h10 * dt * f0[k] + h01 * y1[k] + h11 * dt * f1[k];
    return y;
}

ContinuousEngine::ContinuousEngine(const CompiledModel& model, DiagnosticLog* log) : model_(&model), log_(log)
{
    column_of_.resize(model.particle_types.size());
    for (std::size_t t = 0; t < model.particle_types.size(); ++t) {
        const auto& attrs = model.particle_types[t].attributes;
        column_of_[t].assign(attrs.size(), -1);
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            if (!attrs[a].continuous())
                continue;
            column_of_[t][a] = static_cast<int>(columns_.size());
            columns_.push_back({static_cast<int>(t), static_cast<int>(a)});
        }
    }
    double cutoff = 0.0;
    for (const auto& f : model.fluxes)
        cutoff = std::max(cutoff, f.cutoff);
    if (cutoff > 0.0)
        flux_index_.configure(cutoff, 0.3 * cutoff);
    flux_pairs_.resize(model.fluxes.size());
}

bool ContinuousEngine::idle() const
{
    if (!model_->fluxes.empty())
        return false;
    for (const auto& n : model_->networks)
        if (n.cols() > 0)
            return false;
    return true;
}

std::vector<std::size_t> ContinuousEngine::bases(const SimState& state) const
{
    std::vector<std::size_t> b(columns_.size());
    std::size_t at = state.C.size();
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        b[c] = at;
        at += state.members(columns_[c].type).size();
    }
    return b;
}

std::vector<double> ContinuousEngine::gather(const SimState& state) const
{
    std::vector<double> y = state.C;
    for (const auto& c : columns_) {
        const auto n = state.members(c.type).size();
        const auto& col = state.column(c.type, c.attr);
        y.insert(y.end(), col.begin(), col.begin() + static_cast<long>(n));
    }
    return y;
}

void ContinuousEngine::scatter(const std::vector<double>& y, SimState& state) const
{
    std::copy(y.begin(), y.begin() + static_cast<long>(state.C.size()), state.C.begin());
    std::size_t at = state.C.size();
    for (const auto& c : columns_) {
        const auto n = state.members(c.type).size();
        auto& col = state.column(c.type, c.attr);
        std::copy(y.begin() + static_cast<long>(at), y.begin() + static_cast<long>(at + n), col.begin());
        at += n;
    }
}

long ContinuousEngine::offset_of(const SimState& state, std::size_t i, int a) const
{
    const int c = column_of_[static_cast<std::size_t>(state.type(i))][static_cast<std::size_t>(a)];
    if (c < 0)
        return -1;
    return static_cast<long>(bases(state)[static_cast<std::size_t>(c)] + state.slot(i));
}

void ContinuousEngine::prepare(const SimState& state)
{
    if (model_->fluxes.empty())
        return;
    flux_index_.update(state.positions(), state.generation());
    ir::EvalContext ctx;
    ctx.state = &state;
    for (std::size_t r = 0; r < model_->fluxes.size(); ++r) {
        const FluxRule& f = model_->fluxes[r];
        auto& out = flux_pairs_[r];
        out.clear();
        auto accept = [&](std::size_t a, std::size_t b) {
            ctx.roles[0] = {ir::Role::Kind::Particle, a, state.pos(a), {}};
            ctx.roles[1] = {ir::Role::Kind::Particle, b, state.pos(b), {}};
            return f.when.empty() || ir::evaluate(f.when, ctx) != 0.0;
        };
        flux_index_.for_each_pair(state.positions(), f.cutoff, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) {
            const bool is = in(f.source_groups, state.group(i)), it = in(f.sink_groups, state.group(i));
            const bool js = in(f.source_groups, state.group(j)), jt = in(f.sink_groups, state.group(j));
            if (f.symmetric) {
                if (!(is && jt))
                    return;
                std::uint32_t a = i, b = j;
                if (state.handle(b) < state.handle(a))
                    std::swap(a, b);
                if (accept(a, b))
                    out.push_back({a, b});
                return;
            }
            if (is && jt && accept(i, j))
                out.push_back({i, j});
            if (js && it && accept(j, i))
                out.push_back({j, i});
        });
    }
}

std::vector<double> ContinuousEngine::eval_rhs(const SimState& state, FieldEngine* fields) const
{
    ++evaluations_;
    if (fields && fields->size() > 0)
        fields->bind(state);
    const auto base = bases(state);
    std::vector<double> dy(base.empty() ? state.C.size() : base.back() + state.members(columns_.back().type).size(), 0.0);
    ir::RandomStream random{rng::hash(state.seed, rng::Stream::BodyRandom, state.step), 0};
    ir::EvalContext ctx;
    ctx.state = &state;
    ctx.fields = fields;
    ctx.random = &random;

    auto particle_slot = [&](std::size_t i, int a) {
        return base[static_cast<std::size_t>(column_of_[static_cast<std::size_t>(state.type(i))][static_cast<std::size_t>(a)])] +
               state.slot(i);
    };
    auto check = [&](double v, const std::string& what) {
        if (!std::isfinite(v))
            throw RuntimeError("rate of '" + what + "' is not finite at t=" + std::to_string(state.time));
    };

    for (const auto& net : model_->networks) {
        for (std::size_t j = 0; j < net.cols(); ++j) {
            for (const auto& b : net.bindings[j]) {
                if (b.host.region) {
                    const auto& inst = model_->regions[static_cast<std::size_t>(b.host.id)];
                    ctx.roles[0] = {ir::Role::Kind::Region, static_cast<std::size_t>(b.host.id), inst.origin, {}};
                    if (!b.predicate.empty() && ir::evaluate(b.predicate, ctx) == 0.0)
                        continue;
                    const double rate = ir::evaluate(b.rate, ctx);
                    check(rate, net.process_names[j]);
                    for (std::size_t r = 0; r < net.rows(); ++r)
                        if (net.stoich[r][j] != 0)
                            dy[inst.value_offset + static_cast<std::size_t>(net.species[r])] += net.stoich[r][j] * rate;
                    continue;
                }
                for (std::size_t i : state.members(net.type)) {
                    if (state.group(i) != b.host.id)
                        continue;
                    ctx.roles[0] = {ir::Role::Kind::Particle, i, state.pos(i), {}};
                    if (!b.predicate.empty() && ir::evaluate(b.predicate, ctx) == 0.0)
                        continue;
                    const double rate = ir::evaluate(b.rate, ctx);
                    check(rate, net.process_names[j]);
                    for (std::size_t r = 0; r < net.rows(); ++r)
                        if (net.stoich[r][j] != 0)
                            dy[particle_slot(i, net.species[r])] += net.stoich[r][j] * rate;
                }
            }
        }
    }

    for (std::size_t r = 0; r < model_->fluxes.size(); ++r) {
        const FluxRule& f = model_->fluxes[r];
        auto scale = [&](std::size_t i, int a) {
            const auto& def = model_->particle_types[static_cast<std::size_t>(state.type(i))].attributes[static_cast<std::size_t>(a)];
            const double v = state.volume(i);
            return def.kind == AttrKind::Conc && v > 0.0 ? 1.0 / v : 1.0;
        };
        for (const auto& p : flux_pairs_[r]) {
            ctx.roles[0] = {ir::Role::Kind::Particle, p.a, state.pos(p.a), {}};
            ctx.roles[1] = {ir::Role::Kind::Particle, p.b, state.pos(p.b), {}};
            const double rate = ir::evaluate(f.rate, ctx);
            check(rate, f.name);
            const int aa = f.attr_by_type.at(state.type(p.a));
            const int ab = f.attr_by_type.at(state.type(p.b));
            const auto& ta = model_->particle_types[static_cast<std::size_t>(state.type(p.a))].attributes[static_cast<std::size_t>(aa)];
            const auto& tb = model_->particle_types[static_cast<std::size_t>(state.type(p.b))].attributes[static_cast<std::size_t>(ab)];
            if (!ta.is_const)
                dy[particle_slot(p.a, aa)] -= rate * scale(p.a, aa);
            if (!tb.is_const)
                dy[particle_slot(p.b, ab)] += rate * scale(p.b, ab);
        }
    }
    return dy;
}

void ContinuousEngine::step(SimState& state, FieldEngine* fields, double dt)
{
    prepare(state);
    const std::vector<double> y0 = gather(state);
    auto at = [&](const std::vector<double>& k, double h) {
        std::vector<double> y(y0.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = y0[i] + h * k[i];
        return y;
    };
    std::vector<double> y1;
    std::vector<double> k1;
    try {
        k1 = eval_rhs(state, fields);
        scatter(at(k1, 0.5 * dt), state);
        const auto k2 = eval_rhs(state, fields);
        scatter(at(k2, 0.5 * dt), state);
        const auto k3 = eval_rhs(state, fields);
        scatter(at(k3, dt), state);
        const auto k4 = eval_rhs(state, fields);
        y1.resize(y0.size());
        for (std::size_t i = 0; i < y1.size(); ++i)
            y1[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    } catch (...) {
        scatter(y0, state);
        throw;
    }
    if (!all_finite(y1)) {
        scatter(y0, state);
        throw RuntimeError("continuous state became non-finite at t=" + std::to_string(state.time));
    }
    scatter(y1, state);
    last_.dt = dt;
    last_.y0 = y0;
    last_.f0 = std::move(k1);
    last_.y1 = std::move(y1);
    have_f1_ = false;
    check_negative(state, last_.y1);
}

const ContinuousEngine::StepRecord& ContinuousEngine::record(SimState& state, FieldEngine* fields)
{
    if (!have_f1_) {
        last_.f1 = last_.y1.empty() ? std::vector<double>{} : eval_rhs(state, fields);
        have_f1_ = true;
    }
    return last_;
}

void ContinuousEngine::check_negative(const SimState& state, const std::vector<double>& y)
{
    if (!log_)
        return;
    auto consumers = [&](bool region, int type, int attr) {
        std::string names;
        for (const auto& net : model_->networks) {
            if (net.region_host != region || net.type != type)
                continue;
            for (std::size_t r = 0; r < net.rows(); ++r) {
                if (net.species[r] != attr)
                    continue;
                for (std::size_t j = 0; j < net.cols(); ++j)
                    if (net.stoich[r][j] < 0)
                        names += (names.empty() ? "" : ", ") + net.process_names[j];
            }
        }
        if (!region)
            for (const auto& f : model_->fluxes)
                if (f.attr_by_type.count(type) && f.attr_by_type.at(type) == attr)
                    names += (names.empty() ? "" : ", ") + f.name;
        return names.empty() ? std::string("no process") : names;
    };
    auto report = [&](const std::string& what, double v, const std::string& procs) {
        if (!warned_.insert(what).second)
            return;
        log_->warn_at(state.time, "concentration " + what + " fell to " + std::to_string(v) + "; consumed by " + procs);
    };
    for (const auto& inst : model_->regions) {
        const auto& t = model_->region_types[static_cast<std::size_t>(inst.type)];
        for (std::size_t a = 0; a < t.attributes.size(); ++a) {
            if (t.attributes[a].kind != AttrKind::Conc)
                continue;
            const double v = y[inst.value_offset + a];
            if (v < -1e-9)
                report((inst.path.empty() ? "" : inst.path + ".") + t.attributes[a].name, v,
                       consumers(true, inst.type, static_cast<int>(a)));
        }
    }
    std::size_t at = state.C.size();
    for (const auto& c : columns_) {
        const auto& def = model_->particle_types[static_cast<std::size_t>(c.type)].attributes[static_cast<std::size_t>(c.attr)];
        const auto n = state.members(c.type).size();
        if (def.kind == AttrKind::Conc)
            for (std::size_t k = 0; k < n; ++k)
                if (y[at + k] < -1e-9) {
                    report(model_->particle_types[static_cast<std::size_t>(c.type)].name + "." + def.name, y[at + k],
                           consumers(false, c.type, c.attr));
                    break;
                }
        at += n;
    }
}

ParticleIntegrator::ParticleIntegrator(const CompiledModel& model, ForceEngine& forces, DiagnosticLog* log)
    : model_(&model), engine_(&forces), log_(log)
{
}

void ParticleIntegrator::reflect(SimState& state) const
{
    const Domain& d = model_->domain;
    if (!d.bounded)
        return;
    for (std::size_t i = 0; i < state.count(); ++i) {
        Vec3& r = state.pos(i);
        Vec3& v = state.vel(i);
        for (int k = 0; k < 3; ++k) {
            const double lo = d.lower[k], hi = d.upper[k];
            for (int pass = 0; pass < 4 && (r[k] < lo || r[k] > hi); ++pass) {
                if (r[k] < lo)
                    r[k] = 2.0 * lo - r[k];
                else
                    r[k] = 2.0 * hi - r[k];
                v[k] = -v[k];
            }
            r[k] = std::clamp(r[k], lo, hi);
        }
    }
}

void ParticleIntegrator::step(SimState& state, NeighborIndex& index, FieldEngine* fields, double dt)
{
    const std::size_t n = state.count();
    if (n == 0)
        return;
    const std::vector<Vec3> r0(state.positions());
    std::vector<Vec3> v0(n);
    for (std::size_t i = 0; i < n; ++i)
        v0[i] = state.vel(i);
    // Noise is keyed by time level so the closing kick and the next opening kick share a draw.
    const std::uint64_t key = state.step;

    index.update(state.positions(), state.generation());
    engine_->compute(state, index, fields, dt, key, forces_);
    for (std::size_t i = 0; i < n; ++i) {
        state.vel(i) += (0.5 * dt / state.mass(i)) * forces_[i];
        state.pos(i) += dt * state.vel(i);
    }
    reflect(state);
    index.update(state.positions(), state.generation());
    if (fields && fields->size() > 0)
        fields->bind(state);
    engine_->compute(state, index, fields, dt, key + 1, forces_);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
        state.vel(i) += (0.5 * dt / state.mass(i)) * forces_[i];
        ok = ok && finite(state.pos(i)) && finite(state.vel(i));
    }
    if (!ok) {
        for (std::size_t i = 0; i < n; ++i) {
            state.pos(i) = r0[i];
            state.vel(i) = v0[i];
        }
        index.update(state.positions(), state.generation());
        throw RuntimeError("particle state became non-finite at t=" + std::to_string(state.time));
    }
}

} // namespace mml
