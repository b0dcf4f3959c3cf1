#include "mml/discrete.hpp"

#include "mml/fields.hpp"
#include "mml/ir.hpp"
#include "mml/pattern.hpp"
#include "mml/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace mml {

std::vector<Crossing> detect_crossings(const std::function<double(double)>& g, double t0, double t1, double tol,
                                       int samples)
{
    std::vector<Crossing> out;
    if (samples < 1 || !(t1 > t0))
        return out;
    double ta = t0, ga = g(t0);
    for (int k = 1; k <= samples; ++k) {
        const double tb = t0 + (t1 - t0) * k / samples;
        const double gb = g(tb);
        const bool pa = ga > 0.0, pb = gb > 0.0;
        if (pa != pb) {
            double lo = ta, hi = tb;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                if ((g(mid) > 0.0) == pa)
                    lo = mid;
                else
                    hi = mid;
            }
            out.push_back({0.5 * (lo + hi), pb});
        }
        ta = tb;
        ga = gb;
    }
    return out;
}

namespace {

std::uint64_t tuple_key(const std::vector<Handle>& t)
{
    std::uint64_t k = t.size();
    for (Handle h : t)
        k = rng::mix(k ^ h);
    return k;
}

ir::Role particle_role(const SimState& s, std::size_t i) { return {ir::Role::Kind::Particle, i, s.pos(i), {}}; }

} // namespace

DiscreteEngine::DiscreteEngine(const CompiledModel& model, DiagnosticLog* log)
    : model_(&model), log_(log), stats_(model.discrete.size()), disabled_(model.discrete.size(), false)
{
    double cutoff = 0.0;
    for (const auto& r : model.discrete)
        if (r.patterns.size() == 2)
            cutoff = std::max(cutoff, r.cutoff);
    for (const auto& r : model.link_rules)
        if (r.mode == LinkRule::Mode::Dynamic && r.b.plane < 0)
            cutoff = std::max(cutoff, r.cutoff);
    if (cutoff > 0.0) {
        index_.configure(cutoff, 0.3 * cutoff);
        has_index_ = true;
    }
}

void DiscreteEngine::refresh_index(const SimState& state)
{
    if (has_index_)
        index_.update(state.positions(), state.generation());
}

void DiscreteEngine::update_links(SimState& state, const FieldEngine* fields)
{
    ir::EvalContext ctx;
    ctx.state = &state;
    ctx.fields = fields;
    for (std::size_t k = state.links().size(); k-- > 0;) {
        const LinkInstance& l = state.links()[k];
        const LinkSpec& spec = model_->link_specs[static_cast<std::size_t>(l.spec)];
        if (spec.while_.empty())
            continue;
        ctx.roles[0] = particle_role(state, state.index(l.a));
        ctx.roles[1] = l.b == kNoHandle ? ir::Role{ir::Role::Kind::Point, 0, l.anchor, {}}
                                        : particle_role(state, state.index(l.b));
        if (ir::evaluate(spec.while_, ctx) == 0.0)
            state.remove_link(k);
    }

    refresh_index(state);
    for (std::size_t r = 0; r < model_->link_rules.size(); ++r) {
        const LinkRule& rule = model_->link_rules[r];
        if (rule.mode != LinkRule::Mode::Dynamic)
            continue;
        const LinkSpec& spec = model_->link_specs[static_cast<std::size_t>(rule.spec)];
        const int rid = static_cast<int>(r);
        if (rule.b.plane >= 0) {
            const Plane& pl = model_->domain.planes[static_cast<std::size_t>(rule.b.plane)];
            std::vector<std::pair<Handle, std::size_t>> hits;
            for (std::size_t i = 0; i < state.count(); ++i) {
                if (!matches(rule.a, state, i) || state.has_link(LinkOrigin::Rule, rid, state.handle(i), kNoHandle, rule.b.plane))
                    continue;
                ctx.roles[0] = particle_role(state, i);
                ctx.roles[1] = {ir::Role::Kind::Plane, static_cast<std::size_t>(rule.b.plane), pl.point, pl.normal};
                if (rule.when.empty() || ir::evaluate(rule.when, ctx) != 0.0)
                    hits.emplace_back(state.handle(i), i);
            }
            std::sort(hits.begin(), hits.end());
            for (const auto& [h, i] : hits) {
                LinkInstance l;
                l.origin = LinkOrigin::Rule;
                l.rule = rid;
                l.spec = rule.spec;
                l.a = h;
                l.plane = rule.b.plane;
                l.anchor = state.pos(i) - dot(state.pos(i) - pl.point, pl.normal) * pl.normal;
                l.rest = norm(state.pos(i) - l.anchor);
                state.add_link(l);
            }
            continue;
        }
        std::vector<std::pair<Handle, Handle>> hits;
        auto consider = [&](std::size_t i, std::size_t j) {
            if (!matches(rule.a, state, i) || !matches(rule.b, state, j))
                return;
            Handle ha = state.handle(i), hb = state.handle(j);
            if (rule.symmetric && hb < ha)
                return;
            if (state.has_link(LinkOrigin::Rule, rid, ha, hb))
                return;
            ctx.roles[0] = particle_role(state, i);
            ctx.roles[1] = particle_role(state, j);
            if (rule.when.empty() || ir::evaluate(rule.when, ctx) != 0.0)
                hits.emplace_back(ha, hb);
        };
        if (rule.cutoff > 0.0 && has_index_) {
            index_.for_each_pair(state.positions(), rule.cutoff, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) {
                consider(i, j);
                consider(j, i);
            });
        } else {
            for (std::size_t i = 0; i < state.count(); ++i)
                for (std::size_t j = 0; j < state.count(); ++j)
                    if (i != j)
                        consider(i, j);
        }
        std::sort(hits.begin(), hits.end());
        hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
        for (const auto& [ha, hb] : hits) {
            LinkInstance l;
            l.origin = LinkOrigin::Rule;
            l.rule = rid;
            l.spec = rule.spec;
            l.a = ha;
            l.b = hb;
            if (spec.kind == LinkSpec::Kind::Hookean)
                l.rest = norm(state.pos(state.index(ha)) - state.pos(state.index(hb)));
            state.add_link(l);
        }
    }
}

bool DiscreteEngine::accept(const SimState& state, const DiscreteRule& rule, const std::vector<std::size_t>& idx,
                            const FieldEngine* fields) const
{
    if (rule.when.empty())
        return true;
    ir::EvalContext ctx;
    ctx.state = &state;
    ctx.fields = fields;
    for (std::size_t k = 0; k < idx.size() && k < ctx.roles.size(); ++k)
        ctx.roles[k] = particle_role(state, idx[k]);
    return ir::evaluate(rule.when, ctx) != 0.0;
}

std::vector<std::vector<Handle>> DiscreteEngine::match(const SimState& state, std::size_t r, const FieldEngine* fields)
{
    const DiscreteRule& rule = model_->discrete[r];
    std::vector<std::vector<Handle>> out;
    const std::size_t n = rule.patterns.size();
    if (n == 0)
        return out;
    std::vector<std::vector<std::size_t>> lists(n);
    for (std::size_t i = 0; i < state.count(); ++i)
        for (std::size_t k = 0; k < n; ++k)
            if (matches(rule.patterns[k], state, i))
                lists[k].push_back(i);

    if (n == 1) {
        std::set<Handle> armed;
        for (const auto& [rr, h] : state.triggers)
            if (static_cast<std::size_t>(rr) == r)
                armed.insert(h);
        for (std::size_t i : lists[0])
            if (armed.count(state.handle(i)) || accept(state, rule, {i}, fields))
                out.push_back({state.handle(i)});
    } else if (n == 2) {
        auto consider = [&](std::size_t i, std::size_t j) {
            if (!matches(rule.patterns[0], state, i) || !matches(rule.patterns[1], state, j))
                return;
            if (rule.symmetric && state.handle(j) < state.handle(i))
                return;
            if (accept(state, rule, {i, j}, fields))
                out.push_back({state.handle(i), state.handle(j)});
        };
        if (rule.cutoff > 0.0 && has_index_) {
            refresh_index(state);
            index_.for_each_pair(state.positions(), rule.cutoff, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) {
                consider(i, j);
                consider(j, i);
            });
        } else {
            for (std::size_t i : lists[0])
                for (std::size_t j : lists[1])
                    if (i != j)
                        consider(i, j);
        }
    } else {
        std::vector<std::size_t> pick;
        std::function<void(std::size_t)> rec = [&](std::size_t k) {
            if (k == n) {
                if (accept(state, rule, pick, fields)) {
                    std::vector<Handle> t;
                    for (std::size_t i : pick)
                        t.push_back(state.handle(i));
                    out.push_back(std::move(t));
                }
                return;
            }
            for (std::size_t i : lists[k]) {
                if (std::find(pick.begin(), pick.end(), i) != pick.end())
                    continue;
                pick.push_back(i);
                rec(k + 1);
                pick.pop_back();
            }
        };
        rec(0);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void DiscreteEngine::fire_all(SimState& state, FieldEngine* fields)
{
    std::map<Handle, std::uint32_t> taken;
    for (std::size_t r = 0; r < model_->discrete.size(); ++r) {
        if (disabled_[r])
            continue;
        const DiscreteRule& rule = model_->discrete[r];
        const auto tuples = match(state, r, fields);
        for (const auto& t : tuples) {
            if (std::any_of(t.begin(), t.end(), [&](Handle h) { return taken.count(h) || !state.alive(h); }))
                continue;
            ++stats_[r].matched;
            const std::uint64_t key = tuple_key(t);
            const std::uint64_t bits = rng::hash(state.seed, rng::Stream::Discrete, state.step, r, key);
            double p = 1.0;
            if (!rule.probability.empty()) {
                ir::RandomStream random{rng::mix(bits), 0};
                ir::EvalContext ctx;
                ctx.state = &state;
                ctx.fields = fields;
                ctx.random = &random;
                for (std::size_t k = 0; k < t.size() && k < ctx.roles.size(); ++k)
                    ctx.roles[k] = particle_role(state, state.index(t[k]));
                p = ir::evaluate(rule.probability, ctx);
            }
            if (!std::isfinite(p)) {
                disabled_[r] = true;
                if (log_)
                    log_->warn_at(state.time, "process '" + rule.name + "' produced a non-finite probability; disabled");
                break;
            }
            if (p < 0.0 || p > 1.0) {
                if (log_ && clamp_warned_.insert(r).second)
                    log_->warn_at(state.time, "process '" + rule.name + "' probability " + std::to_string(p) +
                                                  " outside [0,1]; clamped");
                p = std::clamp(p, 0.0, 1.0);
            }
            if (!(rng::to_unit(bits) < p))
                continue;
            for (Handle h : t)
                max_participation_ = std::max(max_participation_, ++taken[h]);
            fire(state, r, t, fields, key);
            ++stats_[r].fired;
        }
    }
    state.triggers.clear();
}

void DiscreteEngine::fire(SimState& state, std::size_t r, const std::vector<Handle>& tuple, FieldEngine* fields,
                          std::uint64_t key)
{
    const DiscreteRule& rule = model_->discrete[r];
    ir::EvalContext ctx;
    ctx.state = &state;
    ctx.fields = fields;
    ir::RandomStream random{rng::hash(state.seed, rng::Stream::BodyRandom, state.step, r, key), 0};
    ctx.random = &random;
    for (std::size_t k = 0; k < tuple.size() && k < ctx.roles.size(); ++k)
        ctx.roles[k] = particle_role(state, state.index(tuple[k]));

    struct Assign {
        Handle h;
        int attr;
        double value;
    };
    std::vector<Assign> assigns;
    std::vector<const DiscreteOutput*> creates;
    for (const auto& o : rule.outputs) {
        if (o.kind == DiscreteOutput::Kind::Update)
            for (const auto& [a, prog] : o.updates)
                assigns.push_back({tuple[static_cast<std::size_t>(o.role)], a, ir::evaluate(prog, ctx)});
        else if (o.kind == DiscreteOutput::Kind::Create)
            creates.push_back(&o);
    }

    Vec3 centroid, momentum;
    std::size_t n_consumed = 0;
    for (std::size_t k = 0; k < tuple.size(); ++k) {
        if (k < rule.consumed.size() && rule.consumed[k]) {
            const std::size_t i = state.index(tuple[k]);
            centroid += state.pos(i);
            momentum += state.mass(i) * state.vel(i);
            ++n_consumed;
        }
    }
    if (n_consumed > 0) {
        centroid = centroid / static_cast<double>(n_consumed);
    } else {
        for (Handle h : tuple)
            centroid += state.pos(state.index(h));
        centroid = centroid / static_cast<double>(tuple.size());
    }

    for (const auto& a : assigns)
        state.attr(state.index(a.h), a.attr) = a.value;
    for (std::size_t k = 0; k < tuple.size(); ++k)
        if (k < rule.consumed.size() && rule.consumed[k])
            state.destroy_particle(tuple[k]);

    if (!creates.empty()) {
        double total_mass = 0.0, spacing = 0.0;
        for (const auto* o : creates) {
            const auto& pt = model_->particle_types[static_cast<std::size_t>(o->type)];
            total_mass += pt.mass;
            spacing = std::max(spacing, 2.0 * pt.radius);
        }
        const Vec3 v = total_mass > 0.0 ? momentum / total_mass : Vec3{};
        const std::uint64_t dbits = rng::hash(state.seed, rng::Stream::Discrete, state.step, r, rng::mix(key));
        const double cz = 2.0 * rng::to_unit(dbits) - 1.0;
        const double phi = 2.0 * std::numbers::pi * rng::to_unit(rng::mix(dbits));
        const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
        const Vec3 dir{sz * std::cos(phi), sz * std::sin(phi), cz};
        const double mid = 0.5 * static_cast<double>(creates.size() - 1);
        for (std::size_t k = 0; k < creates.size(); ++k) {
            const Vec3 at = centroid + ((static_cast<double>(k) - mid) * spacing) * dir;
            state.create_particle(creates[k]->type, at, v, {}, creates[k]->group);
        }
    }

    for (const auto& o : rule.outputs) {
        if (o.kind != DiscreteOutput::Kind::Link)
            continue;
        const Handle ha = tuple[static_cast<std::size_t>(o.role)], hb = tuple[static_cast<std::size_t>(o.role_b)];
        if (!state.alive(ha) || !state.alive(hb))
            continue;
        const std::size_t ia = state.index(ha), ib = state.index(hb);
        if ((o.site_a >= 0 && state.attr(ia, o.site_a) != kSiteEmpty) ||
            (o.site_b >= 0 && state.attr(ib, o.site_b) != kSiteEmpty)) {
            if (log_)
                log_->warn_at(state.time, "process '" + rule.name + "' found a binding site occupied; link skipped");
            continue;
        }
        LinkInstance l;
        l.origin = LinkOrigin::Discrete;
        l.rule = static_cast<int>(r);
        l.spec = o.link_spec;
        l.a = ha;
        l.b = hb;
        l.site_a = o.site_a;
        l.site_b = o.site_b;
        l.rest = norm(state.pos(ia) - state.pos(ib));
        state.add_link(l);
    }
}

std::vector<double> DiscreteEngine::arm_triggers(SimState& state, ContinuousEngine& continuous, FieldEngine* fields)
{
    std::vector<double> times;
    std::vector<std::size_t> rules;
    for (std::size_t r = 0; r < model_->discrete.size(); ++r)
        if (model_->discrete[r].state_predicate && !disabled_[r])
            rules.push_back(r);
    if (rules.empty() || continuous.idle())
        return times;
    const auto& rec = continuous.record(state, fields);
    if (rec.y0.empty() || rec.y0.size() != rec.y1.size())
        return times;

    const bool rebind = fields && fields->size() > 0;
    auto load = [&](double theta) {
        continuous.scatter(theta <= 0.0 ? rec.y0 : (theta >= 1.0 ? rec.y1 : rec.at(theta)), state);
        if (rebind)
            fields->bind(state);
    };
    struct Candidate {
        std::size_t rule;
        std::size_t index;
        std::vector<bool> truth;
    };
    std::vector<Candidate> cands;
    for (std::size_t r : rules)
        for (std::size_t i = 0; i < state.count(); ++i)
            if (matches(model_->discrete[r].patterns[0], state, i))
                cands.push_back({r, i, {}});
    if (cands.empty())
        return times;

    constexpr int samples = 8;
    for (int k = 0; k <= samples; ++k) {
        load(static_cast<double>(k) / samples);
        for (auto& c : cands)
            c.truth.push_back(accept(state, model_->discrete[c.rule], {c.index}, fields));
    }
    for (const auto& c : cands) {
        for (int k = 1; k <= samples; ++k) {
            if (c.truth[k - 1] || !c.truth[k])
                continue;
            double lo = static_cast<double>(k - 1) / samples, hi = static_cast<double>(k) / samples;
            while (hi - lo > 1e-6) {
                const double mid = 0.5 * (lo + hi);
                load(mid);
                if (accept(state, model_->discrete[c.rule], {c.index}, fields))
                    hi = mid;
                else
                    lo = mid;
            }
            times.push_back(state.time + 0.5 * (lo + hi) * rec.dt);
            state.triggers.emplace_back(static_cast<int>(c.rule), state.handle(c.index));
            break;
        }
    }
    load(1.0);
    return times;
}

} // namespace mml
