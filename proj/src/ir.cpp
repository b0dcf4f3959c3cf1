#include "mml/ir.hpp"

#include "mml/diagnostics.hpp"
#include "mml/fields.hpp"
#include "mml/rng.hpp"
#include "mml/state.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mml::ir {

bool Program::uses(Source s) const
{
    return std::any_of(bindings.begin(), bindings.end(), [s](const Binding& b) { return b.source == s; });
}

std::optional<double> Program::constant() const
{
    if (code.empty() || std::any_of(code.begin(), code.end(), [](const Instr& i) { return i.op == Op::Load; })) {
        return std::nullopt;
    }
    return evaluate(*this, EvalContext{});
}

double RandomStream::next() { return rng::to_unit(rng::hash(key, rng::Stream::BodyRandom, counter++)); }

double role_distance(const Role& a, const Role& b)
{
    using K = Role::Kind;
    if (a.kind == K::Plane && b.kind == K::Plane) {
        return 0.0;
    }
    if (a.kind == K::Plane) {
        return std::abs(dot(b.position - a.position, a.normal));
    }
    if (b.kind == K::Plane) {
        return std::abs(dot(a.position - b.position, b.normal));
    }
    return norm(a.position - b.position);
}

namespace {

double load(const Binding& b, const EvalContext& ctx)
{
    switch (b.source) {
    case Source::RoleAttr: {
        const Role& r = ctx.roles[b.role];
        if (r.kind != Role::Kind::Particle || ctx.state == nullptr) {
            throw RuntimeError("attribute read on a role that is not a particle");
        }
        return ctx.state->attr(r.index, b.index);
    }
    case Source::RegionValue:
        if (ctx.state == nullptr) {
            throw RuntimeError("region value read without state");
        }
        return ctx.state->C[static_cast<std::size_t>(b.index)];
    case Source::Field: {
        if (ctx.fields == nullptr) {
            throw RuntimeError("field read without a field engine");
        }
        const Vec3 p = b.midpoint ? 0.5 * (ctx.roles[0].position + ctx.roles[1].position) : ctx.roles[b.role].position;
        return ctx.fields->eval(static_cast<std::size_t>(b.index), p);
    }
    case Source::Distance:
        if (b.role_b >= 0) {
            return role_distance(ctx.roles[b.role], ctx.roles[b.role_b]);
        } else {
            Role point;
            point.kind = Role::Kind::Point;
            point.position = b.point;
            return role_distance(ctx.roles[b.role], point);
        }
    case Source::Random:
        if (ctx.random == nullptr) {
            throw RuntimeError("rand() evaluated without a random stream");
        }
        return ctx.random->next();
    case Source::KernelValue:
        return ctx.kernel_value;
    case Source::KernelDist:
        return ctx.kernel_dist;
    }
    return 0.0;
}

inline double truth(bool b) { return b ? 1.0 : 0.0; }

} // namespace

double evaluate(const Program& program, const EvalContext& ctx)
{
    double small[32];
    std::vector<double> large;
    double* stack = small;
    if (program.max_stack > 32) {
        large.resize(static_cast<std::size_t>(program.max_stack));
        stack = large.data();
    }
    int sp = 0;
    for (const Instr& in : program.code) {
        switch (in.op) {
        case Op::Const:
            stack[sp++] = in.value;
            break;
        case Op::Load:
            stack[sp++] = load(program.bindings[in.arg], ctx);
            break;
        case Op::Neg:
            stack[sp - 1] = -stack[sp - 1];
            break;
        case Op::Not:
            stack[sp - 1] = truth(stack[sp - 1] == 0.0);
            break;
        case Op::Exp:
            stack[sp - 1] = std::exp(stack[sp - 1]);
            break;
        case Op::Log:
            stack[sp - 1] = std::log(stack[sp - 1]);
            break;
        case Op::Sqrt:
            stack[sp - 1] = std::sqrt(stack[sp - 1]);
            break;
        case Op::Abs:
            stack[sp - 1] = std::abs(stack[sp - 1]);
            break;
        case Op::Sin:
            stack[sp - 1] = std::sin(stack[sp - 1]);
            break;
        case Op::Cos:
            stack[sp - 1] = std::cos(stack[sp - 1]);
            break;
        default: {
            const double r = stack[--sp];
            double& l = stack[sp - 1];
            switch (in.op) {
            case Op::Add: l = l + r; break;
            case Op::Sub: l = l - r; break;
            case Op::Mul: l = l * r; break;
            case Op::Div: l = l / r; break;
            case Op::Pow: l = std::pow(l, r); break;
            case Op::Lt: l = truth(l < r); break;
            case Op::Le: l = truth(l <= r); break;
            case Op::Gt: l = truth(l > r); break;
            case Op::Ge: l = truth(l >= r); break;
            case Op::Eq: l = truth(l == r); break;
            case Op::Ne: l = truth(l != r); break;
            case Op::And: l = truth(l != 0.0 && r != 0.0); break;
            case Op::Or: l = truth(l != 0.0 || r != 0.0); break;
            case Op::Min: l = std::min(l, r); break;
            case Op::Max: l = std::max(l, r); break;
            default: break;
            }
        }
        }
    }
    return sp > 0 ? stack[sp - 1] : 0.0;
}

} // namespace mml::ir
