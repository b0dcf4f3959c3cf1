#include "mml/fields.hpp"

#include "mml/diagnostics.hpp"
#include "mml/ir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mml {

double cubic_spline(double r, double h)
{
    const double q = r / h;
    if (q < 1.0)
        return 1.0 - 1.5 * q * q + 0.75 * q * q * q;
    if (q < 2.0) {
        const double t = 2.0 - q;
        return 0.25 * t * t * t;
    }
    return 0.0;
}

FieldEngine::FieldEngine(const CompiledModel& model)
    : defs_(&model.fields), h_(model.fields.size(), 1.0), sources_(model.fields.size())
{
    for (std::size_t f = 0; f < defs_->size(); ++f)
        if ((*defs_)[f].smoothing > 0.0)
            h_[f] = (*defs_)[f].smoothing;
}

double FieldEngine::support(std::size_t field) const
{
    const FieldDef& d = (*defs_)[field];
    if (d.kernel == KernelKind::Concentration)
        return std::min(2.0 * h_[field], d.support);
    return d.support;
}

void FieldEngine::calibrate(const SimState& state)
{
    bind(state);
    for (std::size_t f = 0; f < defs_->size(); ++f) {
        const FieldDef& d = (*defs_)[f];
        if (d.kernel != KernelKind::Concentration || d.smoothing > 0.0)
            continue;
        const auto& pos = sources_[f].pos;
        if (pos.size() < 2)
            continue;
        double total = 0.0;
        for (std::size_t i = 0; i < pos.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < pos.size(); ++j)
                if (j != i)
                    best = std::min(best, norm2(pos[i] - pos[j]));
            total += std::sqrt(best);
        }
        const double spacing = total / static_cast<double>(pos.size());
        if (spacing > 0.0)
            h_[f] = 2.0 * spacing;
    }
    bind(state);
}

void FieldEngine::bind(const SimState& state)
{
    for (std::size_t f = 0; f < defs_->size(); ++f) {
        const FieldDef& d = (*defs_)[f];
        Sources& s = sources_[f];
        s.pos.clear();
        s.value.clear();
        for (std::size_t i = 0; i < state.count(); ++i) {
            if (std::find(d.groups.begin(), d.groups.end(), state.group(i)) == d.groups.end())
                continue;
            auto it = d.attr_by_type.find(state.type(i));
            if (it == d.attr_by_type.end())
                continue;
            s.pos.push_back(state.pos(i));
            s.value.push_back(state.attr(i, it->second));
        }
        s.start.clear();
        s.order.clear();
        const double cut = support(f);
        if (!std::isfinite(cut) || s.pos.empty()) {
            s.cell = 0.0;
            continue;
        }
        Vec3 lo = s.pos[0], hi = s.pos[0];
        for (const Vec3& p : s.pos) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
        const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
        s.cell = std::max(cut, extent / 255.0);
        s.lower = lo;
        auto dim = [&](double a, double b) { return static_cast<int>((b - a) / s.cell) + 1; };
        s.nx = dim(lo.x, hi.x);
        s.ny = dim(lo.y, hi.y);
        s.nz = dim(lo.z, hi.z);
        const std::size_t ncell = static_cast<std::size_t>(s.nx) * s.ny * s.nz;
        std::vector<std::size_t> cell_of(s.pos.size());
        s.start.assign(ncell + 1, 0);
        for (std::size_t i = 0; i < s.pos.size(); ++i) {
            const Vec3 q = (s.pos[i] - lo) / s.cell;
            const int cx = std::min(static_cast<int>(q.x), s.nx - 1);
            const int cy = std::min(static_cast<int>(q.y), s.ny - 1);
            const int cz = std::min(static_cast<int>(q.z), s.nz - 1);
            cell_of[i] = (static_cast<std::size_t>(cz) * s.ny + cy) * s.nx + cx;
            ++s.start[cell_of[i] + 1];
        }
        for (std::size_t c = 0; c < ncell; ++c)
            s.start[c + 1] += s.start[c];
        s.order.resize(s.pos.size());
        std::vector<std::size_t> fill(s.start.begin(), s.start.end() - 1);
        for (std::size_t i = 0; i < s.pos.size(); ++i)
            s.order[fill[cell_of[i]]++] = i;
    }
}

template <class F>
void FieldEngine::for_sources(std::size_t field, const Vec3& point, double radius, F&& f) const
{
    const Sources& s = sources_[field];
    if (s.cell <= 0.0) {
        for (std::size_t i = 0; i < s.pos.size(); ++i) {
            const double r = norm(point - s.pos[i]);
            if (r <= radius)
                f(i, r);
        }
        return;
    }
    const Vec3 q = (point - s.lower) / s.cell;
    auto range = [](double c, int n, int& lo, int& hi) {
        lo = std::max(0, static_cast<int>(std::floor(c)) - 1);
        hi = std::min(n - 1, static_cast<int>(std::floor(c)) + 1);
    };
    int x0, x1, y0, y1, z0, z1;
    range(q.x, s.nx, x0, x1);
    range(q.y, s.ny, y0, y1);
    range(q.z, s.nz, z0, z1);
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const std::size_t c = (static_cast<std::size_t>(z) * s.ny + y) * s.nx + x;
                for (std::size_t k = s.start[c]; k < s.start[c + 1]; ++k) {
                    const std::size_t i = s.order[k];
                    const double r = norm(point - s.pos[i]);
                    if (r < radius)
                        f(i, r);
                }
            }
}

double FieldEngine::eval(std::size_t field, const Vec3& point) const
{
    if (!std::isfinite(point.x) || !std::isfinite(point.y) || !std::isfinite(point.z))
        throw RuntimeError("field '" + (*defs_)[field].name + "' evaluated at a non-finite point");
    const FieldDef& d = (*defs_)[field];
    const Sources& s = sources_[field];
    switch (d.kernel) {
    case KernelKind::Concentration: {
        const double h = h_[field];
        double num = 0.0, den = 0.0;
        for_sources(field, point, support(field), [&](std::size_t i, double r) {
            const double w = cubic_spline(r, h);
            num += w * s.value[i];
            den += w;
        });
        return den > 0.0 ? num / den : 0.0;
    }
    case KernelKind::Charge: {
        const double k = 1.0 / (4.0 * 3.14159265358979323846 * d.epsilon0);
        double sum = 0.0;
        for_sources(field, point, d.support, [&](std::size_t i, double r) {
            if (r == 0.0)
                throw RuntimeError("field '" + d.name + "' evaluated exactly at a point charge");
            sum += k * s.value[i] / r;
        });
        return sum;
    }
    case KernelKind::User: {
        ir::EvalContext ctx;
        double sum = 0.0;
        for_sources(field, point, d.support, [&](std::size_t i, double r) {
            ctx.kernel_value = s.value[i];
            ctx.kernel_dist = r;
            const double v = ir::evaluate(d.user_kernel, ctx);
            if (!std::isfinite(v))
                throw RuntimeError("kernel of field '" + d.name + "' is not finite at distance " +
                                   std::to_string(r));
            sum += v;
        });
        return sum;
    }
    }
    return 0.0;
}

} // namespace mml
