#include "mml/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace mml {

namespace {

const char* kind_name(AttrKind k)
{
    switch (k) {
    case AttrKind::Conc: return "conc";
    case AttrKind::Amount: return "amount";
    case AttrKind::Site: return "site";
    case AttrKind::Enum: return "enum";
    case AttrKind::Scalar: return "scalar";
    }
    return "?";
}

const char* mode_name(LinkRule::Mode m)
{
    switch (m) {
    case LinkRule::Mode::Explicit: return "explicit";
    case LinkRule::Mode::Dynamic: return "dynamic";
    case LinkRule::Mode::NonBonded: return "non-bonded";
    }
    return "?";
}

void attributes(std::ostream& os, const std::vector<AttributeDef>& attrs)
{
    std::vector<const AttributeDef*> sorted;
    for (const auto& a : attrs)
        sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });
    for (const auto* a : sorted) {
        os << "    " << a->name << " : " << (a->is_const ? "const " : "") << kind_name(a->kind) << '('
           << a->initial << ')';
        for (const auto& v : a->enum_values)
            os << ' ' << v;
        os << '\n';
    }
}

std::string pattern_text(const CompiledModel& m, const ParticlePattern& p)
{
    std::ostringstream os;
    if (p.plane >= 0)
        return "plane " + m.domain.planes[static_cast<std::size_t>(p.plane)].name;
    os << m.particle_types[static_cast<std::size_t>(p.type)].name;
    if (!p.groups.empty()) {
        os << " in {";
        for (std::size_t i = 0; i < p.groups.size(); ++i)
            os << (i ? ", " : "") << m.groups[static_cast<std::size_t>(p.groups[i])].path;
        os << '}';
    }
    return os.str();
}

} // namespace

std::string format_matrix(const ReactionNetwork& n)
{
    std::ostringstream os;
    std::size_t w = 4;
    for (const auto& s : n.species_names)
        w = std::max(w, s.size());
    std::vector<std::size_t> cw;
    for (const auto& p : n.process_names)
        cw.push_back(std::max<std::size_t>(4, p.size()));
    os << std::setw(static_cast<int>(w)) << "";
    for (std::size_t j = 0; j < n.cols(); ++j)
        os << "  " << std::setw(static_cast<int>(cw[j])) << n.process_names[j];
    os << '\n';
    for (std::size_t r = 0; r < n.rows(); ++r) {
        os << std::left << std::setw(static_cast<int>(w)) << n.species_names[r] << std::right;
        for (std::size_t j = 0; j < n.cols(); ++j)
            os << "  " << std::setw(static_cast<int>(cw[j])) << n.stoich[r][j];
        os << '\n';
    }
    return os.str();
}

std::string describe(const CompiledModel& m)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "parameters\n";
    for (const auto& [k, v] : m.parameters)
        os << "  " << k << " = " << v << '\n';
    os << "particle types\n";
    for (const auto& t : m.particle_types) {
        os << "  " << t.name << " radius=" << t.radius << " mass=" << t.mass << '\n';
        attributes(os, t.attributes);
    }
    os << "region types\n";
    for (const auto& t : m.region_types) {
        os << "  " << t.name << '\n';
        attributes(os, t.attributes);
    }
    os << "regions\n";
    for (const auto& r : m.regions)
        os << "  '" << r.path << "' " << m.region_types[static_cast<std::size_t>(r.type)].name << '\n';
    os << "groups\n";
    for (const auto& g : m.groups)
        os << "  " << g.path << " : " << m.particle_types[static_cast<std::size_t>(g.type)].name << '\n';
    os << "networks\n";
    for (const auto& n : m.networks) {
        os << "  " << n.host_name << '\n' << format_matrix(n);
        for (const auto& col : n.bindings)
            for (const auto& b : col)
                os << "    rate " << b.rate.text << (b.predicate.empty() ? "" : " when " + b.predicate.text) << '\n';
    }
    for (const auto& f : m.fluxes)
        os << "flux " << f.name << ' ' << f.attribute << " cutoff=" << f.cutoff << ' ' << f.rate.text << '\n';
    for (const auto& d : m.discrete) {
        os << "discrete " << d.name << " cutoff=" << d.cutoff;
        for (const auto& p : d.patterns)
            os << " [" << pattern_text(m, p) << ']';
        os << " outputs=" << d.outputs.size() << '\n';
    }
    for (const auto& l : m.link_rules)
        os << "link " << l.name << ' ' << mode_name(l.mode) << " [" << pattern_text(m, l.a) << "] ["
           << pattern_text(m, l.b) << "]\n";
    for (const auto& f : m.fields)
        os << "field " << f.name << ' ' << f.attribute << '\n';
    return os.str();
}

std::string check_report(const CompiledModel& m)
{
    std::ostringstream os;
    os << "processes:\n";
    for (const auto& p : m.processes)
        os << "  " << p.name << "  " << to_string(p.cls) << (p.host.empty() ? "" : "  on " + p.host) << '\n';
    for (const auto& n : m.networks) {
        if (n.cols() == 0)
            continue;
        os << "\nspecies of " << n.host_name << ": ";
        for (std::size_t i = 0; i < n.species_names.size(); ++i)
            os << (i ? ", " : "") << n.species_names[i];
        os << "\nstoichiometry of " << n.host_name << ":\n" << format_matrix(n);
    }
    if (!m.fluxes.empty()) {
        os << "\nflux rules:\n";
        for (const auto& f : m.fluxes)
            os << "  " << f.name << "  " << f.attribute << "  cutoff " << f.cutoff << "  "
               << (f.symmetric ? "symmetric" : "directed") << '\n';
    }
    if (!m.discrete.empty()) {
        os << "\ndiscrete rules:\n";
        for (const auto& d : m.discrete) {
            os << "  " << d.name;
            for (const auto& p : d.patterns)
                os << "  [" << pattern_text(m, p) << ']';
            if (d.cutoff > 0)
                os << "  cutoff " << d.cutoff;
            os << '\n';
        }
    }
    if (!m.link_rules.empty()) {
        os << "\nlink rules:\n";
        for (const auto& l : m.link_rules)
            os << "  " << l.name << "  " << mode_name(l.mode) << "  [" << pattern_text(m, l.a) << "] ["
               << pattern_text(m, l.b) << "]" << (l.cutoff > 0 ? "  cutoff " + std::to_string(l.cutoff) : "")
               << '\n';
    }
    if (!m.implicit.empty()) {
        os << "\nimplicit declarations:\n";
        for (const auto& i : m.implicit)
            os << "  " << (i.host.empty() ? "<root>" : i.host) << '.' << i.attribute << " : conc(0.0)"
               << (i.product ? "" : "  (reactant)") << '\n';
    }
    if (!m.resolutions.empty()) {
        os << "\nscope resolution:\n";
        for (const auto& r : m.resolutions)
            os << "  " << r.process << ": " << r.symbol << " -> " << to_string(r.resolution.kind)
               << (r.resolution.detail.empty() ? "" : " (" + r.resolution.detail + ")") << '\n';
    }
    for (const auto& w : m.warnings)
        os << "warning: " << w << '\n';
    return os.str();
}

} // namespace mml
