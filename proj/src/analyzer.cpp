#include "mml/analyzer.hpp"

#include "mml/printer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace mml {

using namespace ast;

namespace {

constexpr int kRootRegion = 0;

std::string join(const std::vector<std::string>& path, std::size_t n = std::string::npos)
{
    std::string s;
    n = std::min(n, path.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i)
            s += '.';
        s += path[i];
    }
    return s;
}

[[noreturn]] void fail(const SourceSpan& span, const std::string& msg, std::vector<std::string> trace = {})
{
    throw CompileError(span, msg, std::move(trace));
}

const ir::Op* function_op(const std::string& name, std::size_t& arity)
{
    static const std::map<std::string, std::pair<ir::Op, std::size_t>> table = {
        {"exp", {ir::Op::Exp, 1}},   {"log", {ir::Op::Log, 1}}, {"sqrt", {ir::Op::Sqrt, 1}},
        {"abs", {ir::Op::Abs, 1}},   {"sin", {ir::Op::Sin, 1}}, {"cos", {ir::Op::Cos, 1}},
        {"min", {ir::Op::Min, 2}},   {"max", {ir::Op::Max, 2}}, {"pow", {ir::Op::Pow, 2}},
    };
    auto it = table.find(name);
    if (it == table.end())
        return nullptr;
    arity = it->second.second;
    return &it->second.first;
}

const std::map<std::string, ir::Op>& binary_ops()
{
    static const std::map<std::string, ir::Op> ops = {
        {"+", ir::Op::Add}, {"-", ir::Op::Sub}, {"*", ir::Op::Mul},  {"/", ir::Op::Div},
        {"**", ir::Op::Pow}, {"<", ir::Op::Lt}, {"<=", ir::Op::Le}, {">", ir::Op::Gt},
        {">=", ir::Op::Ge}, {"==", ir::Op::Eq}, {"!=", ir::Op::Ne}, {"&&", ir::Op::And},
        {"||", ir::Op::Or},
    };
    return ops;
}

/// Groups of `region` (direct members) whose type carries continuous attribute `attr`.
std::vector<int> groups_carrying(const CompiledModel& m, int region, const std::string& attr)
{
    std::vector<int> out;
    for (std::size_t g = 0; g < m.groups.size(); ++g) {
        const auto& grp = m.groups[g];
        if (grp.region != region || grp.source == GroupSource::Default)
            continue;
        const auto& t = m.particle_types[static_cast<std::size_t>(grp.type)];
        const int a = t.find(attr);
        if (a >= 0 && t.attributes[static_cast<std::size_t>(a)].continuous())
            out.push_back(static_cast<int>(g));
    }
    return out;
}

std::vector<int> region_chain(const CompiledModel& m, int region)
{
    std::vector<int> chain;
    for (int r = region; r >= 0; r = m.regions[static_cast<std::size_t>(r)].parent)
        chain.push_back(r);
    return chain;
}

std::string region_label(const CompiledModel& m, int r)
{
    const auto& p = m.regions[static_cast<std::size_t>(r)].path;
    return p.empty() ? std::string("model root") : "region '" + p + "'";
}

/// One step of the ladder above the local level.
struct LadderHit {
    ResolutionKind kind = ResolutionKind::Unresolved;
    int region = -1;
    // RegionScalar
    std::optional<double> constant;
    int slot = -1; // region value slot
    // SpatialField
    int field = -1;            // declared field
    std::vector<int> groups;   // implicit field sources
    std::string detail;
};

LadderHit climb(const CompiledModel& m, const std::vector<int>& chain, const std::string& symbol,
                const std::map<std::string, double>& free_params, std::vector<std::string>* trace)
{
    LadderHit hit;
    for (int r : chain) {
        const auto& inst = m.regions[static_cast<std::size_t>(r)];
        const auto& rt = m.region_types[static_cast<std::size_t>(inst.type)];
        if (auto it = rt.scalars.find(symbol); it != rt.scalars.end()) {
            hit.kind = ResolutionKind::RegionScalar;
            hit.region = r;
            hit.constant = it->second;
            hit.detail = region_label(m, r) + " scalar";
            return hit;
        }
        if (const int a = rt.find(symbol); a >= 0) {
            hit.kind = ResolutionKind::RegionScalar;
            hit.region = r;
            hit.slot = static_cast<int>(inst.value_offset) + a;
            hit.detail = region_label(m, r) + " value";
            return hit;
        }
        if (r == kRootRegion) {
            if (auto it = m.parameters.find(symbol); it != m.parameters.end()) {
                hit.kind = ResolutionKind::RegionScalar;
                hit.region = r;
                hit.constant = it->second;
                hit.detail = "model parameter";
                return hit;
            }
            if (auto it = free_params.find(symbol); it != free_params.end()) {
                hit.kind = ResolutionKind::RegionScalar;
                hit.region = r;
                hit.constant = it->second;
                hit.detail = "command-line parameter";
                return hit;
            }
        }
        if (trace)
            trace->push_back("no scalar '" + symbol + "' in " + region_label(m, r));
        for (std::size_t f = 0; f < m.fields.size(); ++f) {
            if (m.fields[f].region == r && m.fields[f].name == symbol) {
                hit.kind = ResolutionKind::SpatialField;
                hit.region = r;
                hit.field = static_cast<int>(f);
                hit.detail = "field '" + symbol + "' of " + region_label(m, r);
                return hit;
            }
        }
        auto groups = groups_carrying(m, r, symbol);
        if (!groups.empty()) {
            hit.kind = ResolutionKind::SpatialField;
            hit.region = r;
            hit.groups = std::move(groups);
            hit.detail = "field over '" + symbol + "' in " + region_label(m, r);
            return hit;
        }
        if (trace)
            trace->push_back("no field '" + symbol + "' in " + region_label(m, r));
    }
    return hit;
}

} // namespace

ScopeResolution resolve_spatial(const CompiledModel& model, int group, const std::string& symbol)
{
    const auto& g = model.groups.at(static_cast<std::size_t>(group));
    const auto& t = model.particle_types[static_cast<std::size_t>(g.type)];
    if (t.find(symbol) >= 0)
        return {ResolutionKind::LocalAttribute, "attribute of " + t.name};
    auto hit = climb(model, region_chain(model, g.region), symbol, {}, nullptr);
    return {hit.kind, hit.detail};
}

std::vector<std::vector<int>> build_stoichiometry(const std::vector<Transformation>& procs, int species_count)
{
    std::vector<std::vector<int>> n(static_cast<std::size_t>(species_count), std::vector<int>(procs.size(), 0));
    for (std::size_t j = 0; j < procs.size(); ++j) {
        for (const auto& [s, c] : procs[j].outputs)
            n.at(static_cast<std::size_t>(s))[j] += c;
        for (const auto& [s, c] : procs[j].inputs)
            n.at(static_cast<std::size_t>(s))[j] -= c;
    }
    return n;
}

namespace {

enum class TypeKind { Particle, Region };

struct Ctx {
    enum Kind { Root, Particle, Region };
    Kind kind = Root;
    int type = -1;
};

struct PendingProc {
    const ProcDecl* decl = nullptr;
    Ctx ctx;
    std::string name;
    int order = 0;
};

struct PendingLink {
    const LinkDecl* decl = nullptr;
    Ctx ctx;
    std::string name;
    int order = 0;
};

struct MemberInfo {
    bool region = false;
    int type = -1;
};

/// Result of resolving an object path: a set of groups (particles) or region instances.
struct ObjRef {
    bool found = false;
    bool region = false;
    int type = -1;
    bool all = false;        // every group / instance of `type`
    bool type_level = false; // reached through a type name
    std::vector<int> ids;    // groups or region instances
    std::vector<int> owners; // region-type-relative paths: owning instance per id
    std::string label;
};

struct HostSet {
    bool region = false;
    int type = -1;
    bool all = false;
    bool type_level = false;
    std::vector<int> ids;
    std::vector<int> owners;
    std::string label;
};

struct AttrTerm {
    std::string binder;
    std::vector<HostSet> hosts;
    std::string attr;
    int coefficient = 1;
    SourceSpan span;
};

struct ContinuousPlan {
    const PendingProc* proc = nullptr;
    std::vector<AttrTerm> inputs;
    std::vector<AttrTerm> outputs;
    ProcessClass cls = ProcessClass::Continuous;
};

struct DiscretePlan {
    const PendingProc* proc = nullptr;
    int owner = -1;
    std::size_t rule = 0;
    std::vector<HostSet> pattern_hosts;
    struct Out {
        DiscreteOutput::Kind kind;
        const Term* term;
        int role = -1;
        int role_b = -1;
        int type = -1;
        int group = -1;
    };
    std::vector<Out> outputs;
};

struct LinkPlan {
    const PendingLink* link = nullptr;
    int owner = -1;
    std::size_t rule = 0;
    HostSet a;
    HostSet b;
};

struct RoleDef {
    enum Kind { Particle, Region, Plane, Value };
    Kind kind = Particle;
    std::string binder;
    int type = -1;
    int role = 0;
    int attr = -1;     // Value
    int region = -1;   // Value on a region host
    std::vector<int> groups;
};

struct Scope {
    std::string proc;
    Ctx ctx;
    std::vector<RoleDef> roles;             // runtime roles
    std::map<std::string, RoleDef> binders; // names bound by terms
    int local_role = -1;   // particle host role, if any
    int local_type = -1;   // particle type of the host role
    int local_group = -1;
    int local_region = -1; // region host instance
    int owner = -1;        // region instance for region-type-relative names
    std::vector<int> chain;
    bool midpoint = false;
    bool kernel = false;
    bool allow_random = true;
};

class Analyzer {
public:
    Analyzer(const SyntaxTree& tree, const AnalyzerOptions& options) : tree_(tree), opts_(options) {}

    CompiledModel run();

private:
    // ---- numbers ----
    std::optional<double> fold(const Expr& e);
    double number(const Expr& e, const std::string& what);
    Vec3 vector3(const Expr& e, const std::string& what);

    // ---- declarations ----
    void name_processes();
    void collect_parameters();
    std::pair<TypeKind, int> build_type(const std::string& name, const SourceSpan& span);
    TypeKind root_kind(const std::string& name, const SourceSpan& span, int depth = 0);
    void chain_items(const std::string& name, std::vector<const RecordItem*>& out);
    int create_particle_type(const std::string& name, const std::vector<const RecordItem*>& items, const SourceSpan& span);
    int create_region_type(const std::string& name, const std::vector<const RecordItem*>& items, const SourceSpan& span);
    void apply_particle_item(int t, const RecordItem& item, std::set<std::string>& seen);
    void apply_region_item(int t, const RecordItem& item, std::set<std::string>& seen);
    AttributeDef attribute_from(const std::string& name, const Expr& v, const SourceSpan& span);
    std::optional<AttributeDef> enum_from(const std::string& name, const Expr& v, const SourceSpan& span);
    int fill_type(const Expr& fill, const std::string& owner);
    int type_from_value(const Expr& v, const std::string& owner, TypeKind& kind);
    void set_domain(const Expr& v, const SourceSpan& span);

    void declare_instance(const std::string& path, const Expr& value, int parent, const SourceSpan& span);
    int instantiate_region(int type, const std::string& path, int parent, const Vec3& origin, const SourceSpan& span, int depth);
    void declare_path_attribute(const InstanceDecl& d);
    void declare_fill(const std::vector<std::string>& target, const Expr& fill, const SourceSpan& span);
    void declare_field(const std::string& name, const Expr& v, int region, const std::string& prefix, const SourceSpan& span);
    int add_group(Group g, const SourceSpan& span);
    int default_group(int type);

    // ---- terms ----
    ObjRef resolve_object(const std::vector<std::string>& path, std::size_t n, const Ctx& ctx, int owner = -1);
    ObjRef descend(const std::vector<std::string>& path, std::size_t n, std::size_t k, ObjRef cur);
    HostSet host_of(const ObjRef& o) const;
    std::vector<HostSet> attribute_hosts(const std::string& attr, const Ctx& ctx);
    AttrTerm attr_term(const Term& t, const Ctx& ctx, bool output);
    void implicit_declare(AttrTerm& t, const Ctx& ctx, bool output);
    bool is_discrete(const ProcDecl& p, const Ctx& ctx);
    void analyze_proc(const PendingProc& p);
    void analyze_discrete(const PendingProc& p, int owner);
    ParticlePattern pattern_of(const Term& t, const Ctx& ctx, int owner, HostSet& hosts, bool allow_plane);
    std::vector<AttrConstraint> constraints_of(const Term& t, int type);
    void analyze_link(const PendingLink& l, int owner);

    // ---- layout and compilation ----
    void expand(HostSet& h);
    void layout();
    void compile_continuous(const ContinuousPlan& plan);
    void compile_flux(const ContinuousPlan& plan);
    void compile_discrete(DiscretePlan& plan);
    void compile_link(LinkPlan& plan);
    void compile_fields();
    void build_networks();
    void finish();

    ir::Program compile(const Expr& e, Scope& s);
    void emit(const Expr& e, Scope& s, ir::Program& p, int& depth);
    void emit_name(const Expr& e, Scope& s, ir::Program& p, int& depth);
    void emit_call(const Expr& e, Scope& s, ir::Program& p, int& depth);
    void push_load(ir::Program& p, ir::Binding b, int& depth);
    void push_const(ir::Program& p, double v, int& depth);
    int implicit_field(const std::vector<int>& groups, const std::string& attr);
    void record(Scope& s, const std::string& symbol, ResolutionKind kind, const std::string& detail);
    struct Spatial {
        int role = -1;
        std::optional<Vec3> point;
    };
    Spatial spatial(const Expr& e, Scope& s);
    double cutoff_of(const Expr& when);
    std::vector<int> chain_for_groups(const std::vector<int>& groups) const;
    int lca(int a, int b) const;

    const SyntaxTree& tree_;
    const AnalyzerOptions& opts_;
    CompiledModel m_;

    std::map<std::string, const TypeDecl*> decls_;
    std::map<std::string, std::pair<TypeKind, int>> types_;
    std::set<std::string> building_;
    std::vector<std::vector<const RecordItem*>> region_items_; // instantiation-time items per region type
    std::vector<std::map<std::string, MemberInfo>> region_members_;
    std::vector<std::map<std::string, double>> region_overrides_;
    std::vector<SourceSpan> region_spans_;
    std::vector<PendingProc> procs_;
    std::vector<PendingLink> links_;
    std::map<const void*, std::pair<std::string, int>> names_;
    std::map<std::string, double> free_params_;
    std::set<std::string> used_overrides_;
    std::map<int, int> default_groups_;
    std::set<std::string> root_names_;
    int anonymous_ = 0;
    struct DeferredField {
        std::string name;
        const Expr* value;
        int region;
        std::string prefix;
        SourceSpan span;
    };
    std::vector<DeferredField> deferred_fields_;

    std::vector<ContinuousPlan> continuous_;
    std::vector<DiscretePlan> discrete_;
    std::vector<LinkPlan> link_plans_;
    std::map<std::string, int> implicit_fields_;
    std::vector<std::vector<Transformation>> transforms_; // per network, attribute-index space
    std::set<std::pair<std::string, std::string>> recorded_;
    std::vector<const InstanceDecl*> path_attributes_;
    std::vector<const FillDecl*> path_fills_;
    int network_for(bool region, int type);
};

// ---------------------------------------------------------------- numbers

std::optional<double> Analyzer::fold(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Number:
        return e.number;
    case ExprKind::Name: {
        if (e.path.size() != 1)
            return std::nullopt;
        if (auto it = m_.parameters.find(e.path[0]); it != m_.parameters.end())
            return it->second;
        if (auto it = free_params_.find(e.path[0]); it != free_params_.end()) {
            used_overrides_.insert(e.path[0]);
            return it->second;
        }
        return std::nullopt;
    }
    case ExprKind::Unary: {
        auto v = fold(e.args[0]);
        if (!v)
            return v;
        return e.text == "-" ? -*v : (*v == 0.0 ? 1.0 : 0.0);
    }
    case ExprKind::Binary: {
        auto a = fold(e.args[0]);
        auto b = fold(e.args[1]);
        if (!a || !b)
            return std::nullopt;
        if (e.text == "+") return *a + *b;
        if (e.text == "-") return *a - *b;
        if (e.text == "*") return *a * *b;
        if (e.text == "/") return *a / *b;
        if (e.text == "**") return std::pow(*a, *b);
        return std::nullopt;
    }
    case ExprKind::Call: {
        std::size_t arity = 0;
        const ir::Op* op = function_op(e.text, arity);
        if (!op || e.args.size() != arity)
            return std::nullopt;
        std::vector<double> v;
        for (const auto& a : e.args) {
            auto x = fold(a);
            if (!x)
                return std::nullopt;
            v.push_back(*x);
        }
        switch (*op) {
        case ir::Op::Exp: return std::exp(v[0]);
        case ir::Op::Log: return std::log(v[0]);
        case ir::Op::Sqrt: return std::sqrt(v[0]);
        case ir::Op::Abs: return std::abs(v[0]);
        case ir::Op::Sin: return std::sin(v[0]);
        case ir::Op::Cos: return std::cos(v[0]);
        case ir::Op::Min: return std::min(v[0], v[1]);
        case ir::Op::Max: return std::max(v[0], v[1]);
        case ir::Op::Pow: return std::pow(v[0], v[1]);
        default: return std::nullopt;
        }
    }
    default:
        return std::nullopt;
    }
}

double Analyzer::number(const Expr& e, const std::string& what)
{
    auto v = fold(e);
    if (!v)
        fail(e.span, what + " must be a constant number");
    if (!std::isfinite(*v))
        fail(e.span, what + " is not finite");
    return *v;
}

Vec3 Analyzer::vector3(const Expr& e, const std::string& what)
{
    if (e.kind != ExprKind::Vector || e.args.size() != 3)
        fail(e.span, what + " must be a 3-vector [x, y, z]");
    return {number(e.args[0], what), number(e.args[1], what), number(e.args[2], what)};
}

// ---------------------------------------------------------------- declarations

void Analyzer::name_processes()
{
    int procs = 0;
    int links = 0;
    std::function<void(const ProcDecl&)> name_proc;
    std::function<void(const LinkDecl&)> name_link;
    std::function<void(const std::vector<RecordItem>&)> walk_items;
    std::function<void(const Expr&)> walk_expr = [&](const Expr& e) {
        if (e.kind == ExprKind::Record)
            walk_items(e.items);
        for (const auto& a : e.args)
            walk_expr(a);
    };
    name_proc = [&](const ProcDecl& p) {
        ++procs;
        names_[&p] = {p.name.empty() ? "proc" + std::to_string(procs) : p.name, procs};
        for (const auto& t : p.outputs)
            if (t.kind == Term::Kind::Link && t.link)
                names_[t.link.get()] = {names_[&p].first + ".link", procs};
    };
    name_link = [&](const LinkDecl& l) {
        ++links;
        names_[&l] = {"link" + std::to_string(links), 100000 + links};
    };
    walk_items = [&](const std::vector<RecordItem>& items) {
        for (const auto& it : items) {
            if (it.kind == RecordItem::Kind::Proc)
                name_proc(*it.proc);
            else if (it.kind == RecordItem::Kind::Link)
                name_link(*it.link);
            else
                walk_expr(it.value);
        }
    };
    for (const auto& d : tree_.declarations) {
        if (auto* t = std::get_if<TypeDecl>(&d))
            walk_items(t->body);
        else if (auto* p = std::get_if<ProcDecl>(&d))
            name_proc(*p);
        else if (auto* l = std::get_if<LinkDecl>(&d))
            name_link(*l);
        else if (auto* i = std::get_if<InstanceDecl>(&d))
            walk_expr(i->value);
    }
}

void Analyzer::collect_parameters()
{
    for (const auto& [name, value] : opts_.overrides)
        free_params_[name] = value;
    for (const auto& d : tree_.declarations) {
        const auto* inst = std::get_if<InstanceDecl>(&d);
        if (!inst || inst->target.size() != 1)
            continue;
        const std::string& name = inst->target[0];
        if (name == "BoundingPlanes") {
            set_domain(inst->value, inst->span);
            root_names_.insert(name);
            continue;
        }
        const auto& v = inst->value;
        const bool numeric = v.kind == ExprKind::Number || v.kind == ExprKind::Unary ||
                             v.kind == ExprKind::Binary ||
                             (v.kind == ExprKind::Name && v.path.size() == 1 && m_.parameters.count(v.path[0]));
        if (!numeric)
            continue;
        if (m_.parameters.count(name))
            fail(inst->span, "duplicate definition of parameter '" + name + "'");
        double value = number(v, "parameter '" + name + "'");
        if (auto it = opts_.overrides.find(name); it != opts_.overrides.end()) {
            value = it->second;
            free_params_.erase(name);
            used_overrides_.insert(name);
        }
        m_.parameters[name] = value;
        root_names_.insert(name);
    }
}

void Analyzer::set_domain(const Expr& v, const SourceSpan& span)
{
    if (v.kind != ExprKind::Record || v.text != "Box")
        fail(span, "BoundingPlanes must be a Box{lower:[...], upper:[...]}");
    bool lower = false, upper = false;
    for (const auto& it : v.items) {
        const std::string key = join(it.target);
        if (key == "lower") {
            m_.domain.lower = vector3(it.value, "Box lower corner");
            lower = true;
        } else if (key == "upper") {
            m_.domain.upper = vector3(it.value, "Box upper corner");
            upper = true;
        } else {
            fail(it.span, "unknown Box member '" + key + "'");
        }
    }
    if (!lower || !upper)
        fail(span, "Box needs both lower and upper corners");
    const Vec3 lo = m_.domain.lower, hi = m_.domain.upper;
    if (!(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z))
        fail(span, "Box lower corner must be below the upper corner on every axis");
    m_.domain.bounded = true;
    m_.domain.planes = {
        {"LEFT", {lo.x, 0, 0}, {1, 0, 0}},   {"RIGHT", {hi.x, 0, 0}, {-1, 0, 0}},
        {"FRONT", {0, lo.y, 0}, {0, 1, 0}},  {"BACK", {0, hi.y, 0}, {0, -1, 0}},
        {"FLOOR", {0, 0, lo.z}, {0, 0, 1}},  {"CEILING", {0, 0, hi.z}, {0, 0, -1}},
    };
}

TypeKind Analyzer::root_kind(const std::string& name, const SourceSpan& span, int depth)
{
    if (name == "particle")
        return TypeKind::Particle;
    if (name == "MaterialRegion")
        return TypeKind::Region;
    if (depth > 64)
        fail(span, "type '" + name + "' derives from itself");
    if (auto it = types_.find(name); it != types_.end())
        return it->second.first;
    auto it = decls_.find(name);
    if (it == decls_.end())
        fail(span, "unknown type '" + name + "'");
    return root_kind(it->second->base, it->second->span, depth + 1);
}

void Analyzer::chain_items(const std::string& name, std::vector<const RecordItem*>& out)
{
    auto it = decls_.find(name);
    if (it == decls_.end())
        return;
    chain_items(it->second->base, out);
    for (const auto& item : it->second->body)
        out.push_back(&item);
}

std::pair<TypeKind, int> Analyzer::build_type(const std::string& name, const SourceSpan& span)
{
    if (auto it = types_.find(name); it != types_.end())
        return it->second;
    auto it = decls_.find(name);
    if (it == decls_.end())
        fail(span, "unknown type '" + name + "'");
    if (building_.count(name))
        fail(span, "type '" + name + "' is defined in terms of itself");
    building_.insert(name);
    const TypeKind kind = root_kind(name, span);
    std::vector<const RecordItem*> items;
    chain_items(name, items);
    int idx = kind == TypeKind::Particle ? create_particle_type(name, items, it->second->span)
                                         : create_region_type(name, items, it->second->span);
    building_.erase(name);
    return {kind, idx};
}

int Analyzer::create_particle_type(const std::string& name, const std::vector<const RecordItem*>& items,
                                   const SourceSpan& span)
{
    ParticleType pt;
    pt.name = name;
    pt.span = span;
    m_.particle_types.push_back(pt);
    const int idx = static_cast<int>(m_.particle_types.size()) - 1;
    types_[name] = {TypeKind::Particle, idx};
    std::set<std::string> seen;
    for (const RecordItem* item : items)
        apply_particle_item(idx, *item, seen);
    return idx;
}

AttributeDef Analyzer::attribute_from(const std::string& name, const Expr& v, const SourceSpan& span)
{
    AttributeDef a;
    a.name = name;
    a.span = span;
    a.is_const = v.is_const;
    if (v.text == "conc")
        a.kind = AttrKind::Conc;
    else if (v.text == "amount")
        a.kind = AttrKind::Amount;
    else
        a.kind = AttrKind::Site;
    if (a.kind == AttrKind::Site) {
        a.initial = kSiteEmpty;
        if (!v.args.empty() && v.args[0].path != std::vector<std::string>{"empty"})
            fail(v.args[0].span, "a binding site starts 'empty'");
    } else if (!v.args.empty()) {
        a.initial = number(v.args[0], "initial value of '" + name + "'");
    }
    return a;
}

std::optional<AttributeDef> Analyzer::enum_from(const std::string& name, const Expr& v, const SourceSpan& span)
{
    if (v.kind != ExprKind::Call || v.text != "enum")
        return std::nullopt;
    AttributeDef a;
    a.name = name;
    a.span = span;
    a.kind = AttrKind::Enum;
    for (std::size_t i = 0; i < v.args.size(); ++i) {
        const auto& arg = v.args[i];
        if (!v.arg_names[i].empty() || arg.kind != ExprKind::Name || arg.path.size() != 1)
            fail(arg.span, "enum values must be plain names");
        if (std::find(a.enum_values.begin(), a.enum_values.end(), arg.path[0]) != a.enum_values.end())
            fail(arg.span, "duplicate enum value '" + arg.path[0] + "'");
        a.enum_values.push_back(arg.path[0]);
    }
    if (a.enum_values.empty())
        fail(v.span, "enum needs at least one value");
    return a;
}

void Analyzer::apply_particle_item(int t, const RecordItem& item, std::set<std::string>& seen)
{
    const Ctx ctx{Ctx::Particle, t};
    if (item.kind == RecordItem::Kind::Proc) {
        procs_.push_back({item.proc.get(), ctx, names_[item.proc.get()].first, names_[item.proc.get()].second});
        return;
    }
    if (item.kind == RecordItem::Kind::Link) {
        links_.push_back({item.link.get(), ctx, names_[item.link.get()].first, names_[item.link.get()].second});
        return;
    }
    if (item.target.size() != 1)
        fail(item.span, "particle members must be simple names");
    const std::string& name = item.target[0];
    const Expr& v = item.value;
    auto& pt = m_.particle_types[static_cast<std::size_t>(t)];
    auto put = [&](AttributeDef a) {
        if (seen.count(name))
            fail(item.span, "duplicate definition of '" + name + "' in type '" + pt.name + "'");
        seen.insert(name);
        if (int i = pt.find(name); i >= 0)
            pt.attributes[static_cast<std::size_t>(i)] = std::move(a);
        else
            pt.attributes.push_back(std::move(a));
    };
    if (v.kind == ExprKind::Attribute) {
        put(attribute_from(name, v, item.span));
    } else if (auto e = enum_from(name, v, item.span)) {
        put(*e);
    } else if (name == "radius") {
        pt.radius = number(v, "radius");
        if (pt.radius < 0.0)
            fail(item.span, "radius must be non-negative");
    } else if (name == "mass") {
        pt.mass = number(v, "mass");
        if (!(pt.mass > 0.0))
            fail(item.span, "mass must be positive");
    } else if (name == "force") {
        pt.external_force = vector3(v, "force");
    } else if (name == "dpd") {
        if (v.kind != ExprKind::Record || v.text != "DPD")
            fail(item.span, "dpd must be DPD{a:..., gamma:..., kT:..., cutoff:...}");
        DpdParams p;
        for (const auto& it : v.items) {
            const std::string key = join(it.target);
            const double x = number(it.value, "DPD " + key);
            if (key == "a")
                p.a = x;
            else if (key == "gamma")
                p.gamma = x;
            else if (key == "kT")
                p.kT = x;
            else if (key == "cutoff")
                p.cutoff = x;
            else
                fail(it.span, "unknown DPD parameter '" + key + "'");
        }
        if (!(p.cutoff > 0.0) || p.gamma < 0.0 || p.kT < 0.0)
            fail(item.span, "DPD needs cutoff > 0, gamma >= 0 and kT >= 0");
        pt.dpd = p;
    } else if (auto x = fold(v)) {
        if (int i = pt.find(name); i >= 0 && !seen.count(name)) {
            pt.attributes[static_cast<std::size_t>(i)].initial = *x;
            seen.insert(name);
        } else {
            AttributeDef a;
            a.name = name;
            a.kind = AttrKind::Scalar;
            a.initial = *x;
            a.span = item.span;
            put(a);
        }
    } else if (int i = pt.find(name); i >= 0 && v.kind == ExprKind::Name && v.path.size() == 1 &&
                                      pt.attributes[static_cast<std::size_t>(i)].kind == AttrKind::Enum) {
        const auto& vals = pt.attributes[static_cast<std::size_t>(i)].enum_values;
        auto pos = std::find(vals.begin(), vals.end(), v.path[0]);
        if (pos == vals.end())
            fail(v.span, "'" + v.path[0] + "' is not a value of '" + name + "'");
        pt.attributes[static_cast<std::size_t>(i)].initial = static_cast<double>(pos - vals.begin());
    } else {
        fail(item.span, "cannot interpret member '" + name + "' of particle type '" + pt.name + "'");
    }
}

int Analyzer::create_region_type(const std::string& name, const std::vector<const RecordItem*>& items,
                                 const SourceSpan& span)
{
    RegionType rt;
    rt.name = name;
    rt.span = span;
    m_.region_types.push_back(rt);
    region_items_.emplace_back();
    region_members_.emplace_back();
    const int idx = static_cast<int>(m_.region_types.size()) - 1;
    types_[name] = {TypeKind::Region, idx};
    std::set<std::string> seen;
    for (const RecordItem* item : items)
        apply_region_item(idx, *item, seen);
    return idx;
}

int Analyzer::type_from_value(const Expr& v, const std::string& owner, TypeKind& kind)
{
    // `T`, `T(...)`, `T{...}`, `particle(...)`, `particle{...}`
    std::string tname;
    if (v.kind == ExprKind::Name && v.path.size() == 1)
        tname = v.path[0];
    else if (v.kind == ExprKind::Call || v.kind == ExprKind::Record)
        tname = v.text;
    else
        return -1;
    if (tname != "particle" && tname != "MaterialRegion" && !decls_.count(tname) && !types_.count(tname))
        return -1;
    kind = root_kind(tname, v.span);
    int base = tname == "particle" ? 0 : tname == "MaterialRegion" ? 1 : build_type(tname, v.span).second;
    if (v.kind != ExprKind::Record)
        return base;
    // Declarations inside an instance record derive a type named after the instance.
    bool declares = false;
    for (const auto& it : v.items) {
        if (it.kind != RecordItem::Kind::Member || it.value.kind == ExprKind::Attribute ||
            (it.value.kind == ExprKind::Call && (it.value.text == "enum" || it.value.text == "fill" ||
                                                 it.value.text == "field")) ||
            (it.value.kind == ExprKind::Record && (it.value.text == "Sphere" || it.value.text == "DPD")))
            declares = true;
        if (it.kind == RecordItem::Kind::Member && it.target.size() == 1 &&
            (it.target[0] == "radius" || it.target[0] == "dpd" || it.target[0] == "force" ||
             it.target[0] == "volume_preservation" || it.target[0] == "volume"))
            declares = true;
    }
    if (!declares)
        return base;
    std::vector<const RecordItem*> items;
    chain_items(tname, items);
    for (const auto& it : v.items) {
        if (it.kind == RecordItem::Kind::Member && it.target.size() == 1 &&
            (it.target[0] == "origin" || it.target[0] == "velocity"))
            continue;
        items.push_back(&it);
    }
    std::string name = owner;
    if (types_.count(name) || decls_.count(name))
        name = owner + "#" + std::to_string(++anonymous_);
    return kind == TypeKind::Particle ? create_particle_type(name, items, v.span)
                                      : create_region_type(name, items, v.span);
}

int Analyzer::fill_type(const Expr& fill, const std::string& owner)
{
    const Expr* type_expr = nullptr;
    for (std::size_t i = 0; i < fill.args.size(); ++i) {
        if (fill.arg_names[i] == "type")
            type_expr = &fill.args[i];
        else
            fail(fill.args[i].span, "fill takes a single 'type' argument");
    }
    if (!type_expr)
        fail(fill.span, "fill needs type=<particle type>");
    const Expr& v = *type_expr;
    std::string tname = v.kind == ExprKind::Name && v.path.size() == 1 ? v.path[0]
                        : v.kind == ExprKind::Record                    ? v.text
                                                                        : std::string();
    if (tname.empty())
        fail(v.span, "fill type must be a particle type name");
    if (v.kind == ExprKind::Record && !decls_.count(tname) && !types_.count(tname) && tname != "particle") {
        // `fill(type=FluidParticle{radius=5})` introduces the type on the spot.
        std::vector<const RecordItem*> items;
        for (const auto& it : v.items)
            items.push_back(&it);
        return create_particle_type(tname, items, v.span);
    }
    TypeKind kind = TypeKind::Particle;
    int t = type_from_value(v, owner + ".fill", kind);
    if (t < 0)
        fail(v.span, "unknown type '" + tname + "'");
    if (kind != TypeKind::Particle)
        fail(v.span, "fill needs a particle type");
    if (!(m_.particle_types[static_cast<std::size_t>(t)].radius > 0.0))
        fail(v.span, "fill needs a particle type with radius > 0");
    return t;
}

void Analyzer::apply_region_item(int t, const RecordItem& item, std::set<std::string>& seen)
{
    const Ctx ctx{Ctx::Region, t};
    if (item.kind == RecordItem::Kind::Proc) {
        procs_.push_back({item.proc.get(), ctx, names_[item.proc.get()].first, names_[item.proc.get()].second});
        return;
    }
    if (item.kind == RecordItem::Kind::Link) {
        links_.push_back({item.link.get(), ctx, names_[item.link.get()].first, names_[item.link.get()].second});
        return;
    }
    if (item.target.size() != 1)
        fail(item.span, "region members must be simple names");
    const std::string& name = item.target[0];
    const Expr& v = item.value;
    const std::string tname = m_.region_types[static_cast<std::size_t>(t)].name;
    if (seen.count(name) && name != "origin")
        fail(item.span, "duplicate definition of '" + name + "' in type '" + tname + "'");
    seen.insert(name);
    auto rt = [&]() -> RegionType& { return m_.region_types[static_cast<std::size_t>(t)]; };
    auto put = [&](AttributeDef a) {
        auto& r = rt();
        if (int i = r.find(name); i >= 0)
            r.attributes[static_cast<std::size_t>(i)] = std::move(a);
        else
            r.attributes.push_back(std::move(a));
    };
    if (name == "surface") {
        if (v.kind != ExprKind::Record || v.text != "Sphere")
            fail(item.span, "surface must be Sphere{radius:..., resolution:...}");
        SphereSpec s;
        std::string vertex;
        SourceSpan vertex_span;
        for (const auto& it : v.items) {
            const std::string key = join(it.target);
            if (key == "radius")
                s.radius = number(it.value, "sphere radius");
            else if (key == "resolution") {
                const double r = number(it.value, "sphere resolution");
                if (r < 0 || r != std::floor(r) || r > 6)
                    fail(it.span, "sphere resolution must be an integer in [0, 6]");
                s.resolution = static_cast<int>(r);
            } else if (key == "stiffness")
                s.stiffness = number(it.value, "surface stiffness");
            else if (key == "particle") {
                if (it.value.kind != ExprKind::Name || it.value.path.size() != 1)
                    fail(it.span, "surface particle must name a particle type");
                vertex = it.value.path[0];
                vertex_span = it.span;
            } else
                fail(it.span, "unknown Sphere member '" + key + "'");
        }
        if (!(s.radius > 0.0))
            fail(item.span, "sphere radius must be positive");
        if (vertex.empty()) {
            ParticleType vt;
            vt.name = tname + "_surface";
            vt.radius = 0.5;
            vt.span = item.span;
            m_.particle_types.push_back(vt);
            s.vertex_type = static_cast<int>(m_.particle_types.size()) - 1;
            types_[vt.name] = {TypeKind::Particle, s.vertex_type};
        } else {
            auto [k, idx] = build_type(vertex, vertex_span);
            if (k != TypeKind::Particle)
                fail(vertex_span, "surface particle must be a particle type");
            s.vertex_type = idx;
        }
        LinkSpec spec;
        spec.name = tname + ".surface";
        spec.kind = LinkSpec::Kind::Hookean;
        spec.stiffness = s.stiffness;
        m_.link_specs.push_back(spec);
        s.edge_spec = static_cast<int>(m_.link_specs.size()) - 1;
        rt().surface = s;
        region_members_[static_cast<std::size_t>(t)]["surface"] = {false, s.vertex_type};
    } else if (name == "body") {
        if (v.kind != ExprKind::Call || v.text != "fill")
            fail(item.span, "body must be fill(type=...)");
        const int ft = fill_type(v, tname + ".body");
        region_items_[static_cast<std::size_t>(t)].push_back(&item);
        region_members_[static_cast<std::size_t>(t)]["body"] = {false, ft};
    } else if (name == "volume_preservation") {
        rt().volume_stiffness = number(v, "volume_preservation");
    } else if (name == "volume") {
        rt().volume = number(v, "volume");
        if (!(rt().volume > 0.0))
            fail(item.span, "volume must be positive");
    } else if (v.kind == ExprKind::Attribute) {
        put(attribute_from(name, v, item.span));
    } else if (auto e = enum_from(name, v, item.span)) {
        put(*e);
    } else if (v.kind == ExprKind::Call && v.text == "field") {
        region_items_[static_cast<std::size_t>(t)].push_back(&item);
    } else if (auto x = fold(v)) {
        if (int i = rt().find(name); i >= 0)
            rt().attributes[static_cast<std::size_t>(i)].initial = *x;
        else
            rt().scalars[name] = *x;
    } else {
        TypeKind kind = TypeKind::Particle;
        const int st = type_from_value(v, tname + "." + name, kind);
        if (st < 0)
            fail(item.span, "cannot interpret member '" + name + "' of region type '" + tname + "'");
        if (kind == TypeKind::Region && st == t)
            fail(item.span, "region type '" + tname + "' contains itself");
        region_items_[static_cast<std::size_t>(t)].push_back(&item);
        region_members_[static_cast<std::size_t>(t)][name] = {kind == TypeKind::Region, st};
    }
}

int Analyzer::add_group(Group g, const SourceSpan& span)
{
    if (m_.find_group(g.path) >= 0 || m_.find_region(g.path) >= 0)
        fail(span, "duplicate definition of '" + g.path + "'");
    m_.groups.push_back(std::move(g));
    return static_cast<int>(m_.groups.size()) - 1;
}

int Analyzer::default_group(int type)
{
    if (auto it = default_groups_.find(type); it != default_groups_.end())
        return it->second;
    Group g;
    g.path = "new:" + m_.particle_types[static_cast<std::size_t>(type)].name;
    g.type = type;
    g.region = kRootRegion;
    g.source = GroupSource::Default;
    m_.groups.push_back(g);
    const int id = static_cast<int>(m_.groups.size()) - 1;
    default_groups_[type] = id;
    return id;
}

// ---------------------------------------------------------------- instances

void Analyzer::declare_instance(const std::string& path, const Expr& value, int parent, const SourceSpan& span)
{
    TypeKind kind = TypeKind::Particle;
    const int t = type_from_value(value, path, kind);
    if (t < 0)
        fail(span, "cannot interpret the declaration of '" + path + "'");
    const Vec3 base = m_.regions[static_cast<std::size_t>(parent)].origin;
    Vec3 offset;
    Vec3 velocity;
    std::optional<double> mass;
    std::vector<std::pair<std::string, const Expr*>> overrides;
    auto take = [&](const std::string& key, const Expr& v, const SourceSpan& at) {
        if (key == "origin" || key == "position")
            offset = vector3(v, key);
        else if (key == "velocity")
            velocity = vector3(v, "velocity");
        else if (key == "mass" && kind == TypeKind::Particle) {
            mass = number(v, "mass");
            if (!(*mass > 0.0))
                fail(at, "mass must be positive");
        } else
            overrides.emplace_back(key, &v);
    };
    if (value.kind == ExprKind::Call) {
        std::vector<double> pos;
        for (std::size_t i = 0; i < value.args.size(); ++i) {
            if (value.arg_names[i].empty())
                pos.push_back(number(value.args[i], "position component"));
            else
                take(value.arg_names[i], value.args[i], value.args[i].span);
        }
        if (!pos.empty() && pos.size() != 3)
            fail(value.span, "positional instance arguments are x, y, z");
        if (pos.size() == 3)
            offset = {pos[0], pos[1], pos[2]};
    } else if (value.kind == ExprKind::Record) {
        for (const auto& it : value.items) {
            if (it.kind != RecordItem::Kind::Member || it.target.size() != 1)
                continue;
            const Expr& v = it.value;
            const bool declaration = v.kind == ExprKind::Attribute || v.kind == ExprKind::Record ||
                                     (v.kind == ExprKind::Call && v.text != "particle");
            if (declaration)
                continue;
            const std::string& key = it.target[0];
            if (key == "radius" || key == "dpd" || key == "force" || key == "volume" || key == "volume_preservation")
                continue;
            take(key, v, it.span);
        }
    }

    if (kind == TypeKind::Particle) {
        Group g;
        g.path = path;
        g.type = t;
        g.region = parent;
        g.source = GroupSource::Single;
        g.position = base + offset;
        g.velocity = velocity;
        g.mass = mass;
        const auto& pt = m_.particle_types[static_cast<std::size_t>(t)];
        for (const auto& [key, v] : overrides) {
            const int a = pt.find(key);
            if (a < 0)
                fail(v->span, "'" + key + "' is not an attribute of '" + pt.name + "'");
            const auto& def = pt.attributes[static_cast<std::size_t>(a)];
            if (def.kind == AttrKind::Enum && v->kind == ExprKind::Name && v->path.size() == 1) {
                auto pos = std::find(def.enum_values.begin(), def.enum_values.end(), v->path[0]);
                if (pos == def.enum_values.end())
                    fail(v->span, "'" + v->path[0] + "' is not a value of '" + key + "'");
                g.initial_overrides[a] = static_cast<double>(pos - def.enum_values.begin());
            } else {
                g.initial_overrides[a] = number(*v, "initial value of '" + key + "'");
            }
        }
        add_group(std::move(g), span);
        return;
    }
    const int id = instantiate_region(t, path, parent, base + offset, span, 0);
    for (const auto& [key, v] : overrides)
        region_overrides_[static_cast<std::size_t>(id)][key] = number(*v, "initial value of '" + key + "'");
}

int Analyzer::instantiate_region(int t, const std::string& path, int parent, const Vec3& origin,
                                 const SourceSpan& span, int depth)
{
    if (depth > 32)
        fail(span, "region nesting is too deep");
    if (m_.find_group(path) >= 0 || m_.find_region(path) >= 0)
        fail(span, "duplicate definition of '" + path + "'");
    RegionInstance inst;
    inst.path = path;
    inst.type = t;
    inst.parent = parent;
    inst.origin = origin;
    m_.regions.push_back(inst);
    region_overrides_.emplace_back();
    region_spans_.push_back(span);
    const int id = static_cast<int>(m_.regions.size()) - 1;
    const auto& rt = m_.region_types[static_cast<std::size_t>(t)];
    if (rt.surface) {
        Group g;
        g.path = path + ".surface";
        g.type = rt.surface->vertex_type;
        g.region = id;
        g.source = GroupSource::Surface;
        g.position = origin;
        const int gid = add_group(std::move(g), span);
        m_.regions[static_cast<std::size_t>(id)].surface_group = gid;
    }
    const auto items = region_items_[static_cast<std::size_t>(t)];
    for (const RecordItem* item : items) {
        const std::string& name = item->target[0];
        if (name == "body") {
            Group g;
            g.path = path + ".body";
            g.type = region_members_[static_cast<std::size_t>(t)]["body"].type;
            g.region = id;
            g.source = GroupSource::Fill;
            const int gid = add_group(std::move(g), item->span);
            m_.regions[static_cast<std::size_t>(id)].body_group = gid;
            m_.fills.push_back({gid, id});
        } else if (item->value.kind == ExprKind::Call && item->value.text == "field") {
            deferred_fields_.push_back({name, &item->value, id, path, item->span});
        } else {
            const MemberInfo mi = region_members_[static_cast<std::size_t>(t)][name];
            if (mi.region) {
                Vec3 offset;
                for (const auto& it : item->value.items)
                    if (it.kind == RecordItem::Kind::Member && join(it.target) == "origin")
                        offset = vector3(it.value, "origin");
                if (item->value.kind == ExprKind::Call && item->value.args.size() == 3)
                    offset = {number(item->value.args[0], "x"), number(item->value.args[1], "y"),
                              number(item->value.args[2], "z")};
                instantiate_region(mi.type, path + "." + name, id, origin + offset, item->span, depth + 1);
            } else {
                declare_instance(path + "." + name, item->value, id, item->span);
            }
        }
    }
    return id;
}

void Analyzer::declare_path_attribute(const InstanceDecl& d)
{
    const auto& target = d.target;
    const std::string& name = target.back();
    ObjRef pre = resolve_object(target, target.size() - 1, Ctx{});
    if (!pre.found)
        fail(d.span, "cannot resolve '" + join(target, target.size() - 1) + "'");
    const Expr& v = d.value;
    std::optional<AttributeDef> def;
    if (v.kind == ExprKind::Attribute)
        def = attribute_from(name, v, d.span);
    else if (auto e = enum_from(name, v, d.span))
        def = e;
    std::optional<double> value;
    if (!def && pre.region && !pre.all && !pre.type_level && pre.ids.size() == 1 && !fold(v)) {
        declare_instance(join(target), v, pre.ids[0], d.span);
        return;
    }
    if (!def) {
        value = fold(v);
        if (!value)
            fail(d.span, "cannot interpret the declaration of '" + join(target) + "'");
    }
    const bool type_level = pre.all || pre.type_level;
    auto apply = [&](std::vector<AttributeDef>& attrs, const std::string& owner) -> int {
        int a = -1;
        for (std::size_t i = 0; i < attrs.size(); ++i)
            if (attrs[i].name == name)
                a = static_cast<int>(i);
        if (a < 0) {
            if (!def)
                fail(d.span, "'" + name + "' is not an attribute of '" + owner + "'");
            AttributeDef fresh = *def;
            if (!type_level && fresh.kind != AttrKind::Site && fresh.kind != AttrKind::Enum)
                fresh.initial = 0.0;
            attrs.push_back(fresh);
            return static_cast<int>(attrs.size()) - 1;
        }
        auto& cur = attrs[static_cast<std::size_t>(a)];
        if (def && (def->kind != cur.kind || def->is_const != cur.is_const))
            fail(d.span, "'" + name + "' is already declared with a different kind on '" + owner + "'");
        if (type_level)
            cur.initial = def ? def->initial : *value;
        return a;
    };
    const double initial = def ? def->initial : *value;
    if (pre.region) {
        auto& rt = m_.region_types[static_cast<std::size_t>(pre.type)];
        apply(rt.attributes, rt.name);
        if (!type_level)
            for (int r : pre.ids)
                region_overrides_[static_cast<std::size_t>(r)][name] = initial;
    } else {
        auto& pt = m_.particle_types[static_cast<std::size_t>(pre.type)];
        const int a = apply(pt.attributes, pt.name);
        if (!type_level)
            for (int g : pre.ids)
                m_.groups[static_cast<std::size_t>(g)].initial_overrides[a] = initial;
    }
}

void Analyzer::declare_fill(const std::vector<std::string>& target, const Expr& fill, const SourceSpan& span)
{
    if (target.size() == 1) {
        Group g;
        g.path = target[0];
        g.type = fill_type(fill, target[0]);
        g.region = kRootRegion;
        g.source = GroupSource::Fill;
        const int gid = add_group(std::move(g), span);
        m_.fills.push_back({gid, kRootRegion});
        root_names_.insert(target[0]);
        return;
    }
    ObjRef pre = resolve_object(target, target.size() - 1, Ctx{});
    if (!pre.found || !pre.region || pre.ids.size() != 1)
        fail(span, "fill target '" + join(target) + "' must be a member of one region instance");
    const int region = pre.ids[0];
    const std::string path = join(target);
    const int t = fill_type(fill, path);
    int gid = m_.find_group(path);
    if (gid >= 0) {
        auto& g = m_.groups[static_cast<std::size_t>(gid)];
        if (g.source != GroupSource::Fill)
            fail(span, "'" + path + "' is already declared");
        g.type = t;
    } else {
        Group g;
        g.path = path;
        g.type = t;
        g.region = region;
        g.source = GroupSource::Fill;
        gid = add_group(std::move(g), span);
        m_.fills.push_back({gid, region});
    }
    if (target.back() == "body")
        m_.regions[static_cast<std::size_t>(region)].body_group = gid;
}

void Analyzer::declare_field(const std::string& name, const Expr& v, int region, const std::string& prefix,
                             const SourceSpan& span)
{
    for (const auto& f : m_.fields)
        if (f.region == region && f.name == name)
            fail(span, "duplicate definition of field '" + name + "'");
    FieldDef f;
    f.name = name;
    f.region = region;
    const Expr* source = nullptr;
    for (std::size_t i = 0; i < v.args.size(); ++i) {
        const std::string& key = v.arg_names[i];
        const Expr& a = v.args[i];
        if (key.empty()) {
            if (source)
                fail(a.span, "field takes one source path");
            source = &a;
        } else if (key == "kernel") {
            if (a.kind == ExprKind::Name && a.path == std::vector<std::string>{"concentration"})
                f.kernel = KernelKind::Concentration;
            else if (a.kind == ExprKind::Name && a.path == std::vector<std::string>{"charge"})
                f.kernel = KernelKind::Charge;
            else {
                f.kernel = KernelKind::User;
                Scope s;
                s.proc = "field " + name;
                s.kernel = true;
                s.allow_random = false;
                s.chain = region_chain(m_, region);
                f.user_kernel = compile(a, s);
            }
        } else if (key == "h" || key == "smoothing") {
            f.smoothing = number(a, "smoothing length");
            if (!(f.smoothing > 0.0))
                fail(a.span, "smoothing length must be positive");
        } else if (key == "support") {
            f.support = number(a, "support radius");
            if (!(f.support > 0.0))
                fail(a.span, "support radius must be positive");
        } else if (key == "epsilon0") {
            f.epsilon0 = number(a, "epsilon0");
            if (!(f.epsilon0 > 0.0))
                fail(a.span, "epsilon0 must be positive");
        } else {
            fail(a.span, "unknown field argument '" + key + "'");
        }
    }
    if (!source || source->kind != ExprKind::Name || source->path.size() < 2)
        fail(span, "field needs a source path such as solvent.CXC");
    std::vector<std::string> path = source->path;
    ObjRef pre;
    if (!prefix.empty()) {
        std::vector<std::string> rel;
        std::stringstream ss(prefix);
        for (std::string part; std::getline(ss, part, '.');)
            rel.push_back(part);
        rel.insert(rel.end(), path.begin(), path.end());
        pre = resolve_object(rel, rel.size() - 1, Ctx{});
    }
    if (!pre.found)
        pre = resolve_object(path, path.size() - 1, Ctx{});
    if (!pre.found || pre.region)
        fail(source->span, "field source '" + join(path) + "' must be an attribute of particles");
    f.attribute = path.back();
    HostSet h = host_of(pre);
    expand(h);
    f.groups = h.ids;
    for (int g : f.groups) {
        const int t = m_.groups[static_cast<std::size_t>(g)].type;
        const int a = m_.particle_types[static_cast<std::size_t>(t)].find(f.attribute);
        if (a < 0)
            fail(source->span, "'" + f.attribute + "' is not an attribute of '" +
                                   m_.groups[static_cast<std::size_t>(g)].path + "'");
        f.attr_by_type[t] = a;
    }
    m_.fields.push_back(std::move(f));
}

// ---------------------------------------------------------------- terms

ObjRef Analyzer::resolve_object(const std::vector<std::string>& path, std::size_t n, const Ctx& ctx, int owner)
{
    if (n == 0 || n > path.size())
        return {};
    if (ctx.kind == Ctx::Region) {
        const auto& members = region_members_[static_cast<std::size_t>(ctx.type)];
        if (auto it = members.find(path[0]); it != members.end()) {
            ObjRef cur;
            cur.found = true;
            cur.region = it->second.region;
            cur.type = it->second.type;
            cur.type_level = owner < 0;
            cur.label = m_.region_types[static_cast<std::size_t>(ctx.type)].name + "." + path[0];
            for (std::size_t r = 0; r < m_.regions.size(); ++r) {
                if (m_.regions[r].type != ctx.type || (owner >= 0 && static_cast<int>(r) != owner))
                    continue;
                const std::string p = m_.regions[r].path + "." + path[0];
                const int id = cur.region ? m_.find_region(p) : m_.find_group(p);
                if (id >= 0) {
                    cur.ids.push_back(id);
                    cur.owners.push_back(static_cast<int>(r));
                }
            }
            if (owner >= 0)
                cur.label = m_.regions[static_cast<std::size_t>(owner)].path + "." + path[0];
            return descend(path, n, 1, cur);
        }
    }
    ObjRef cur;
    cur.found = true;
    cur.label = path[0];
    if (const int g = m_.find_group(path[0]); g >= 0) {
        cur.type = m_.groups[static_cast<std::size_t>(g)].type;
        cur.ids = {g};
        cur.owners = {-1};
    } else if (const int r = m_.find_region(path[0]); r > 0) {
        cur.region = true;
        cur.type = m_.regions[static_cast<std::size_t>(r)].type;
        cur.ids = {r};
        cur.owners = {-1};
    } else if (auto it = types_.find(path[0]); it != types_.end()) {
        cur.all = true;
        cur.type_level = true;
        cur.type = it->second.second;
        cur.region = it->second.first == TypeKind::Region;
        if (cur.region) {
            for (std::size_t i = 1; i < m_.regions.size(); ++i) {
                if (m_.regions[i].type == cur.type) {
                    cur.ids.push_back(static_cast<int>(i));
                    cur.owners.push_back(-1);
                }
            }
        }
    } else {
        return {};
    }
    return descend(path, n, 1, cur);
}

ObjRef Analyzer::descend(const std::vector<std::string>& path, std::size_t n, std::size_t k, ObjRef cur)
{
    for (; k < n; ++k) {
        if (!cur.region)
            return {};
        const auto& members = region_members_[static_cast<std::size_t>(cur.type)];
        auto it = members.find(path[k]);
        if (it == members.end()) {
            // Members added to a single instance rather than its type.
            if (cur.all || cur.type_level || cur.ids.size() != 1)
                return {};
            const std::string p = m_.regions[static_cast<std::size_t>(cur.ids[0])].path + "." + path[k];
            ObjRef next;
            next.found = true;
            next.label = cur.label + "." + path[k];
            next.owners = {cur.owners.empty() ? -1 : cur.owners[0]};
            if (const int g = m_.find_group(p); g >= 0) {
                next.type = m_.groups[static_cast<std::size_t>(g)].type;
                next.ids = {g};
            } else if (const int r = m_.find_region(p); r > 0) {
                next.region = true;
                next.type = m_.regions[static_cast<std::size_t>(r)].type;
                next.ids = {r};
            } else {
                return {};
            }
            cur = std::move(next);
            continue;
        }
        ObjRef next;
        next.found = true;
        next.region = it->second.region;
        next.type = it->second.type;
        next.type_level = cur.all || cur.type_level;
        next.label = cur.label + "." + path[k];
        for (std::size_t i = 0; i < cur.ids.size(); ++i) {
            const std::string p = m_.regions[static_cast<std::size_t>(cur.ids[i])].path + "." + path[k];
            const int id = next.region ? m_.find_region(p) : m_.find_group(p);
            if (id >= 0) {
                next.ids.push_back(id);
                next.owners.push_back(cur.owners.empty() ? -1 : cur.owners[i]);
            }
        }
        cur = std::move(next);
    }
    return cur;
}

HostSet Analyzer::host_of(const ObjRef& o) const
{
    HostSet h;
    h.region = o.region;
    h.type = o.type;
    h.all = o.all && !o.region;
    h.type_level = o.type_level;
    h.ids = o.ids;
    h.owners = o.owners;
    h.label = o.label;
    return h;
}

std::vector<HostSet> Analyzer::attribute_hosts(const std::string& attr, const Ctx& ctx)
{
    std::vector<HostSet> out;
    if (ctx.kind == Ctx::Particle) {
        HostSet h;
        h.type = ctx.type;
        h.all = true;
        h.type_level = true;
        h.label = m_.particle_types[static_cast<std::size_t>(ctx.type)].name;
        out.push_back(h);
    } else if (ctx.kind == Ctx::Region) {
        HostSet h;
        h.region = true;
        h.type = ctx.type;
        h.type_level = true;
        h.label = m_.region_types[static_cast<std::size_t>(ctx.type)].name;
        for (std::size_t r = 1; r < m_.regions.size(); ++r) {
            if (m_.regions[r].type == ctx.type) {
                h.ids.push_back(static_cast<int>(r));
                h.owners.push_back(static_cast<int>(r));
            }
        }
        out.push_back(h);
    } else {
        for (std::size_t t = 0; t < m_.particle_types.size(); ++t) {
            const int a = m_.particle_types[t].find(attr);
            if (a >= 0 && m_.particle_types[t].attributes[static_cast<std::size_t>(a)].continuous()) {
                HostSet h;
                h.type = static_cast<int>(t);
                h.all = true;
                h.type_level = true;
                h.label = m_.particle_types[t].name;
                out.push_back(h);
            }
        }
        if (out.empty()) {
            HostSet h;
            h.region = true;
            h.type = 0;
            h.ids = {kRootRegion};
            h.owners = {-1};
            h.label = "";
            out.push_back(h);
        }
    }
    return out;
}

AttrTerm Analyzer::attr_term(const Term& t, const Ctx& ctx, bool output)
{
    (void)output;
    AttrTerm a;
    a.binder = t.binder;
    a.coefficient = t.coefficient;
    a.span = t.span;
    const auto& path = t.pattern->path;
    if (path.size() >= 2) {
        ObjRef pre = resolve_object(path, path.size() - 1, ctx);
        if (!pre.found)
            fail(t.span, "cannot resolve '" + join(path) + "'",
                 {"'" + join(path, path.size() - 1) + "' is not a particle group, region, or type"});
        a.hosts = {host_of(pre)};
        a.attr = path.back();
    } else {
        a.attr = path[0];
        a.hosts = attribute_hosts(path[0], ctx);
    }
    return a;
}

void Analyzer::implicit_declare(AttrTerm& t, const Ctx& ctx, bool output)
{
    (void)ctx;
    for (const auto& h : t.hosts) {
        std::vector<AttributeDef>& attrs = h.region ? m_.region_types[static_cast<std::size_t>(h.type)].attributes
                                                    : m_.particle_types[static_cast<std::size_t>(h.type)].attributes;
        auto it = std::find_if(attrs.begin(), attrs.end(), [&](const AttributeDef& d) { return d.name == t.attr; });
        if (it == attrs.end()) {
            AttributeDef d;
            d.name = t.attr;
            d.kind = AttrKind::Conc;
            d.initial = 0.0;
            d.implicit = true;
            d.span = t.span;
            attrs.push_back(d);
            std::string host = h.label;
            if (h.type_level && !h.region)
                host = m_.particle_types[static_cast<std::size_t>(h.type)].name;
            else if (h.type_level && h.region)
                host = m_.region_types[static_cast<std::size_t>(h.type)].name;
            m_.implicit.push_back({host, t.attr, output});
        } else if (!it->continuous()) {
            fail(t.span, "'" + t.attr + "' is not a conc or amount attribute");
        } else if (it->implicit && output) {
            for (auto& rec : m_.implicit)
                if (rec.attribute == t.attr)
                    rec.product = true;
        }
    }
}

bool Analyzer::is_discrete(const ProcDecl& p, const Ctx& ctx)
{
    auto object_term = [&](const Term& t) {
        if (t.kind != Term::Kind::Pattern)
            return true;
        if (!t.constraints.empty() || !t.pattern || t.pattern->kind != ExprKind::Name)
            return true;
        return resolve_object(t.pattern->path, t.pattern->path.size(), ctx).found;
    };
    return std::any_of(p.inputs.begin(), p.inputs.end(), object_term) ||
           std::any_of(p.outputs.begin(), p.outputs.end(), object_term);
}

void Analyzer::analyze_proc(const PendingProc& p)
{
    const ProcDecl& d = *p.decl;
    if (is_discrete(d, p.ctx)) {
        if (p.ctx.kind == Ctx::Region) {
            for (std::size_t r = 1; r < m_.regions.size(); ++r)
                if (m_.regions[r].type == p.ctx.type)
                    analyze_discrete(p, static_cast<int>(r));
        } else {
            analyze_discrete(p, -1);
        }
        return;
    }
    ContinuousPlan plan;
    plan.proc = &p;
    for (const auto& t : d.inputs) {
        plan.inputs.push_back(attr_term(t, p.ctx, false));
        implicit_declare(plan.inputs.back(), p.ctx, false);
    }
    for (const auto& t : d.outputs) {
        plan.outputs.push_back(attr_term(t, p.ctx, true));
        implicit_declare(plan.outputs.back(), p.ctx, true);
    }
    if (!d.body)
        fail(d.span, "process '" + p.name + "' needs a rate body");
    auto same_hosts = [](const std::vector<HostSet>& a, const std::vector<HostSet>& b) {
        if (a.size() != b.size())
            return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].region != b[i].region || a[i].type != b[i].type || a[i].all != b[i].all || a[i].ids != b[i].ids)
                return false;
        return true;
    };
    if (plan.inputs.size() == 1 && plan.outputs.size() == 1 && !plan.inputs[0].binder.empty() &&
        !plan.outputs[0].binder.empty() && plan.inputs[0].binder != plan.outputs[0].binder &&
        plan.inputs[0].attr == plan.outputs[0].attr && d.when) {
        const auto& a = plan.inputs[0].hosts;
        const auto& b = plan.outputs[0].hosts;
        if (a.size() != 1 || b.size() != 1)
            fail(d.span, "flux process '" + p.name + "' must name one particle type per side");
        if (a[0].region || b[0].region)
            fail(d.span, "flux process '" + p.name + "' must move values between particles");
        plan.cls = ProcessClass::Flux;
        continuous_.push_back(std::move(plan));
        return;
    }
    const std::vector<HostSet>* hosts = nullptr;
    std::optional<AttrKind> unit;
    for (const auto* side : {&plan.inputs, &plan.outputs}) {
        for (const auto& t : *side) {
            if (!hosts)
                hosts = &t.hosts;
            else if (!same_hosts(*hosts, t.hosts))
                fail(t.span, "terms of continuous process '" + p.name +
                                 "' live on different hosts; transport between hosts needs binders and a "
                                 "'when (dist(a,b) < r)' predicate");
            for (const auto& h : t.hosts) {
                const auto& attrs = h.region ? m_.region_types[static_cast<std::size_t>(h.type)].attributes
                                             : m_.particle_types[static_cast<std::size_t>(h.type)].attributes;
                for (const auto& def : attrs) {
                    if (def.name != t.attr)
                        continue;
                    if (unit && *unit != def.kind)
                        fail(t.span, "process '" + p.name + "' mixes conc and amount values");
                    unit = def.kind;
                }
            }
        }
    }
    plan.cls = d.inputs.empty() ? ProcessClass::Rate : ProcessClass::Continuous;
    continuous_.push_back(std::move(plan));
}

std::vector<AttrConstraint> Analyzer::constraints_of(const Term& t, int type)
{
    std::vector<AttrConstraint> out;
    const auto& pt = m_.particle_types[static_cast<std::size_t>(type)];
    for (const auto& item : t.constraints) {
        if (item.kind != RecordItem::Kind::Member || item.target.size() != 1)
            fail(item.span, "pattern constraints are 'attribute = value'");
        const int a = pt.find(item.target[0]);
        if (a < 0)
            fail(item.span, "'" + item.target[0] + "' is not an attribute of '" + pt.name + "'");
        const auto& def = pt.attributes[static_cast<std::size_t>(a)];
        const Expr& v = item.value;
        AttrConstraint c;
        c.attr = a;
        if (v.kind == ExprKind::Name && v.path.size() == 1 && def.kind == AttrKind::Site) {
            if (v.path[0] != "empty")
                fail(v.span, "site constraints only test 'empty'");
            c.value = kSiteEmpty;
        } else if (v.kind == ExprKind::Name && v.path.size() == 1 && def.kind == AttrKind::Enum) {
            auto pos = std::find(def.enum_values.begin(), def.enum_values.end(), v.path[0]);
            if (pos == def.enum_values.end())
                fail(v.span, "'" + v.path[0] + "' is not a value of '" + def.name + "'");
            c.value = static_cast<double>(pos - def.enum_values.begin());
        } else {
            c.value = number(v, "constraint value");
        }
        out.push_back(c);
    }
    return out;
}

ParticlePattern Analyzer::pattern_of(const Term& t, const Ctx& ctx, int owner, HostSet& hosts, bool allow_plane)
{
    if (t.kind != Term::Kind::Pattern || !t.pattern)
        fail(t.span, "expected a particle pattern");
    ParticlePattern pat;
    pat.binder = t.binder;
    const Expr& e = *t.pattern;
    if (e.kind == ExprKind::Index) {
        if (!allow_plane)
            fail(t.span, "planes can only be link participants");
        if (e.args.size() != 2 || e.args[0].path != std::vector<std::string>{"BoundingPlanes"} ||
            e.args[1].kind != ExprKind::Name || e.args[1].path.size() != 1)
            fail(t.span, "expected BoundingPlanes[NAME]");
        if (!m_.domain.bounded)
            fail(t.span, "BoundingPlanes is not declared");
        pat.plane = m_.domain.find_plane(e.args[1].path[0]);
        if (pat.plane < 0)
            fail(e.args[1].span, "unknown plane '" + e.args[1].path[0] + "'");
        if (pat.binder.empty())
            pat.binder = m_.domain.planes[static_cast<std::size_t>(pat.plane)].name;
        hosts = HostSet{};
        return pat;
    }
    if (e.kind != ExprKind::Name)
        fail(t.span, "expected a particle pattern");
    ObjRef o = resolve_object(e.path, e.path.size(), ctx, owner);
    if (!o.found)
        fail(t.span, "'" + join(e.path) + "' is not a particle type or group");
    if (o.region)
        fail(t.span, "'" + join(e.path) + "' is a region; patterns match particles");
    if (pat.binder.empty() && e.path.size() == 1)
        pat.binder = e.path[0];
    pat.type = o.type;
    hosts = host_of(o);
    pat.constraints = constraints_of(t, o.type);
    return pat;
}

void Analyzer::analyze_discrete(const PendingProc& p, int owner)
{
    const ProcDecl& d = *p.decl;
    DiscretePlan plan;
    plan.proc = &p;
    plan.owner = owner;
    DiscreteRule rule;
    rule.name = p.name;
    if (owner >= 0) {
        int count = 0;
        for (const auto& r : m_.regions)
            count += r.type == p.ctx.type;
        if (count > 1)
            rule.name += "@" + m_.regions[static_cast<std::size_t>(owner)].path;
    }
    rule.span = d.span;
    std::map<std::string, int> roles;
    for (const auto& t : d.inputs) {
        if (t.kind != Term::Kind::Pattern)
            fail(t.span, "'with' and link terms belong in the output list");
        for (int c = 0; c < t.coefficient; ++c) {
            HostSet h;
            ParticlePattern pat = pattern_of(t, p.ctx, owner, h, false);
            if (!t.binder.empty()) {
                if (c > 0)
                    fail(t.span, "a bound input cannot carry a coefficient");
                if (roles.count(t.binder))
                    fail(t.span, "duplicate binder '" + t.binder + "'");
                roles[t.binder] = static_cast<int>(rule.patterns.size());
            }
            rule.patterns.push_back(pat);
            plan.pattern_hosts.push_back(h);
        }
    }
    if (rule.patterns.size() > 4)
        fail(d.span, "discrete processes match at most four participants");
    auto role_of = [&](const std::string& b, const SourceSpan& span) {
        auto it = roles.find(b);
        if (it == roles.end())
            fail(span, "'" + b + "' is not bound by an input of '" + p.name + "'");
        return it->second;
    };
    std::vector<bool> kept(rule.patterns.size(), false);
    for (const auto& t : d.outputs) {
        DiscretePlan::Out out{DiscreteOutput::Kind::Keep, &t};
        if (t.kind == Term::Kind::With) {
            out.kind = DiscreteOutput::Kind::Update;
            out.role = role_of(t.binder, t.span);
            kept[static_cast<std::size_t>(out.role)] = true;
            plan.outputs.push_back(out);
        } else if (t.kind == Term::Kind::Link) {
            const auto& parts = t.link->participants;
            if (parts.size() != 2)
                fail(t.span, "a link joins exactly two participants");
            out.kind = DiscreteOutput::Kind::Link;
            for (int k = 0; k < 2; ++k) {
                const auto& pt = parts[static_cast<std::size_t>(k)];
                if (pt.kind != Term::Kind::Pattern || !pt.pattern || pt.pattern->kind != ExprKind::Name ||
                    pt.pattern->path.size() > 2)
                    fail(pt.span, "link participants are 'binder' or 'binder.site'");
                const int r = role_of(pt.pattern->path[0], pt.span);
                (k == 0 ? out.role : out.role_b) = r;
                kept[static_cast<std::size_t>(r)] = true;
            }
            if (out.role == out.role_b)
                fail(t.span, "a link needs two distinct participants");
            plan.outputs.push_back(out);
        } else {
            const auto& path = t.pattern->path;
            if (t.pattern->kind == ExprKind::Name && t.binder.empty() && path.size() == 1 && roles.count(path[0])) {
                if (!t.constraints.empty())
                    fail(t.span, "use '" + path[0] + "{with ...}' to change attributes");
                out.kind = DiscreteOutput::Kind::Keep;
                out.role = roles[path[0]];
                kept[static_cast<std::size_t>(out.role)] = true;
                plan.outputs.push_back(out);
                continue;
            }
            if (t.pattern->kind != ExprKind::Name)
                fail(t.span, "expected a particle type to create");
            ObjRef o = resolve_object(path, path.size(), p.ctx, owner);
            if (!o.found || o.region)
                fail(t.span, "'" + join(path) + "' is not a particle type or group");
            out.kind = DiscreteOutput::Kind::Create;
            out.type = o.type;
            out.group = (!o.all && o.ids.size() == 1) ? o.ids[0] : default_group(o.type);
            for (int c = 0; c < t.coefficient; ++c)
                plan.outputs.push_back(out);
        }
    }
    for (std::size_t i = 0; i < kept.size(); ++i)
        rule.consumed.push_back(!kept[i]);
    plan.rule = m_.discrete.size();
    m_.discrete.push_back(std::move(rule));
    discrete_.push_back(std::move(plan));
}

void Analyzer::analyze_link(const PendingLink& l, int owner)
{
    const LinkDecl& d = *l.decl;
    if (d.participants.size() != 2)
        fail(d.span, "links join exactly two participants");
    LinkPlan plan;
    plan.link = &l;
    plan.owner = owner;
    LinkRule rule;
    rule.name = l.name;
    if (owner >= 0) {
        int count = 0;
        for (const auto& r : m_.regions)
            count += r.type == l.ctx.type;
        if (count > 1)
            rule.name += "@" + m_.regions[static_cast<std::size_t>(owner)].path;
    }
    rule.span = d.span;
    rule.a = pattern_of(d.participants[0], l.ctx, owner, plan.a, true);
    rule.b = pattern_of(d.participants[1], l.ctx, owner, plan.b, true);
    if (rule.a.plane >= 0 && rule.b.plane >= 0)
        fail(d.span, "a link needs at least one particle participant");
    if (rule.a.plane >= 0) {
        std::swap(rule.a, rule.b);
        std::swap(plan.a, plan.b);
    }
    if (!rule.a.binder.empty() && rule.a.binder == rule.b.binder)
        fail(d.span, "link participants need distinct binders");
    if (!d.when)
        rule.mode = LinkRule::Mode::Explicit;
    else if (d.while_)
        rule.mode = LinkRule::Mode::Dynamic;
    else
        rule.mode = LinkRule::Mode::NonBonded;
    if (rule.mode == LinkRule::Mode::Explicit && rule.b.plane >= 0)
        fail(d.span, "a link to a plane needs a 'when' predicate");
    LinkSpec spec;
    spec.name = rule.name;
    m_.link_specs.push_back(spec);
    rule.spec = static_cast<int>(m_.link_specs.size()) - 1;
    plan.rule = m_.link_rules.size();
    m_.link_rules.push_back(std::move(rule));
    link_plans_.push_back(std::move(plan));
}

// ---------------------------------------------------------------- layout

void Analyzer::expand(HostSet& h)
{
    if (h.region || !h.all)
        return;
    h.ids.clear();
    h.owners.clear();
    for (std::size_t g = 0; g < m_.groups.size(); ++g) {
        if (m_.groups[g].type == h.type) {
            h.ids.push_back(static_cast<int>(g));
            h.owners.push_back(-1);
        }
    }
}

void Analyzer::layout()
{
    for (auto& plan : continuous_)
        for (auto* side : {&plan.inputs, &plan.outputs})
            for (auto& t : *side)
                for (auto& h : t.hosts)
                    expand(h);
    for (auto& plan : discrete_)
        for (auto& h : plan.pattern_hosts)
            expand(h);
    for (auto& plan : link_plans_) {
        expand(plan.a);
        expand(plan.b);
    }
    std::size_t offset = 0;
    for (std::size_t r = 0; r < m_.regions.size(); ++r) {
        auto& inst = m_.regions[r];
        const auto& rt = m_.region_types[static_cast<std::size_t>(inst.type)];
        inst.value_offset = offset;
        inst.initial_values.clear();
        for (const auto& a : rt.attributes)
            inst.initial_values.push_back(a.initial);
        for (const auto& [name, value] : region_overrides_[r]) {
            const int a = rt.find(name);
            if (a < 0)
                fail(region_spans_[r], "'" + name + "' is not an attribute of '" + rt.name + "'");
            inst.initial_values[static_cast<std::size_t>(a)] = value;
        }
        offset += rt.attributes.size();
    }
}

int Analyzer::lca(int a, int b) const
{
    auto ca = region_chain(m_, a);
    for (int r = b; r >= 0; r = m_.regions[static_cast<std::size_t>(r)].parent)
        if (std::find(ca.begin(), ca.end(), r) != ca.end())
            return r;
    return kRootRegion;
}

std::vector<int> Analyzer::chain_for_groups(const std::vector<int>& groups) const
{
    if (groups.empty())
        return region_chain(m_, kRootRegion);
    int r = m_.groups[static_cast<std::size_t>(groups[0])].region;
    for (int g : groups)
        r = lca(r, m_.groups[static_cast<std::size_t>(g)].region);
    return region_chain(m_, r);
}

int Analyzer::network_for(bool region, int type)
{
    for (std::size_t n = 0; n < m_.networks.size(); ++n)
        if (m_.networks[n].region_host == region && m_.networks[n].type == type)
            return static_cast<int>(n);
    ReactionNetwork net;
    net.region_host = region;
    net.type = type;
    net.host_name = region ? m_.region_types[static_cast<std::size_t>(type)].name
                           : m_.particle_types[static_cast<std::size_t>(type)].name;
    m_.networks.push_back(std::move(net));
    transforms_.emplace_back();
    return static_cast<int>(m_.networks.size()) - 1;
}

// ---------------------------------------------------------------- expressions

void Analyzer::push_const(ir::Program& p, double v, int& depth)
{
    p.code.push_back({ir::Op::Const, 0, v});
    p.max_stack = std::max(p.max_stack, ++depth);
}

void Analyzer::push_load(ir::Program& p, ir::Binding b, int& depth)
{
    p.bindings.push_back(b);
    p.code.push_back({ir::Op::Load, static_cast<std::uint32_t>(p.bindings.size() - 1), 0.0});
    p.max_stack = std::max(p.max_stack, ++depth);
}

ir::Program Analyzer::compile(const Expr& e, Scope& s)
{
    ir::Program p;
    int depth = 0;
    emit(e, s, p, depth);
    p.text = to_source(e);
    return p;
}

void Analyzer::record(Scope& s, const std::string& symbol, ResolutionKind kind, const std::string& detail)
{
    if (recorded_.insert({s.proc, symbol}).second)
        m_.resolutions.push_back({s.proc, symbol, {kind, detail}});
}

int Analyzer::implicit_field(const std::vector<int>& groups, const std::string& attr)
{
    std::vector<int> sorted = groups;
    std::sort(sorted.begin(), sorted.end());
    std::string key = attr;
    for (int g : sorted)
        key += ":" + std::to_string(g);
    if (auto it = implicit_fields_.find(key); it != implicit_fields_.end())
        return it->second;
    FieldDef f;
    f.region = -1;
    f.attribute = attr;
    f.groups = sorted;
    std::string label;
    for (int g : sorted) {
        const auto& grp = m_.groups[static_cast<std::size_t>(g)];
        label += (label.empty() ? "" : "+") + grp.path;
        f.attr_by_type[grp.type] = m_.particle_types[static_cast<std::size_t>(grp.type)].find(attr);
    }
    f.name = label + "." + attr;
    m_.fields.push_back(std::move(f));
    const int idx = static_cast<int>(m_.fields.size()) - 1;
    implicit_fields_[key] = idx;
    return idx;
}

void Analyzer::emit(const Expr& e, Scope& s, ir::Program& p, int& depth)
{
    switch (e.kind) {
    case ExprKind::Number:
        push_const(p, e.number, depth);
        return;
    case ExprKind::Name:
        emit_name(e, s, p, depth);
        return;
    case ExprKind::Unary:
        emit(e.args[0], s, p, depth);
        p.code.push_back({e.text == "-" ? ir::Op::Neg : ir::Op::Not, 0, 0.0});
        return;
    case ExprKind::Binary: {
        auto it = binary_ops().find(e.text);
        if (it == binary_ops().end())
            fail(e.span, "unknown operator '" + e.text + "'");
        emit(e.args[0], s, p, depth);
        emit(e.args[1], s, p, depth);
        p.code.push_back({it->second, 0, 0.0});
        --depth;
        return;
    }
    case ExprKind::Call:
        emit_call(e, s, p, depth);
        return;
    case ExprKind::Vector:
        fail(e.span, "type mismatch: a vector is not a number (only dist accepts points)");
    default:
        fail(e.span, "'" + to_source(e) + "' is not allowed in an expression");
    }
}

void Analyzer::emit_name(const Expr& e, Scope& s, ir::Program& p, int& depth)
{
    const auto& path = e.path;
    const std::string& sym = path[0];
    std::vector<std::string> trace;
    if (s.kernel && path.size() == 1) {
        if (sym == "Ai") {
            push_load(p, {ir::Source::KernelValue}, depth);
            return;
        }
        if (sym == "r") {
            push_load(p, {ir::Source::KernelDist}, depth);
            return;
        }
    }
    if (path.size() == 1) {
        if (auto it = s.binders.find(sym); it != s.binders.end()) {
            const RoleDef& r = it->second;
            if (r.kind == RoleDef::Value) {
                ir::Binding b;
                if (r.region >= 0) {
                    b.source = ir::Source::RegionValue;
                    b.index = static_cast<int>(m_.regions[static_cast<std::size_t>(r.region)].value_offset) + r.attr;
                } else {
                    b.source = ir::Source::RoleAttr;
                    b.role = r.role;
                    b.index = r.attr;
                }
                push_load(p, b, depth);
                return;
            }
            fail(e.span, "type mismatch: '" + sym + "' names an object; use " + sym + ".<attribute> or dist(" +
                             sym + ", ...)");
        }
        if (s.local_type >= 0) {
            const auto& pt = m_.particle_types[static_cast<std::size_t>(s.local_type)];
            if (const int a = pt.find(sym); a >= 0) {
                ir::Binding b;
                b.source = ir::Source::RoleAttr;
                b.role = s.local_role;
                b.index = a;
                push_load(p, b, depth);
                record(s, sym, ResolutionKind::LocalAttribute, "attribute of " + pt.name);
                return;
            }
            trace.push_back("no attribute '" + sym + "' on " + pt.name);
        }
        if (s.local_region >= 0) {
            const auto& inst = m_.regions[static_cast<std::size_t>(s.local_region)];
            const auto& rt = m_.region_types[static_cast<std::size_t>(inst.type)];
            if (const int a = rt.find(sym); a >= 0) {
                ir::Binding b;
                b.source = ir::Source::RegionValue;
                b.index = static_cast<int>(inst.value_offset) + a;
                push_load(p, b, depth);
                record(s, sym, ResolutionKind::LocalAttribute, "attribute of " + rt.name);
                return;
            }
            if (auto it = rt.scalars.find(sym); it != rt.scalars.end()) {
                push_const(p, it->second, depth);
                record(s, sym, ResolutionKind::LocalAttribute, "scalar of " + rt.name);
                return;
            }
            trace.push_back("no attribute '" + sym + "' on " + rt.name);
        }
        LadderHit hit = climb(m_, s.chain, sym, free_params_, &trace);
        switch (hit.kind) {
        case ResolutionKind::Unresolved:
            fail(e.span, "unresolved symbol '" + sym + "'", trace);
        case ResolutionKind::RegionScalar:
            if (hit.constant) {
                if (!m_.parameters.count(sym) && free_params_.count(sym))
                    used_overrides_.insert(sym);
                push_const(p, *hit.constant, depth);
            } else {
                ir::Binding b;
                b.source = ir::Source::RegionValue;
                b.index = hit.slot;
                push_load(p, b, depth);
            }
            break;
        case ResolutionKind::SpatialField: {
            ir::Binding b;
            b.source = ir::Source::Field;
            b.index = hit.field >= 0 ? hit.field : implicit_field(hit.groups, sym);
            b.midpoint = s.midpoint;
            b.role = s.local_role >= 0 ? s.local_role : 0;
            push_load(p, b, depth);
            break;
        }
        default:
            break;
        }
        record(s, sym, hit.kind, hit.detail);
        return;
    }

    const std::string& attr = path.back();
    if (auto it = s.binders.find(sym); it != s.binders.end()) {
        const RoleDef& r = it->second;
        if (path.size() != 2 || r.kind != RoleDef::Particle)
            fail(e.span, "'" + join(path) + "' is not an attribute of a matched particle");
        const auto& pt = m_.particle_types[static_cast<std::size_t>(r.type)];
        const int a = pt.find(attr);
        if (a < 0)
            fail(e.span, "'" + attr + "' is not an attribute of '" + pt.name + "'");
        ir::Binding b;
        b.source = ir::Source::RoleAttr;
        b.role = r.role;
        b.index = a;
        push_load(p, b, depth);
        return;
    }
    ObjRef pre = resolve_object(path, path.size() - 1, s.ctx, s.owner);
    if (!pre.found)
        fail(e.span, "unresolved symbol '" + join(path) + "'",
             {"'" + join(path, path.size() - 1) + "' is not a particle group, region, or type"});
    if (pre.region) {
        if (pre.ids.size() != 1)
            fail(e.span, "'" + join(path) + "' refers to more than one region");
        const auto& inst = m_.regions[static_cast<std::size_t>(pre.ids[0])];
        const auto& rt = m_.region_types[static_cast<std::size_t>(inst.type)];
        if (const int a = rt.find(attr); a >= 0) {
            ir::Binding b;
            b.source = ir::Source::RegionValue;
            b.index = static_cast<int>(inst.value_offset) + a;
            push_load(p, b, depth);
        } else if (auto it = rt.scalars.find(attr); it != rt.scalars.end()) {
            push_const(p, it->second, depth);
        } else {
            fail(e.span, "'" + attr + "' is not an attribute of region '" + inst.path + "'");
        }
        record(s, join(path), ResolutionKind::RegionScalar, "value of region '" + inst.path + "'");
        return;
    }
    HostSet h = host_of(pre);
    expand(h);
    if (s.local_group >= 0 && h.ids == std::vector<int>{s.local_group}) {
        const auto& pt = m_.particle_types[static_cast<std::size_t>(s.local_type)];
        const int a = pt.find(attr);
        if (a < 0)
            fail(e.span, "'" + attr + "' is not an attribute of '" + pt.name + "'");
        ir::Binding b;
        b.source = ir::Source::RoleAttr;
        b.role = s.local_role;
        b.index = a;
        push_load(p, b, depth);
        record(s, join(path), ResolutionKind::LocalAttribute, "attribute of " + pt.name);
        return;
    }
    if (h.ids.empty())
        fail(e.span, "'" + join(path, path.size() - 1) + "' has no particles to read '" + attr + "' from");
    for (int g : h.ids) {
        const auto& grp = m_.groups[static_cast<std::size_t>(g)];
        const auto& pt = m_.particle_types[static_cast<std::size_t>(grp.type)];
        const int a = pt.find(attr);
        if (a < 0 || !pt.attributes[static_cast<std::size_t>(a)].continuous())
            fail(e.span, "unresolved symbol '" + join(path) + "'",
                 {"'" + grp.path + "' has no conc or amount attribute '" + attr + "'"});
    }
    ir::Binding b;
    b.source = ir::Source::Field;
    b.index = implicit_field(h.ids, attr);
    b.midpoint = s.midpoint;
    b.role = s.local_role >= 0 ? s.local_role : 0;
    push_load(p, b, depth);
    record(s, join(path), ResolutionKind::SpatialField, "field over " + m_.fields[static_cast<std::size_t>(b.index)].name);
}

Analyzer::Spatial Analyzer::spatial(const Expr& e, Scope& s)
{
    Spatial out;
    if (e.kind == ExprKind::Vector) {
        out.point = vector3(e, "point");
        return out;
    }
    if (e.kind == ExprKind::Name && e.path.size() == 1) {
        if (auto it = s.binders.find(e.path[0]); it != s.binders.end()) {
            if (it->second.kind == RoleDef::Region || (it->second.kind == RoleDef::Value && it->second.region >= 0))
                fail(e.span, "type mismatch: dist needs particles, planes or points; '" + e.path[0] +
                                 "' is a homogeneous region");
            out.role = it->second.role;
            return out;
        }
    }
    fail(e.span, "type mismatch: dist expects particles, planes or points, not '" + to_source(e) + "'");
}

void Analyzer::emit_call(const Expr& e, Scope& s, ir::Program& p, int& depth)
{
    for (const auto& n : e.arg_names)
        if (!n.empty())
            fail(e.span, "'" + e.text + "' takes no named arguments");
    if (e.text == "dist") {
        Spatial a, b;
        if (e.args.size() == 1 && e.args[0].kind == ExprKind::Binary && e.args[0].text == "-") {
            a = spatial(e.args[0].args[0], s);
            b = spatial(e.args[0].args[1], s);
        } else if (e.args.size() == 2) {
            a = spatial(e.args[0], s);
            b = spatial(e.args[1], s);
        } else {
            fail(e.span, "dist takes two spatial arguments");
        }
        if (a.point && b.point) {
            push_const(p, norm(*a.point - *b.point), depth);
            return;
        }
        ir::Binding bind;
        bind.source = ir::Source::Distance;
        if (a.point)
            std::swap(a, b);
        bind.role = a.role;
        if (b.point)
            bind.point = *b.point;
        else
            bind.role_b = b.role;
        push_load(p, bind, depth);
        return;
    }
    if (e.text == "rand") {
        if (!e.args.empty())
            fail(e.span, "rand() takes no arguments");
        if (!s.allow_random)
            fail(e.span, "rand() is not available here");
        push_load(p, {ir::Source::Random}, depth);
        return;
    }
    std::size_t arity = 0;
    const ir::Op* op = function_op(e.text, arity);
    if (!op)
        fail(e.span, "unknown function '" + e.text + "'");
    if (e.args.size() != arity)
        fail(e.span, "'" + e.text + "' takes " + std::to_string(arity) + " argument(s)");
    for (const auto& a : e.args)
        emit(a, s, p, depth);
    p.code.push_back({*op, 0, 0.0});
    depth -= static_cast<int>(arity) - 1;
}

double Analyzer::cutoff_of(const Expr& when)
{
    double best = 0.0;
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
        if (e.kind != ExprKind::Binary)
            return;
        if (e.text == "&&") {
            walk(e.args[0]);
            walk(e.args[1]);
            return;
        }
        const Expr* bound = nullptr;
        if ((e.text == "<" || e.text == "<=") && e.args[0].kind == ExprKind::Call && e.args[0].text == "dist")
            bound = &e.args[1];
        else if ((e.text == ">" || e.text == ">=") && e.args[1].kind == ExprKind::Call && e.args[1].text == "dist")
            bound = &e.args[0];
        if (!bound)
            return;
        auto v = fold(*bound);
        if (v && *v > 0.0 && std::isfinite(*v))
            best = best == 0.0 ? *v : std::min(best, *v);
    };
    walk(when);
    return best;
}

// ---------------------------------------------------------------- compilation

void Analyzer::compile_continuous(const ContinuousPlan& plan)
{
    const PendingProc& p = *plan.proc;
    const auto& hosts = (!plan.inputs.empty() ? plan.inputs[0] : plan.outputs[0]).hosts;
    for (std::size_t hi = 0; hi < hosts.size(); ++hi) {
        const HostSet& h = hosts[hi];
        const int net = network_for(h.region, h.type);
        const auto& attrs = h.region ? m_.region_types[static_cast<std::size_t>(h.type)].attributes
                                     : m_.particle_types[static_cast<std::size_t>(h.type)].attributes;
        auto index_of = [&](const std::string& name) {
            for (std::size_t i = 0; i < attrs.size(); ++i)
                if (attrs[i].name == name)
                    return static_cast<int>(i);
            return -1;
        };
        Transformation tr;
        for (const auto& t : plan.inputs)
            tr.inputs.emplace_back(index_of(t.attr), t.coefficient);
        for (const auto& t : plan.outputs)
            tr.outputs.emplace_back(index_of(t.attr), t.coefficient);
        auto& network = m_.networks[static_cast<std::size_t>(net)];
        network.process_names.push_back(p.name);
        network.process_class.push_back(plan.cls);
        transforms_[static_cast<std::size_t>(net)].push_back(tr);
        std::vector<ColumnBinding> bindings;
        for (std::size_t k = 0; k < h.ids.size(); ++k) {
            const int id = h.ids[k];
            Scope s;
            s.proc = p.name;
            s.ctx = p.ctx;
            s.owner = h.owners.empty() ? -1 : h.owners[k];
            RoleDef host;
            if (h.region) {
                s.local_region = id;
                s.chain = region_chain(m_, m_.regions[static_cast<std::size_t>(id)].parent);
                host.kind = RoleDef::Region;
            } else {
                s.local_role = 0;
                s.local_type = h.type;
                s.local_group = id;
                s.chain = region_chain(m_, m_.groups[static_cast<std::size_t>(id)].region);
                host.kind = RoleDef::Particle;
                host.type = h.type;
            }
            s.roles.push_back(host);
            for (const auto* side : {&plan.inputs, &plan.outputs}) {
                for (const auto& t : *side) {
                    if (t.binder.empty())
                        continue;
                    RoleDef v;
                    v.kind = RoleDef::Value;
                    v.role = 0;
                    v.attr = index_of(t.attr);
                    v.region = h.region ? id : -1;
                    s.binders[t.binder] = v;
                }
            }
            ColumnBinding b;
            b.host = {h.region, id};
            b.rate = compile(*p.decl->body, s);
            if (p.decl->when)
                b.predicate = compile(*p.decl->when, s);
            bindings.push_back(std::move(b));
        }
        if (h.ids.empty() && !h.region) {
            // Never placed: still resolve against the root so unresolved names are reported.
            Scope s;
            s.proc = p.name;
            s.ctx = p.ctx;
            s.local_role = 0;
            s.local_type = h.type;
            s.chain = region_chain(m_, 0);
            RoleDef host;
            host.kind = RoleDef::Particle;
            host.type = h.type;
            s.roles.push_back(host);
            compile(*p.decl->body, s);
            if (p.decl->when)
                compile(*p.decl->when, s);
        }
        network.bindings.push_back(std::move(bindings));
    }
}

void Analyzer::compile_flux(const ContinuousPlan& plan)
{
    const PendingProc& p = *plan.proc;
    const HostSet& ha = plan.inputs[0].hosts[0];
    const HostSet& hb = plan.outputs[0].hosts[0];
    FluxRule f;
    f.name = p.name;
    f.span = p.decl->span;
    f.attribute = plan.inputs[0].attr;
    f.source_groups = ha.ids;
    f.sink_groups = hb.ids;
    auto sa = ha.ids, sb = hb.ids;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    f.symmetric = sa == sb;
    const int ia = m_.particle_types[static_cast<std::size_t>(ha.type)].find(f.attribute);
    const int ib = m_.particle_types[static_cast<std::size_t>(hb.type)].find(f.attribute);
    f.attr_by_type[ha.type] = ia;
    f.attr_by_type[hb.type] = ib;

    std::function<void(const Expr&)> check = [&](const Expr& e) {
        if (e.kind == ExprKind::Binary && e.text == "&&") {
            check(e.args[0]);
            check(e.args[1]);
            return;
        }
        const bool ok = e.kind == ExprKind::Binary &&
                        (((e.text == "<" || e.text == "<=") && e.args[0].kind == ExprKind::Call &&
                          e.args[0].text == "dist") ||
                         ((e.text == ">" || e.text == ">=") && e.args[1].kind == ExprKind::Call &&
                          e.args[1].text == "dist"));
        if (!ok)
            fail(e.span, "flux predicates are restricted to distance cutoffs such as dist(a,b) < 5");
    };
    check(*p.decl->when);
    f.cutoff = cutoff_of(*p.decl->when);
    if (!(f.cutoff > 0.0))
        fail(p.decl->when->span, "flux process '" + p.name + "' needs a finite positive distance cutoff");

    Scope s;
    s.proc = p.name;
    s.ctx = p.ctx;
    s.midpoint = true;
    RoleDef ra{RoleDef::Particle, plan.inputs[0].binder, ha.type, 0};
    RoleDef rb{RoleDef::Particle, plan.outputs[0].binder, hb.type, 1};
    s.roles = {ra, rb};
    RoleDef va{RoleDef::Value, plan.inputs[0].binder, ha.type, 0, ia};
    RoleDef vb{RoleDef::Value, plan.outputs[0].binder, hb.type, 1, ib};
    s.binders[va.binder] = va;
    s.binders[vb.binder] = vb;
    std::vector<int> all = ha.ids;
    all.insert(all.end(), hb.ids.begin(), hb.ids.end());
    s.chain = chain_for_groups(all);
    f.rate = compile(*p.decl->body, s);
    f.when = compile(*p.decl->when, s);
    m_.fluxes.push_back(std::move(f));
}

void Analyzer::compile_discrete(DiscretePlan& plan)
{
    const PendingProc& p = *plan.proc;
    DiscreteRule& rule = m_.discrete[plan.rule];
    Scope s;
    s.proc = rule.name;
    s.ctx = p.ctx;
    s.owner = plan.owner;
    std::vector<int> all;
    for (std::size_t i = 0; i < rule.patterns.size(); ++i) {
        const HostSet& h = plan.pattern_hosts[i];
        rule.patterns[i].groups = h.all ? std::vector<int>{} : h.ids;
        all.insert(all.end(), h.ids.begin(), h.ids.end());
        RoleDef r{RoleDef::Particle, rule.patterns[i].binder, rule.patterns[i].type, static_cast<int>(i)};
        s.roles.push_back(r);
        if (!p.decl->inputs.empty() && !rule.patterns[i].binder.empty())
            s.binders[rule.patterns[i].binder] = r;
    }
    s.chain = chain_for_groups(all);
    if (rule.patterns.size() == 1) {
        s.local_role = 0;
        s.local_type = rule.patterns[0].type;
        s.local_group = rule.patterns[0].groups.size() == 1 ? rule.patterns[0].groups[0] : -1;
    }
    s.midpoint = rule.patterns.size() >= 2;
    if (p.decl->when) {
        rule.when = compile(*p.decl->when, s);
        rule.cutoff = cutoff_of(*p.decl->when);
    }
    if (p.decl->while_)
        fail(p.decl->while_->span, "'while' applies to links; discrete processes use 'when'");
    if (p.decl->body)
        rule.probability = compile(*p.decl->body, s);
    for (const auto& out : plan.outputs) {
        DiscreteOutput o;
        o.kind = out.kind;
        o.role = out.role;
        o.role_b = out.role_b;
        o.type = out.type;
        o.group = out.group;
        if (out.kind == DiscreteOutput::Kind::Update) {
            const int type = rule.patterns[static_cast<std::size_t>(out.role)].type;
            const auto& pt = m_.particle_types[static_cast<std::size_t>(type)];
            std::set<int> touched;
            for (const auto& item : out.term->constraints) {
                if (item.kind != RecordItem::Kind::Member || item.target.size() != 1)
                    fail(item.span, "'with' updates are 'attribute = value'");
                const int a = pt.find(item.target[0]);
                if (a < 0)
                    fail(item.span, "'" + item.target[0] + "' is not an attribute of '" + pt.name + "'");
                if (!touched.insert(a).second)
                    fail(item.span, "'" + item.target[0] + "' is updated twice");
                const auto& def = pt.attributes[static_cast<std::size_t>(a)];
                if (def.kind == AttrKind::Site)
                    fail(item.span, "binding sites change only through links");
                if (def.is_const)
                    fail(item.span, "'" + def.name + "' is const");
                ir::Program v;
                if (def.kind == AttrKind::Enum) {
                    if (item.value.kind != ExprKind::Name || item.value.path.size() != 1)
                        fail(item.span, "'" + def.name + "' takes one of its enum values");
                    auto pos = std::find(def.enum_values.begin(), def.enum_values.end(), item.value.path[0]);
                    if (pos == def.enum_values.end())
                        fail(item.value.span, "'" + item.value.path[0] + "' is not a value of '" + def.name + "'");
                    int d = 0;
                    push_const(v, static_cast<double>(pos - def.enum_values.begin()), d);
                    v.text = item.value.path[0];
                } else {
                    v = compile(item.value, s);
                }
                o.updates.emplace_back(a, std::move(v));
            }
        } else if (out.kind == DiscreteOutput::Kind::Link) {
            const auto& ld = *out.term->link;
            const int ta = rule.patterns[static_cast<std::size_t>(out.role)].type;
            const int tb = rule.patterns[static_cast<std::size_t>(out.role_b)].type;
            auto site = [&](const Term& t, int type) {
                if (t.pattern->path.size() < 2)
                    return -1;
                const auto& pt = m_.particle_types[static_cast<std::size_t>(type)];
                const int a = pt.find(t.pattern->path[1]);
                if (a < 0 || pt.attributes[static_cast<std::size_t>(a)].kind != AttrKind::Site)
                    fail(t.span, "'" + t.pattern->path[1] + "' is not a binding site of '" + pt.name + "'");
                return a;
            };
            o.site_a = site(ld.participants[0], ta);
            o.site_b = site(ld.participants[1], tb);
            Scope ls;
            ls.proc = names_[&ld].first;
            ls.ctx = p.ctx;
            ls.owner = plan.owner;
            ls.chain = s.chain;
            ls.midpoint = true;
            RoleDef ra{RoleDef::Particle, ld.participants[0].pattern->path[0], ta, 0};
            RoleDef rb{RoleDef::Particle, ld.participants[1].pattern->path[0], tb, 1};
            ls.roles = {ra, rb};
            ls.binders[ra.binder] = ra;
            ls.binders[rb.binder] = rb;
            LinkSpec spec;
            spec.name = ls.proc;
            spec.force = compile(ld.body, ls);
            if (ld.while_)
                spec.while_ = compile(*ld.while_, ls);
            if (ld.when)
                fail(ld.when->span, "a link created by a process attaches immediately; use 'while' to hold it");
            m_.link_specs.push_back(std::move(spec));
            o.link_spec = static_cast<int>(m_.link_specs.size()) - 1;
        }
        rule.outputs.push_back(std::move(o));
    }
    if (rule.patterns.size() == 1 && !rule.when.empty())
        rule.state_predicate = rule.when.uses(ir::Source::RoleAttr) || rule.when.uses(ir::Source::RegionValue) ||
                               rule.when.uses(ir::Source::Field);
    if (rule.patterns.size() == 2) {
        const auto& a = rule.patterns[0];
        const auto& b = rule.patterns[1];
        auto same_constraints = [&] {
            if (a.constraints.size() != b.constraints.size())
                return false;
            for (std::size_t i = 0; i < a.constraints.size(); ++i)
                if (a.constraints[i].attr != b.constraints[i].attr || a.constraints[i].value != b.constraints[i].value)
                    return false;
            return true;
        };
        rule.symmetric = a.type == b.type && a.groups == b.groups && same_constraints() &&
                         rule.consumed[0] == rule.consumed[1];
    }
}

void Analyzer::compile_link(LinkPlan& plan)
{
    const PendingLink& l = *plan.link;
    LinkRule& rule = m_.link_rules[plan.rule];
    rule.a.groups = plan.a.all ? std::vector<int>{} : plan.a.ids;
    if (rule.b.plane < 0)
        rule.b.groups = plan.b.all ? std::vector<int>{} : plan.b.ids;
    Scope s;
    s.proc = rule.name;
    s.ctx = l.ctx;
    s.owner = plan.owner;
    s.midpoint = true;
    s.allow_random = false;
    RoleDef ra{RoleDef::Particle, rule.a.binder, rule.a.type, 0};
    RoleDef rb{rule.b.plane >= 0 ? RoleDef::Plane : RoleDef::Particle, rule.b.binder, rule.b.type, 1};
    s.roles = {ra, rb};
    s.binders[ra.binder] = ra;
    s.binders[rb.binder] = rb;
    std::vector<int> all = plan.a.ids;
    all.insert(all.end(), plan.b.ids.begin(), plan.b.ids.end());
    s.chain = chain_for_groups(all);
    LinkSpec& spec = m_.link_specs[static_cast<std::size_t>(rule.spec)];
    spec.force = compile(l.decl->body, s);
    if (l.decl->while_)
        spec.while_ = compile(*l.decl->while_, s);
    if (l.decl->when) {
        rule.when = compile(*l.decl->when, s);
        rule.cutoff = cutoff_of(*l.decl->when);
    }
    if (rule.mode == LinkRule::Mode::NonBonded && !(rule.cutoff > 0.0))
        fail(l.decl->span, "a link applied by 'when' alone needs a distance cutoff such as dist(a,b) < 2");
    auto same_constraints = [&] {
        if (rule.a.constraints.size() != rule.b.constraints.size())
            return false;
        for (std::size_t i = 0; i < rule.a.constraints.size(); ++i)
            if (rule.a.constraints[i].attr != rule.b.constraints[i].attr ||
                rule.a.constraints[i].value != rule.b.constraints[i].value)
                return false;
        return true;
    };
    rule.symmetric = rule.b.plane < 0 && rule.a.type == rule.b.type && rule.a.groups == rule.b.groups &&
                     same_constraints();
}

void Analyzer::compile_fields()
{
    for (const auto& d : deferred_fields_)
        declare_field(d.name, *d.value, d.region, d.prefix, d.span);
}

void Analyzer::build_networks()
{
    for (std::size_t n = 0; n < m_.networks.size(); ++n) {
        auto& net = m_.networks[n];
        const auto& attrs = net.region_host ? m_.region_types[static_cast<std::size_t>(net.type)].attributes
                                            : m_.particle_types[static_cast<std::size_t>(net.type)].attributes;
        std::vector<int> species;
        for (std::size_t a = 0; a < attrs.size(); ++a)
            if (attrs[a].continuous())
                species.push_back(static_cast<int>(a));
        std::sort(species.begin(), species.end(), [&](int x, int y) {
            return attrs[static_cast<std::size_t>(x)].name < attrs[static_cast<std::size_t>(y)].name;
        });
        std::map<int, int> row_of;
        for (std::size_t r = 0; r < species.size(); ++r)
            row_of[species[r]] = static_cast<int>(r);
        std::vector<Transformation> cols;
        for (const auto& tr : transforms_[n]) {
            Transformation c;
            for (const auto& [a, k] : tr.inputs)
                c.inputs.emplace_back(row_of.at(a), k);
            for (const auto& [a, k] : tr.outputs)
                c.outputs.emplace_back(row_of.at(a), k);
            cols.push_back(c);
        }
        net.species = species;
        net.species_names.clear();
        for (int a : species)
            net.species_names.push_back(attrs[static_cast<std::size_t>(a)].name);
        net.stoich = build_stoichiometry(cols, static_cast<int>(species.size()));
        for (std::size_t r = 0; r < species.size(); ++r) {
            if (!attrs[static_cast<std::size_t>(species[r])].is_const)
                continue;
            for (std::size_t j = 0; j < net.stoich[r].size(); ++j) {
                if (net.stoich[r][j] != 0) {
                    m_.warnings.push_back("const species '" + net.species_names[r] + "' of " + net.host_name +
                                          " has net coefficient " + std::to_string(net.stoich[r][j]) + " in " +
                                          net.process_names[j] + "; held fixed as a boundary value");
                    net.stoich[r][j] = 0;
                }
            }
        }
    }
}

void Analyzer::finish()
{
    build_networks();
    struct Entry {
        int order;
        ProcessInfo info;
    };
    std::vector<Entry> entries;
    for (const auto& plan : continuous_) {
        ProcessInfo info;
        info.name = plan.proc->name;
        info.cls = plan.cls;
        info.span = plan.proc->decl->span;
        const auto& hosts = (!plan.inputs.empty() ? plan.inputs[0] : plan.outputs[0]).hosts;
        if (plan.cls == ProcessClass::Flux)
            info.host = plan.inputs[0].hosts[0].label + " -> " + plan.outputs[0].hosts[0].label;
        else
            for (const auto& h : hosts)
                info.host += (info.host.empty() ? "" : ", ") + (h.label.empty() ? std::string("<root>") : h.label);
        entries.push_back({plan.proc->order, info});
    }
    for (const auto& plan : discrete_) {
        ProcessInfo info;
        info.name = m_.discrete[plan.rule].name;
        info.cls = ProcessClass::Discrete;
        info.span = plan.proc->decl->span;
        entries.push_back({plan.proc->order, info});
    }
    for (const auto& plan : link_plans_) {
        ProcessInfo info;
        info.name = m_.link_rules[plan.rule].name;
        info.cls = ProcessClass::Link;
        info.span = plan.link->decl->span;
        entries.push_back({plan.link->order, info});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.order < b.order; });
    for (auto& e : entries)
        m_.processes.push_back(std::move(e.info));

    const std::size_t nt = m_.particle_types.size();
    m_.pair_params.assign(nt, std::vector<std::optional<DpdParams>>(nt));
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            const auto& a = m_.particle_types[i].dpd;
            const auto& b = m_.particle_types[j].dpd;
            if (!a || !b)
                continue;
            DpdParams p;
            p.a = 0.5 * (a->a + b->a);
            p.gamma = 0.5 * (a->gamma + b->gamma);
            p.kT = 0.5 * (a->kT + b->kT);
            p.cutoff = std::max(a->cutoff, b->cutoff);
            m_.pair_params[i][j] = p;
        }
    }
    for (const auto& [name, value] : opts_.overrides) {
        (void)value;
        if (!used_overrides_.count(name))
            fail(SourceSpan{}, "unknown parameter '" + name + "' in --set");
    }
    auto depth = [&](int r) {
        int d = 0;
        for (; r > 0; r = m_.regions[static_cast<std::size_t>(r)].parent)
            ++d;
        return d;
    };
    std::stable_sort(m_.fills.begin(), m_.fills.end(),
                     [&](const FillPlan& a, const FillPlan& b) { return depth(a.region) > depth(b.region); });
    if (tree_.declarations.empty())
        m_.warnings.push_back("no declarations");
}

CompiledModel Analyzer::run()
{
    name_processes();
    for (const auto& d : tree_.declarations) {
        if (const auto* t = std::get_if<TypeDecl>(&d)) {
            static const std::set<std::string> reserved = {"particle", "MaterialRegion", "Box", "Sphere", "DPD",
                                                            "BoundingPlanes"};
            if (reserved.count(t->name))
                fail(t->span, "'" + t->name + "' is a built-in name");
            if (!decls_.emplace(t->name, t).second)
                fail(t->span, "duplicate definition of type '" + t->name + "'");
        }
    }
    ParticleType point;
    point.name = "particle";
    m_.particle_types.push_back(point);
    types_["particle"] = {TypeKind::Particle, 0};
    RegionType root;
    root.name = "model";
    m_.region_types.push_back(root);
    RegionType material;
    material.name = "MaterialRegion";
    m_.region_types.push_back(material);
    region_items_.resize(2);
    region_members_.resize(2);
    types_["MaterialRegion"] = {TypeKind::Region, 1};
    RegionInstance root_instance;
    root_instance.type = 0;
    m_.regions.push_back(root_instance);
    region_overrides_.emplace_back();
    region_spans_.emplace_back();

    collect_parameters();
    for (const auto& [name, decl] : decls_)
        build_type(name, decl->span);

    std::set<std::string> seen_root = root_names_;
    for (const auto& d : tree_.declarations) {
        if (const auto* inst = std::get_if<InstanceDecl>(&d)) {
            if (inst->target.empty()) {
                const std::string base = inst->value.kind == ExprKind::Name ? join(inst->value.path) : inst->value.text;
                std::string name;
                do
                    name = base + "_" + std::to_string(++anonymous_);
                while (m_.find_group(name) >= 0 || m_.find_region(name) >= 0 || types_.count(name));
                declare_instance(name, inst->value, kRootRegion, inst->span);
                continue;
            }
            if (inst->target.size() > 1) {
                path_attributes_.push_back(inst);
                continue;
            }
            const std::string& name = inst->target[0];
            if (root_names_.count(name))
                continue; // parameter or domain
            if (!seen_root.insert(name).second)
                fail(inst->span, "duplicate definition of '" + name + "'");
            const Expr& v = inst->value;
            if (v.kind == ExprKind::Attribute) {
                m_.region_types[0].attributes.push_back(attribute_from(name, v, inst->span));
            } else if (auto e = enum_from(name, v, inst->span)) {
                m_.region_types[0].attributes.push_back(*e);
            } else if (v.kind == ExprKind::Call && v.text == "field") {
                deferred_fields_.push_back({name, &v, kRootRegion, "", inst->span});
            } else {
                declare_instance(name, v, kRootRegion, inst->span);
            }
        } else if (const auto* f = std::get_if<FillDecl>(&d)) {
            if (f->target.size() == 1 && !seen_root.insert(f->target[0]).second)
                fail(f->span, "duplicate definition of '" + f->target[0] + "'");
            path_fills_.push_back(f);
        } else if (const auto* p = std::get_if<ProcDecl>(&d)) {
            procs_.push_back({p, Ctx{}, names_[p].first, names_[p].second});
        } else if (const auto* l = std::get_if<LinkDecl>(&d)) {
            links_.push_back({l, Ctx{}, names_[l].first, names_[l].second});
        }
    }
    for (const auto* f : path_fills_)
        declare_fill(f->target, f->fill, f->span);
    for (const auto* a : path_attributes_)
        declare_path_attribute(*a);

    std::stable_sort(procs_.begin(), procs_.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
    std::stable_sort(links_.begin(), links_.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
    for (const auto& p : procs_)
        analyze_proc(p);
    for (const auto& l : links_) {
        if (l.ctx.kind == Ctx::Region) {
            for (std::size_t r = 1; r < m_.regions.size(); ++r)
                if (m_.regions[r].type == l.ctx.type)
                    analyze_link(l, static_cast<int>(r));
        } else {
            analyze_link(l, -1);
        }
    }

    layout();
    compile_fields();
    for (const auto& plan : continuous_) {
        if (plan.cls == ProcessClass::Flux)
            compile_flux(plan);
        else
            compile_continuous(plan);
    }
    for (auto& plan : discrete_)
        compile_discrete(plan);
    for (auto& plan : link_plans_)
        compile_link(plan);
    finish();
    return std::move(m_);
}

} // namespace

CompiledModel analyze(const SyntaxTree& tree, const AnalyzerOptions& options)
{
    Analyzer a(tree, options);
    return a.run();
}

SyntaxTree amend_with_implicit(const SyntaxTree& tree, const CompiledModel& model)
{
    SyntaxTree out = tree;
    auto conc_zero = [](const SourceSpan& span) {
        Expr v;
        v.kind = ExprKind::Attribute;
        v.text = "conc";
        v.span = span;
        Expr zero;
        zero.kind = ExprKind::Number;
        zero.number = 0.0;
        v.args.push_back(zero);
        return v;
    };
    for (const auto& imp : model.implicit) {
        TypeDecl* host = nullptr;
        for (auto& d : out.declarations)
            if (auto* t = std::get_if<TypeDecl>(&d); t && t->name == imp.host)
                host = t;
        if (host) {
            RecordItem item;
            item.target = {imp.attribute};
            item.value = conc_zero(host->span);
            host->body.push_back(std::move(item));
            continue;
        }
        InstanceDecl decl;
        std::stringstream ss(imp.host);
        for (std::string part; std::getline(ss, part, '.');)
            decl.target.push_back(part);
        decl.target.push_back(imp.attribute);
        decl.value = conc_zero({});
        out.declarations.emplace_back(std::move(decl));
    }
    return out;
}

} // namespace mml
