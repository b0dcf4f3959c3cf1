#pragma once

#include "mml/diagnostics.hpp"
#include "mml/ir.hpp"
#include "mml/vec3.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mml {

enum class AttrKind { Conc, Amount, Site, Enum, Scalar };

struct AttributeDef {
    std::string name;
    AttrKind kind = AttrKind::Conc;
    bool is_const = false;
    double initial = 0.0;
    std::vector<std::string> enum_values;
    bool implicit = false;
    SourceSpan span;

    bool continuous() const { return kind == AttrKind::Conc || kind == AttrKind::Amount; }
};

/// Value stored in a site attribute that holds no link.
inline constexpr double kSiteEmpty = -1.0;

/// Standard DPD pair parameters; sigma follows from fluctuation-dissipation.
struct DpdParams {
    double a = 0.0;
    double gamma = 0.0;
    double kT = 0.0;
    double cutoff = 1.0;

    double sigma() const { return std::sqrt(2.0 * gamma * kT); }
};

struct ParticleType {
    std::string name;
    double radius = 0.0; // 0 = point particle, amount-only host
    double mass = 1.0;
    Vec3 external_force;
    std::optional<DpdParams> dpd;
    std::vector<AttributeDef> attributes;
    SourceSpan span;

    int find(const std::string& attr) const;
    double volume() const;
};

struct SphereSpec {
    double radius = 1.0;
    int resolution = 0;
    int vertex_type = -1;
    double stiffness = 10.0;
    int edge_spec = -1; // Hookean link spec joining mesh edges
};

struct RegionType {
    std::string name;
    std::vector<AttributeDef> attributes; // homogeneous store, one value per instance
    std::map<std::string, double> scalars;
    std::optional<SphereSpec> surface;
    double volume_stiffness = 0.0;
    double volume = 1.0; // used when there is no surface
    SourceSpan span;

    int find(const std::string& attr) const;
};

struct RegionInstance {
    std::string path;
    int type = 0;
    int parent = -1;
    Vec3 origin;
    std::size_t value_offset = 0;
    std::vector<double> initial_values;
    int surface_group = -1;
    int body_group = -1;
};

enum class GroupSource { Single, Fill, Surface, Default };

/// A named set of particles of one type placed in one region (`solvent`, `mycell.surface`, `a`).
struct Group {
    std::string path;
    int type = 0;
    int region = 0;
    GroupSource source = GroupSource::Default;
    Vec3 position; // Single: absolute position
    Vec3 velocity;
    std::optional<double> mass;
    std::map<int, double> initial_overrides; // attribute index -> value
};

struct Plane {
    std::string name;
    Vec3 point;
    Vec3 normal; // points into the domain
};

struct Domain {
    bool bounded = false;
    Vec3 lower;
    Vec3 upper;
    std::vector<Plane> planes; // LEFT RIGHT FRONT BACK FLOOR CEILING when bounded

    int find_plane(const std::string& name) const;
};

enum class ProcessClass { Continuous, Rate, Flux, Discrete, Link };

const char* to_string(ProcessClass c);

struct ProcessInfo {
    std::string name;
    ProcessClass cls = ProcessClass::Continuous;
    std::string host;
    SourceSpan span;
};

/// Where a continuous column applies: one particle group or one region instance.
struct HostRef {
    bool region = false;
    int id = 0;
    friend bool operator==(const HostRef&, const HostRef&) = default;
};

struct ColumnBinding {
    HostRef host;
    ir::Program rate;
    ir::Program predicate; // empty = always
};

/// Reaction network of one host type: rows are continuous attributes, columns transformations.
struct ReactionNetwork {
    std::string host_name;
    bool region_host = false;
    int type = 0;
    std::vector<int> species; // attribute indices in the host layout, sorted by name
    std::vector<std::string> species_names;
    std::vector<std::string> process_names;
    std::vector<ProcessClass> process_class;
    std::vector<std::vector<int>> stoich; // [species][process]
    std::vector<std::vector<ColumnBinding>> bindings; // [process]

    std::size_t rows() const { return species.size(); }
    std::size_t cols() const { return process_names.size(); }
};

struct FluxRule {
    std::string name;
    std::string attribute;
    std::vector<int> source_groups;
    std::vector<int> sink_groups;
    bool symmetric = false;
    double cutoff = 0.0;
    ir::Program when;
    ir::Program rate;
    std::map<int, int> attr_by_type;
    SourceSpan span;
};

struct AttrConstraint {
    int attr = 0;
    double value = 0.0;
};

struct ParticlePattern {
    std::string binder;
    int type = -1;
    std::vector<int> groups; // empty = every group of `type`
    std::vector<AttrConstraint> constraints;
    int plane = -1; // link participants only

    bool matches_group(int group) const;
};

struct LinkSpec {
    enum class Kind { Expression, Hookean };
    std::string name;
    Kind kind = Kind::Expression;
    ir::Program force;
    ir::Program while_;
    double stiffness = 0.0;
};

struct DiscreteOutput {
    enum class Kind { Keep, Update, Create, Link };
    Kind kind = Kind::Keep;
    int role = -1;
    std::vector<std::pair<int, ir::Program>> updates;
    int type = -1;
    int group = -1;
    int link_spec = -1;
    int role_b = -1;
    int site_a = -1;
    int site_b = -1;
};

struct DiscreteRule {
    std::string name;
    std::vector<ParticlePattern> patterns;
    bool symmetric = false;
    ir::Program when;
    double cutoff = 0.0; // 0 = no distance cutoff extracted
    ir::Program probability; // empty = 1
    std::vector<DiscreteOutput> outputs;
    std::vector<bool> consumed;
    bool state_predicate = false; // single participant, predicate reads continuous values
    SourceSpan span;
};

struct LinkRule {
    enum class Mode { Explicit, Dynamic, NonBonded };
    std::string name;
    Mode mode = Mode::Explicit;
    ParticlePattern a;
    ParticlePattern b;
    bool symmetric = false;
    ir::Program when;
    double cutoff = 0.0;
    int spec = -1;
    SourceSpan span;
};

enum class KernelKind { Concentration, Charge, User };

struct FieldDef {
    std::string name;
    int region = -1; // region instance that declares it; -1 for fields created by path reads
    std::vector<int> groups;
    std::string attribute;
    std::map<int, int> attr_by_type;
    KernelKind kernel = KernelKind::Concentration;
    double smoothing = 0.0; // 0 = twice the mean source spacing, fixed at run start
    double support = std::numeric_limits<double>::infinity();
    double epsilon0 = 1.0 / (4.0 * 3.14159265358979323846);
    ir::Program user_kernel;
};

struct FillPlan {
    int group = 0;
    int region = 0; // region to fill (0 = root domain)
};

struct ImplicitDeclaration {
    std::string host;       // type name, or group path
    std::string attribute;
    bool product = true;     // false: implicit reactant
};

enum class ResolutionKind { LocalAttribute, RegionScalar, SpatialField, Unresolved };

const char* to_string(ResolutionKind k);

struct ScopeResolution {
    ResolutionKind kind = ResolutionKind::Unresolved;
    std::string detail;
};

struct ResolutionRecord {
    std::string process;
    std::string symbol;
    ScopeResolution resolution;
};

/// Output of the analyzer: immutable description of a model ready to instantiate.
class CompiledModel {
public:
    std::vector<ParticleType> particle_types;
    std::vector<RegionType> region_types; // [0] is the model root
    std::vector<RegionInstance> regions;   // [0] is the model root
    std::vector<Group> groups;
    std::vector<FillPlan> fills;
    Domain domain;
    std::map<std::string, double> parameters;

    std::vector<ReactionNetwork> networks;
    std::vector<FluxRule> fluxes;
    std::vector<DiscreteRule> discrete;
    std::vector<LinkSpec> link_specs;
    std::vector<LinkRule> link_rules;
    std::vector<FieldDef> fields;
    std::vector<std::vector<std::optional<DpdParams>>> pair_params;

    std::vector<ProcessInfo> processes;
    std::vector<ImplicitDeclaration> implicit;
    std::vector<ResolutionRecord> resolutions;
    std::vector<std::string> warnings;

    std::size_t region_value_count() const;
    int find_particle_type(const std::string& name) const;
    int find_group(const std::string& path) const;
    int find_region(const std::string& path) const;
    const ReactionNetwork* find_network(const std::string& host) const;
    /// Qualified names of every homogeneous region value, in C-vector order.
    std::vector<std::string> region_value_names() const;
};

} // namespace mml
