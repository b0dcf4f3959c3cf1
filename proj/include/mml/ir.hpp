#pragma once

#include "mml/vec3.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mml {

class SimState;
class FieldEngine;
class CompiledModel;

namespace ir {

enum class Op : std::uint8_t {
    Const,
    Load,
    Neg,
    Not,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Min,
    Max,
};

struct Instr {
    Op op = Op::Const;
    std::uint32_t arg = 0;
    double value = 0.0;
};

/// What a Load instruction reads.
enum class Source : std::uint8_t {
    RoleAttr,    // attribute `index` of participant `role`
    RegionValue, // slot `index` of the homogeneous region store (C vector)
    Field,       // field `index` at the position of `role`, or at the midpoint of roles 0 and 1
    Distance,    // |role - role_b|, or |role - point| when role_b < 0
    Random,      // uniform [0,1) from the evaluation's random stream
    KernelValue, // A_i inside a user field kernel
    KernelDist,  // |r - r_i| inside a user field kernel
};

struct Binding {
    Source source = Source::RoleAttr;
    int role = 0;
    int role_b = -1;
    int index = 0;
    bool midpoint = false;
    Vec3 point;
};

/// Stack-machine program compiled from a rate, probability, predicate or force body.
struct Program {
    std::vector<Instr> code;
    std::vector<Binding> bindings;
    std::string text;
    int max_stack = 0;

    bool empty() const { return code.empty(); }
    bool uses(Source s) const;
    /// Value of a program with no loads.
    std::optional<double> constant() const;
};

/// A participant an expression is evaluated against.
struct Role {
    enum class Kind : std::uint8_t { None, Particle, Region, Point, Plane };
    Kind kind = Kind::None;
    std::size_t index = 0; // dense particle index, region instance, or plane
    Vec3 position;
    Vec3 normal; // planes
};

/// Counter-based uniform stream used by `rand()`.
struct RandomStream {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    double next();
};

struct EvalContext {
    const SimState* state = nullptr;
    const FieldEngine* fields = nullptr;
    std::array<Role, 4> roles{};
    RandomStream* random = nullptr;
    double kernel_value = 0.0;
    double kernel_dist = 0.0;
};

double evaluate(const Program& program, const EvalContext& ctx);

/// Distance between two roles. Plane roles measure perpendicular distance.
double role_distance(const Role& a, const Role& b);

} // namespace ir
} // namespace mml
