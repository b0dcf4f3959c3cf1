#pragma once

#include "mml/diagnostics.hpp"

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mml::ast {

enum class ExprKind {
    Number,    // 1.5
    Name,      // k, mycell.surface.ARecpt
    Vector,    // [20, 20, 0]
    Unary,     // -x, !p
    Binary,    // a + b, x ** 2, dist(a,b) < 5
    Call,      // exp(x), particle(0,0,0,mass=1), fill(type=Water)
    Index,     // BoundingPlanes[FLOOR]
    Record,    // Sphere { radius:5, resolution:1 }
    Attribute, // conc, const conc(5.0), amount(1.23), site(empty)
};

struct RecordItem;

struct Expr {
    ExprKind kind = ExprKind::Number;
    SourceSpan span;
    double number = 0.0;
    /// Operator for Unary/Binary, callee for Call, type name for Record, `conc|amount|site` for Attribute.
    std::string text;
    std::vector<std::string> path; // Name
    bool is_const = false;         // Attribute
    std::vector<Expr> args;
    /// Parallel to `args` for Call: empty string for positional arguments.
    std::vector<std::string> arg_names;
    std::vector<RecordItem> items; // Record

    std::string dotted() const;
};

struct ProcDecl;
struct LinkDecl;

/// One entry of a `{ ... }` block: `name : value`, `name = value`, or a nested proc/link.
struct RecordItem {
    enum class Kind { Member, Proc, Link };
    Kind kind = Kind::Member;
    SourceSpan span;
    std::vector<std::string> target;
    char separator = ':';
    Expr value;
    std::shared_ptr<ProcDecl> proc;
    std::shared_ptr<LinkDecl> link;
};

/// A process input/output or link participant.
struct Term {
    enum class Kind {
        Pattern, // [coef] [binder:] path [index] [{constraints}]
        With,    // binder{with attr=value, ...}
        Link,    // link(a.s1, b.s2){ force }
    };
    Kind kind = Kind::Pattern;
    SourceSpan span;
    int coefficient = 1;
    bool explicit_coefficient = false;
    std::string binder;
    std::optional<Expr> pattern; // Name or Index expression
    std::vector<RecordItem> constraints;
    std::shared_ptr<LinkDecl> link;
};

struct ProcDecl {
    SourceSpan span;
    std::string name;
    std::vector<Term> inputs;
    std::vector<Term> outputs;
    std::optional<Expr> when;
    std::optional<Expr> while_;
    std::optional<Expr> body;
};

struct LinkDecl {
    SourceSpan span;
    std::vector<Term> participants;
    std::optional<Expr> when;
    std::optional<Expr> while_;
    Expr body;
};

struct TypeDecl {
    SourceSpan span;
    std::string name;
    std::string base;
    std::vector<RecordItem> body;
};

/// `symbol : value;` or an anonymous `Type{...};`. Also covers attribute declarations on paths
/// (`mycell.body.Rho : conc(1.5)`) and model parameters (`k : 0.5`).
struct InstanceDecl {
    SourceSpan span;
    std::vector<std::string> target; // empty for anonymous instances
    Expr value;
};

/// `target : fill(type=T)`
struct FillDecl {
    SourceSpan span;
    std::vector<std::string> target;
    Expr fill;
};

using Declaration = std::variant<TypeDecl, ProcDecl, LinkDecl, InstanceDecl, FillDecl>;

struct SyntaxTree {
    std::vector<Declaration> declarations;
};

const SourceSpan& span_of(const Declaration& decl);

/// Structural equality ignoring source spans.
bool equivalent(const Expr& a, const Expr& b);
bool equivalent(const SyntaxTree& a, const SyntaxTree& b);

} // namespace mml::ast
