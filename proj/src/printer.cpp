#include "mml/printer.hpp"

#include <charconv>
#include <sstream>

namespace mml {

namespace {

using namespace ast;

std::string join(const std::vector<std::string>& path)
{
    std::string s;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i)
            s += '.';
        s += path[i];
    }
    return s;
}

void print_items(std::ostream& os, const std::vector<RecordItem>& items, int indent);
void print_proc(std::ostream& os, const ProcDecl& p, int indent);
void print_link(std::ostream& os, const LinkDecl& l, int indent);

void print_expr(std::ostream& os, const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Number: os << format_number(e.number); break;
    case ExprKind::Name: os << join(e.path); break;
    case ExprKind::Vector:
        os << '[';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i)
                os << ", ";
            print_expr(os, e.args[i]);
        }
        os << ']';
        break;
    case ExprKind::Unary:
        os << e.text << '(';
        print_expr(os, e.args[0]);
        os << ')';
        break;
    case ExprKind::Binary:
        os << '(';
        print_expr(os, e.args[0]);
        os << ' ' << e.text << ' ';
        print_expr(os, e.args[1]);
        os << ')';
        break;
    case ExprKind::Call:
        os << e.text << '(';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i)
                os << ", ";
            if (i < e.arg_names.size() && !e.arg_names[i].empty())
                os << e.arg_names[i] << '=';
            print_expr(os, e.args[i]);
        }
        os << ')';
        break;
    case ExprKind::Index:
        print_expr(os, e.args[0]);
        os << '[';
        print_expr(os, e.args[1]);
        os << ']';
        break;
    case ExprKind::Record:
        os << e.text << " {";
        print_items(os, e.items, -1);
        os << '}';
        break;
    case ExprKind::Attribute:
        if (e.is_const)
            os << "const ";
        os << e.text;
        if (!e.args.empty()) {
            os << '(';
            print_expr(os, e.args[0]);
            os << ')';
        }
        break;
    }
}

void pad(std::ostream& os, int indent)
{
    for (int i = 0; i < indent; ++i)
        os << "    ";
}

// indent < 0 prints the items inline.
void print_items(std::ostream& os, const std::vector<RecordItem>& items, int indent)
{
    for (const auto& item : items) {
        if (indent >= 0) {
            os << '\n';
            pad(os, indent);
        } else {
            os << ' ';
        }
        switch (item.kind) {
        case RecordItem::Kind::Member:
            os << join(item.target) << item.separator << ' ';
            print_expr(os, item.value);
            break;
        case RecordItem::Kind::Proc: print_proc(os, *item.proc, indent < 0 ? 0 : indent); break;
        case RecordItem::Kind::Link: print_link(os, *item.link, indent < 0 ? 0 : indent); break;
        }
        os << ';';
    }
    if (indent >= 0 && !items.empty()) {
        os << '\n';
        pad(os, indent - 1);
    } else if (!items.empty()) {
        os << ' ';
    }
}

void print_term(std::ostream& os, const Term& t)
{
    if (t.explicit_coefficient)
        os << t.coefficient << ' ';
    switch (t.kind) {
    case Term::Kind::Pattern:
        if (!t.binder.empty())
            os << t.binder << ':';
        print_expr(os, *t.pattern);
        if (!t.constraints.empty()) {
            os << " {";
            print_items(os, t.constraints, -1);
            os << '}';
        }
        break;
    case Term::Kind::With:
        os << t.binder << " {with";
        print_items(os, t.constraints, -1);
        os << '}';
        break;
    case Term::Kind::Link: print_link(os, *t.link, 0); break;
    }
}

void print_terms(std::ostream& os, const std::vector<Term>& terms)
{
    os << '(';
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i)
            os << ", ";
        print_term(os, terms[i]);
    }
    os << ')';
}

void print_predicates(std::ostream& os, const std::optional<Expr>& when, const std::optional<Expr>& while_)
{
    if (when) {
        os << " when (";
        print_expr(os, *when);
        os << ')';
    }
    if (while_) {
        os << " while (";
        print_expr(os, *while_);
        os << ')';
    }
}

void print_proc(std::ostream& os, const ProcDecl& p, int)
{
    os << "proc ";
    if (!p.name.empty())
        os << p.name << ' ';
    print_terms(os, p.inputs);
    os << " -> ";
    print_terms(os, p.outputs);
    print_predicates(os, p.when, p.while_);
    if (p.body) {
        os << " {";
        print_expr(os, *p.body);
        os << '}';
    }
}

void print_link(std::ostream& os, const LinkDecl& l, int)
{
    os << "link";
    print_terms(os, l.participants);
    print_predicates(os, l.when, l.while_);
    os << " {";
    print_expr(os, l.body);
    os << '}';
}

// ---- structural equality ---------------------------------------------------------------------

bool equivalent_items(const std::vector<RecordItem>& a, const std::vector<RecordItem>& b);
bool equivalent_proc(const ProcDecl& a, const ProcDecl& b);
bool equivalent_link(const LinkDecl& a, const LinkDecl& b);

bool equivalent_opt(const std::optional<Expr>& a, const std::optional<Expr>& b)
{
    if (a.has_value() != b.has_value())
        return false;
    return !a || equivalent(*a, *b);
}

bool equivalent_term(const Term& a, const Term& b)
{
    if (a.kind != b.kind || a.coefficient != b.coefficient || a.binder != b.binder)
        return false;
    if (!equivalent_opt(a.pattern, b.pattern) || !equivalent_items(a.constraints, b.constraints))
        return false;
    if (a.link || b.link)
        return a.link && b.link && equivalent_link(*a.link, *b.link);
    return true;
}

bool equivalent_terms(const std::vector<Term>& a, const std::vector<Term>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!equivalent_term(a[i], b[i]))
            return false;
    return true;
}

bool equivalent_proc(const ProcDecl& a, const ProcDecl& b)
{
    return a.name == b.name && equivalent_terms(a.inputs, b.inputs) && equivalent_terms(a.outputs, b.outputs) &&
           equivalent_opt(a.when, b.when) && equivalent_opt(a.while_, b.while_) && equivalent_opt(a.body, b.body);
}

bool equivalent_link(const LinkDecl& a, const LinkDecl& b)
{
    return equivalent_terms(a.participants, b.participants) && equivalent_opt(a.when, b.when) &&
           equivalent_opt(a.while_, b.while_) && equivalent(a.body, b.body);
}

bool equivalent_items(const std::vector<RecordItem>& a, const std::vector<RecordItem>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.kind != y.kind)
            return false;
        switch (x.kind) {
        case RecordItem::Kind::Member:
            if (x.target != y.target || x.separator != y.separator || !equivalent(x.value, y.value))
                return false;
            break;
        case RecordItem::Kind::Proc:
            if (!equivalent_proc(*x.proc, *y.proc))
                return false;
            break;
        case RecordItem::Kind::Link:
            if (!equivalent_link(*x.link, *y.link))
                return false;
            break;
        }
    }
    return true;
}

} // namespace

std::string format_number(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    std::string s(buf, ptr);
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

std::string to_source(const Expr& expr)
{
    std::ostringstream os;
    print_expr(os, expr);
    return os.str();
}

std::string to_source(const SyntaxTree& tree)
{
    std::ostringstream os;
    for (const auto& decl : tree.declarations) {
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, TypeDecl>) {
                    os << "type " << d.name << " : " << d.base << " {";
                    print_items(os, d.body, 1);
                    os << "};\n";
                } else if constexpr (std::is_same_v<T, ProcDecl>) {
                    print_proc(os, d, 0);
                    os << ";\n";
                } else if constexpr (std::is_same_v<T, LinkDecl>) {
                    print_link(os, d, 0);
                    os << ";\n";
                } else if constexpr (std::is_same_v<T, InstanceDecl>) {
                    if (!d.target.empty())
                        os << join(d.target) << " : ";
                    print_expr(os, d.value);
                    os << ";\n";
                } else {
                    os << join(d.target) << " : ";
                    print_expr(os, d.fill);
                    os << ";\n";
                }
            },
            decl);
    }
    return os.str();
}

namespace ast {

std::string Expr::dotted() const { return join(path); }

const SourceSpan& span_of(const Declaration& decl)
{
    return std::visit([](const auto& d) -> const SourceSpan& { return d.span; }, decl);
}

bool equivalent(const Expr& a, const Expr& b)
{
    if (a.kind != b.kind || a.text != b.text || a.path != b.path || a.is_const != b.is_const)
        return false;
    if (a.kind == ExprKind::Number && a.number != b.number)
        return false;
    if (a.args.size() != b.args.size() || a.arg_names != b.arg_names)
        return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!equivalent(a.args[i], b.args[i]))
            return false;
    return equivalent_items(a.items, b.items);
}

bool equivalent(const SyntaxTree& a, const SyntaxTree& b)
{
    if (a.declarations.size() != b.declarations.size())
        return false;
    for (std::size_t i = 0; i < a.declarations.size(); ++i) {
        const auto& x = a.declarations[i];
        const auto& y = b.declarations[i];
        if (x.index() != y.index())
            return false;
        bool same = std::visit(
            [&](const auto& dx) {
                using T = std::decay_t<decltype(dx)>;
                const auto& dy = std::get<T>(y);
                if constexpr (std::is_same_v<T, TypeDecl>)
                    return dx.name == dy.name && dx.base == dy.base && equivalent_items(dx.body, dy.body);
                else if constexpr (std::is_same_v<T, ProcDecl>)
                    return equivalent_proc(dx, dy);
                else if constexpr (std::is_same_v<T, LinkDecl>)
                    return equivalent_link(dx, dy);
                else if constexpr (std::is_same_v<T, InstanceDecl>)
                    return dx.target == dy.target && equivalent(dx.value, dy.value);
                else
                    return dx.target == dy.target && equivalent(dx.fill, dy.fill);
            },
            x);
        if (!same)
            return false;
    }
    return true;
}

} // namespace ast

} // namespace mml
