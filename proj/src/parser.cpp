#include "mml/parser.hpp"

#include <cmath>

namespace mml {

namespace {

using namespace ast;

class Parser {
public:
    explicit Parser(std::span<const Token> tokens) : toks_(tokens)
    {
        end_.kind = TokenKind::End;
        if (!toks_.empty()) {
            end_.span = toks_.back().span;
            end_.span.col += static_cast<int>(toks_.back().text.size());
            end_.span.length = 0;
        }
    }

    SyntaxTree parse_tree()
    {
        SyntaxTree tree;
        while (!at_end())
            tree.declarations.push_back(parse_declaration());
        return tree;
    }

    Expr parse_single_expression()
    {
        Expr e = parse_expr();
        if (!at_end())
            fail("expected end of expression");
        return e;
    }

private:
    std::span<const Token> toks_;
    std::size_t pos_ = 0;
    Token end_;

    const Token& peek(std::size_t ahead = 0) const
    {
        return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : end_;
    }
    bool at_end() const { return pos_ >= toks_.size(); }
    const Token& next()
    {
        const Token& t = peek();
        if (!at_end())
            ++pos_;
        return t;
    }
    const Token& previous() const { return toks_[pos_ - 1]; }

    [[noreturn]] void fail(const std::string& what) const
    {
        const Token& t = peek();
        std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        throw SyntaxError(t.span, what + ", found " + found);
    }

    bool accept_punct(std::string_view p)
    {
        if (peek().is_punct(p)) {
            next();
            return true;
        }
        return false;
    }
    bool accept_keyword(std::string_view k)
    {
        if (peek().is_keyword(k)) {
            next();
            return true;
        }
        return false;
    }
    const Token& expect_punct(std::string_view p)
    {
        if (!peek().is_punct(p))
            fail("expected '" + std::string(p) + "'");
        return next();
    }
    const Token& expect_identifier(const char* what = "identifier")
    {
        if (peek().kind != TokenKind::Identifier)
            fail(std::string("expected ") + what);
        return next();
    }

    bool last_was_brace() const { return pos_ > 0 && previous().is_punct("}"); }

    // `;` is required after a declaration unless the declaration closed with `}`.
    void finish_statement()
    {
        if (accept_punct(";"))
            return;
        if (last_was_brace())
            return;
        fail("expected ';'");
    }

    Declaration parse_declaration()
    {
        const Token& t = peek();
        if (t.is_keyword("type"))
            return parse_type_decl();
        if (t.is_keyword("proc")) {
            auto p = parse_proc();
            finish_statement();
            return p;
        }
        if (t.is_keyword("link")) {
            auto l = parse_link_decl();
            finish_statement();
            return l;
        }
        if (t.kind == TokenKind::Identifier || t.is_keyword("particle")) {
            SourceSpan span = t.span;
            if (peek(1).is_punct("{") || t.is_keyword("particle")) {
                InstanceDecl inst;
                inst.span = span;
                inst.value = parse_value();
                finish_statement();
                return inst;
            }
            auto target = parse_path();
            expect_punct(":");
            Expr value = parse_value();
            finish_statement();
            if (value.kind == ExprKind::Call && value.text == "fill") {
                FillDecl fill;
                fill.span = span;
                fill.target = std::move(target);
                fill.fill = std::move(value);
                return fill;
            }
            InstanceDecl inst;
            inst.span = span;
            inst.target = std::move(target);
            inst.value = std::move(value);
            return inst;
        }
        fail("expected a declaration");
    }

    std::vector<std::string> parse_path()
    {
        std::vector<std::string> path;
        path.push_back(expect_identifier().text);
        while (peek().is_punct(".") && peek(1).kind == TokenKind::Identifier) {
            next();
            path.push_back(next().text);
        }
        return path;
    }

    TypeDecl parse_type_decl()
    {
        TypeDecl decl;
        decl.span = next().span; // 'type'
        decl.name = expect_identifier("type name").text;
        expect_punct(":");
        if (peek().is_keyword("particle") || peek().kind == TokenKind::Identifier)
            decl.base = next().text;
        else
            fail("expected base type");
        if (accept_punct("{"))
            decl.body = parse_items();
        finish_statement();
        return decl;
    }

    // Items of a `{ ... }` block up to and including the closing brace.
    std::vector<RecordItem> parse_items()
    {
        std::vector<RecordItem> items;
        while (!accept_punct("}")) {
            if (at_end())
                fail("expected '}'");
            RecordItem item;
            item.span = peek().span;
            if (peek().is_keyword("proc")) {
                item.kind = RecordItem::Kind::Proc;
                item.proc = std::make_shared<ProcDecl>(parse_proc());
            } else if (peek().is_keyword("link")) {
                item.kind = RecordItem::Kind::Link;
                item.link = std::make_shared<LinkDecl>(parse_link_decl());
            } else {
                if (peek().kind != TokenKind::Identifier && peek().kind != TokenKind::Keyword)
                    fail("expected member name");
                item.target.push_back(next().text);
                while (peek().is_punct(".") && peek(1).kind == TokenKind::Identifier) {
                    next();
                    item.target.push_back(next().text);
                }
                if (accept_punct(":"))
                    item.separator = ':';
                else if (accept_punct("="))
                    item.separator = '=';
                else
                    fail("expected ':' or '='");
                item.value = parse_value();
            }
            items.push_back(std::move(item));
            if (accept_punct(";") || accept_punct(","))
                continue;
            if (peek().is_punct("}") || last_was_brace())
                continue;
            fail("expected ';', ',' or '}'");
        }
        return items;
    }

    // Right-hand side of a member or instance declaration.
    Expr parse_value()
    {
        const Token& t = peek();
        if (t.is_keyword("const")) {
            SourceSpan span = next().span;
            if (!peek().is_keyword("conc") && !peek().is_keyword("amount"))
                fail("expected 'conc' or 'amount' after 'const'");
            Expr e = parse_attribute();
            e.is_const = true;
            e.span = span;
            return e;
        }
        if (t.is_keyword("conc") || t.is_keyword("amount") || t.is_keyword("site"))
            return parse_attribute();
        if (t.is_keyword("fill")) {
            Expr e;
            e.kind = ExprKind::Call;
            e.span = next().span;
            e.text = "fill";
            expect_punct("(");
            parse_args(e);
            return e;
        }
        if (t.is_keyword("particle")) {
            Expr e;
            e.span = next().span;
            if (accept_punct("(")) {
                e.kind = ExprKind::Call;
                e.text = "particle";
                parse_args(e);
            } else if (accept_punct("{")) {
                e.kind = ExprKind::Record;
                e.text = "particle";
                e.items = parse_items();
            } else {
                e.kind = ExprKind::Name;
                e.path = {"particle"};
            }
            return e;
        }
        return parse_expr();
    }

    Expr parse_attribute()
    {
        Expr e;
        e.kind = ExprKind::Attribute;
        e.span = peek().span;
        e.text = next().text;
        if (e.text == "site") {
            expect_punct("(");
            Expr state;
            state.kind = ExprKind::Name;
            state.span = peek().span;
            state.path = {expect_identifier("site state").text};
            e.args.push_back(std::move(state));
            expect_punct(")");
        } else if (accept_punct("(")) {
            e.args.push_back(parse_expr());
            expect_punct(")");
        }
        return e;
    }

    // Arguments after '(' up to and including ')'.
    void parse_args(Expr& call)
    {
        if (accept_punct(")"))
            return;
        for (;;) {
            if ((peek().kind == TokenKind::Identifier || peek().kind == TokenKind::Keyword) &&
                peek(1).is_punct("=")) {
                call.arg_names.push_back(next().text);
                next(); // '='
                call.args.push_back(parse_value());
            } else {
                call.arg_names.emplace_back();
                call.args.push_back(parse_expr());
            }
            if (accept_punct(")"))
                return;
            expect_punct(",");
        }
    }

    ProcDecl parse_proc()
    {
        ProcDecl p;
        p.span = next().span; // 'proc'
        if (peek().kind == TokenKind::Identifier)
            p.name = next().text;
        p.inputs = parse_term_list(false);
        if (peek().kind != TokenKind::Arrow)
            fail("expected '->'");
        next();
        p.outputs = parse_term_list(true);
        if (p.inputs.empty() && p.outputs.empty())
            throw SyntaxError(p.span, "empty transformation: a process needs at least one input or output");
        parse_predicates(p.when, p.while_);
        if (accept_punct("{"))
            p.body = parse_block_body();
        return p;
    }

    void parse_predicates(std::optional<Expr>& when, std::optional<Expr>& while_)
    {
        if (accept_keyword("when")) {
            expect_punct("(");
            when = parse_expr();
            expect_punct(")");
        }
        if (accept_keyword("while")) {
            expect_punct("(");
            while_ = parse_expr();
            expect_punct(")");
        }
    }

    // Body after '{': exactly one expression, optional ';', then '}'.
    Expr parse_block_body()
    {
        if (peek().is_punct("}"))
            fail("expected expression in body");
        Expr e = parse_expr();
        accept_punct(";");
        expect_punct("}");
        return e;
    }

    LinkDecl parse_link_decl()
    {
        LinkDecl l;
        l.span = next().span; // 'link'
        expect_punct("(");
        if (!peek().is_punct(")")) {
            for (;;) {
                l.participants.push_back(parse_term(false));
                if (!accept_punct(","))
                    break;
            }
        }
        expect_punct(")");
        if (l.participants.size() < 2)
            throw SyntaxError(l.span, "a link needs at least two participants");
        parse_predicates(l.when, l.while_);
        expect_punct("{");
        l.body = parse_block_body();
        return l;
    }

    std::vector<Term> parse_term_list(bool outputs)
    {
        std::vector<Term> terms;
        expect_punct("(");
        if (accept_punct(")"))
            return terms;
        for (;;) {
            terms.push_back(parse_term(outputs));
            if (accept_punct(")"))
                return terms;
            expect_punct(",");
        }
    }

    Term parse_term(bool output)
    {
        Term term;
        term.span = peek().span;
        if (peek().kind == TokenKind::Number) {
            const Token& n = next();
            if (n.number < 1.0 || n.number != std::floor(n.number) || n.text.find_first_of(".eE") != std::string::npos)
                throw SyntaxError(n.span, "stoichiometric coefficient must be a positive integer, found '" + n.text + "'");
            term.coefficient = static_cast<int>(n.number);
            term.explicit_coefficient = true;
        }
        if (output && peek().is_keyword("link")) {
            term.kind = Term::Kind::Link;
            term.link = std::make_shared<LinkDecl>(parse_link_decl());
            return term;
        }
        if (peek().kind == TokenKind::Identifier && peek(1).is_punct(":")) {
            term.binder = next().text;
            next(); // ':'
            term.pattern = parse_pattern_path();
            if (accept_punct("{"))
                term.constraints = parse_items();
            return term;
        }
        if (peek().kind != TokenKind::Identifier)
            fail("expected a process term");
        term.pattern = parse_pattern_path();
        if (accept_punct("{")) {
            if (accept_keyword("with")) {
                if (!output)
                    throw SyntaxError(term.span, "'with' updates are only allowed in process outputs");
                if (term.pattern->kind != ExprKind::Name || term.pattern->path.size() != 1)
                    throw SyntaxError(term.span, "'with' must follow a single binder name");
                term.kind = Term::Kind::With;
                term.binder = term.pattern->path.front();
                term.pattern.reset();
            }
            term.constraints = parse_items();
        }
        return term;
    }

    Expr parse_pattern_path()
    {
        Expr e;
        e.kind = ExprKind::Name;
        e.span = peek().span;
        e.path = parse_path();
        while (peek().is_punct("[")) {
            Expr idx;
            idx.kind = ExprKind::Index;
            idx.span = next().span;
            idx.args.push_back(std::move(e));
            idx.args.push_back(parse_expr());
            expect_punct("]");
            e = std::move(idx);
        }
        return e;
    }

    // ---- expressions -------------------------------------------------------------------------

    Expr binary(std::string op, Expr lhs, Expr rhs, SourceSpan span)
    {
        Expr e;
        e.kind = ExprKind::Binary;
        e.span = std::move(span);
        e.text = std::move(op);
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }

    Expr parse_expr() { return parse_or(); }

    Expr parse_or()
    {
        Expr lhs = parse_and();
        while (peek().is_punct("||")) {
            SourceSpan span = next().span;
            lhs = binary("||", std::move(lhs), parse_and(), span);
        }
        return lhs;
    }

    Expr parse_and()
    {
        Expr lhs = parse_comparison();
        while (peek().is_punct("&&")) {
            SourceSpan span = next().span;
            lhs = binary("&&", std::move(lhs), parse_comparison(), span);
        }
        return lhs;
    }

    Expr parse_comparison()
    {
        Expr lhs = parse_additive();
        for (auto op : {"<", "<=", ">", ">=", "==", "!="}) {
            if (peek().is_punct(op)) {
                SourceSpan span = next().span;
                return binary(op, std::move(lhs), parse_additive(), span);
            }
        }
        return lhs;
    }

    Expr parse_additive()
    {
        Expr lhs = parse_multiplicative();
        while (peek().is_punct("+") || peek().is_punct("-")) {
            const Token& op = next();
            lhs = binary(op.text, std::move(lhs), parse_multiplicative(), op.span);
        }
        return lhs;
    }

    Expr parse_multiplicative()
    {
        Expr lhs = parse_unary();
        while (peek().is_punct("*") || peek().is_punct("/")) {
            const Token& op = next();
            lhs = binary(op.text, std::move(lhs), parse_unary(), op.span);
        }
        return lhs;
    }

    Expr parse_unary()
    {
        if (peek().is_punct("-") || peek().is_punct("!")) {
            const Token& op = next();
            Expr e;
            e.kind = ExprKind::Unary;
            e.span = op.span;
            e.text = op.text;
            e.args.push_back(parse_unary());
            return e;
        }
        return parse_power();
    }

    // `**` binds tighter than unary minus and is right-associative.
    Expr parse_power()
    {
        Expr base = parse_postfix();
        if (peek().is_punct("**")) {
            SourceSpan span = next().span;
            return binary("**", std::move(base), parse_unary(), span);
        }
        return base;
    }

    Expr parse_postfix()
    {
        Expr e = parse_primary();
        while (peek().is_punct("[")) {
            Expr idx;
            idx.kind = ExprKind::Index;
            idx.span = next().span;
            idx.args.push_back(std::move(e));
            idx.args.push_back(parse_expr());
            expect_punct("]");
            e = std::move(idx);
        }
        return e;
    }

    Expr parse_primary()
    {
        const Token& t = peek();
        if (t.kind == TokenKind::Number) {
            Expr e;
            e.kind = ExprKind::Number;
            e.span = t.span;
            e.number = t.number;
            next();
            return e;
        }
        if (t.is_punct("(")) {
            next();
            Expr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (t.is_punct("[")) {
            Expr e;
            e.kind = ExprKind::Vector;
            e.span = next().span;
            if (!accept_punct("]")) {
                for (;;) {
                    e.args.push_back(parse_expr());
                    if (accept_punct("]"))
                        break;
                    expect_punct(",");
                }
            }
            return e;
        }
        if (t.kind == TokenKind::Identifier) {
            Expr e;
            e.span = t.span;
            e.path = parse_path();
            if (peek().is_punct("(")) {
                next();
                e.kind = ExprKind::Call;
                e.text = join(e.path);
                e.path.clear();
                parse_args(e);
                return e;
            }
            if (peek().is_punct("{")) {
                next();
                e.kind = ExprKind::Record;
                e.text = join(e.path);
                e.path.clear();
                e.items = parse_items();
                return e;
            }
            e.kind = ExprKind::Name;
            return e;
        }
        fail("expected expression");
    }

    static std::string join(const std::vector<std::string>& path)
    {
        std::string s;
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (i)
                s += '.';
            s += path[i];
        }
        return s;
    }
};

} // namespace

ast::SyntaxTree parse(std::span<const Token> tokens)
{
    Parser p(tokens);
    return p.parse_tree();
}

ast::SyntaxTree parse_source(std::string_view source, const std::string& file_name)
{
    auto tokens = tokenize(source, file_name);
    return parse(tokens);
}

ast::Expr parse_expression(std::string_view source)
{
    auto tokens = tokenize(source);
    Parser p(tokens);
    return p.parse_single_expression();
}

} // namespace mml
