#include "ccport/checkedc.hpp"

#include "ccport/errors.hpp"
#include "ccport/lexer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace ccport {

std::string_view to_string(PointerKind kind) {
    switch (kind) {
    case PointerKind::Ptr:
        return "ptr";
    case PointerKind::Arr:
        return "arr";
    case PointerKind::NtArr:
        return "nt_arr";
    case PointerKind::Unchecked:
        return "unchecked";
    }
    return "?";
}

PointerKind pointer_kind_from_string(std::string_view s) {
    if (s == "ptr" || s == "_Ptr")
        return PointerKind::Ptr;
    if (s == "arr" || s == "_Array_ptr")
        return PointerKind::Arr;
    if (s == "nt_arr" || s == "_Nt_array_ptr")
        return PointerKind::NtArr;
    if (s == "unchecked")
        return PointerKind::Unchecked;
    throw Error("unknown pointer kind: " + std::string(s));
}

std::string_view to_string(SiteScope scope) {
    switch (scope) {
    case SiteScope::Param:
        return "param";
    case SiteScope::Local:
        return "local";
    case SiteScope::Global:
        return "global";
    case SiteScope::Field:
        return "field";
    case SiteScope::Return:
        return "return";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Bounds expressions

namespace {

class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {
        try {
            toks_ = tokenize(text_);
        } catch (const ParseError &e) {
            throw BoundsSyntaxError(std::string("bad bounds text '") + std::string(text) + "': " + e.what());
        }
    }

    BoundsAnnotation bounds() {
        if (toks_.empty())
            return BoundsAnnotation::none();
        const Token &head = next();
        if (!head.is_ident())
            fail("expected count, byte_count or bounds");
        BoundsAnnotation out;
        if (head.text == "count")
            out.form = BoundsAnnotation::Form::Count;
        else if (head.text == "byte_count")
            out.form = BoundsAnnotation::Form::ByteCount;
        else if (head.text == "bounds")
            out.form = BoundsAnnotation::Form::Bounds;
        else
            fail("unknown bounds form '" + std::string(head.text) + "'");
        expect("(");
        out.exprs.push_back(expr());
        if (out.form == BoundsAnnotation::Form::Bounds) {
            expect(",");
            out.exprs.push_back(expr());
        }
        expect(")");
        if (pos_ != toks_.size())
            fail("trailing text");
        return out;
    }

    Expr whole_expr() {
        if (toks_.empty())
            fail("empty expression");
        Expr e = expr();
        if (pos_ != toks_.size())
            fail("trailing text");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string &what) const {
        throw BoundsSyntaxError("bad bounds text '" + std::string(text_) + "': " + what);
    }

    const Token &next() {
        if (pos_ >= toks_.size())
            fail("unexpected end");
        return toks_[pos_++];
    }

    bool at(std::string_view p) const { return pos_ < toks_.size() && toks_[pos_].is(p); }

    void expect(std::string_view p) {
        if (!at(p))
            fail("expected '" + std::string(p) + "'");
        ++pos_;
    }

    Expr expr() {
        Expr lhs = term();
        while (at("+") || at("-")) {
            auto kind = toks_[pos_++].text == "+" ? Expr::Kind::Add : Expr::Kind::Sub;
            lhs = Expr::binary(kind, std::move(lhs), term());
        }
        return lhs;
    }

    Expr term() {
        Expr lhs = atom();
        while (at("*") || at("/")) {
            auto kind = toks_[pos_++].text == "*" ? Expr::Kind::Mul : Expr::Kind::Div;
            lhs = Expr::binary(kind, std::move(lhs), atom());
        }
        return lhs;
    }

    Expr atom() {
        const Token &t = next();
        if (t.is("(")) {
            Expr inner = expr();
            expect(")");
            return inner;
        }
        if (t.kind == TokenKind::Identifier) {
            if (is_c_keyword(t.text))
                fail("keyword '" + std::string(t.text) + "' in bounds");
            if (at("("))
                fail("call in bounds expression");
            return Expr::ident(std::string(t.text));
        }
        if (t.kind == TokenKind::Number) {
            std::string_view s = t.text;
            bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
            std::size_t i = hex ? 2 : 0;
            std::size_t digits = i;
            while (digits < s.size() && (hex ? std::isxdigit(static_cast<unsigned char>(s[digits]))
                                             : std::isdigit(static_cast<unsigned char>(s[digits]))))
                ++digits;
            if (digits == i)
                fail("bad integer literal");
            for (std::size_t k = digits; k < s.size(); ++k)
                if (std::string_view("uUlL").find(s[k]) == std::string_view::npos)
                    fail("non-integer literal '" + std::string(s) + "'");
            return Expr::integer(std::string(s));
        }
        fail("unexpected '" + std::string(t.text) + "'");
    }

    std::string_view text_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

int precedence(Expr::Kind k) {
    switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
        return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
        return 2;
    default:
        return 3;
    }
}

char op_char(Expr::Kind k) {
    switch (k) {
    case Expr::Kind::Add:
        return '+';
    case Expr::Kind::Sub:
        return '-';
    case Expr::Kind::Mul:
        return '*';
    case Expr::Kind::Div:
        return '/';
    default:
        return '?';
    }
}

void collect_identifiers(const Expr &e, std::set<std::string> &out) {
    if (e.kind == Expr::Kind::Ident)
        out.insert(e.atom);
    for (const auto &o : e.operands)
        collect_identifiers(o, out);
}

void flatten(const Expr &e, Expr::Kind k, std::vector<const Expr *> &out) {
    if (e.kind == k) {
        flatten(e.operands[0], k, out);
        flatten(e.operands[1], k, out);
    } else {
        out.push_back(&e);
    }
}

std::string normalized(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::Ident:
    case Expr::Kind::Int:
        return e.atom;
    case Expr::Kind::Add:
    case Expr::Kind::Mul: {
        std::vector<const Expr *> parts;
        flatten(e, e.kind, parts);
        std::vector<std::string> texts;
        for (const Expr *p : parts) {
            std::string t = normalized(*p);
            texts.push_back(precedence(p->kind) < 3 ? "(" + t + ")" : t);
        }
        std::sort(texts.begin(), texts.end());
        std::string out;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (i)
                out.push_back(op_char(e.kind));
            out += texts[i];
        }
        return out;
    }
    case Expr::Kind::Sub:
    case Expr::Kind::Div: {
        auto side = [](const Expr &x) {
            std::string t = normalized(x);
            return precedence(x.kind) < 3 ? "(" + t + ")" : t;
        };
        return side(e.operands[0]) + op_char(e.kind) + side(e.operands[1]);
    }
    }
    return {};
}

std::string form_name(BoundsAnnotation::Form f) {
    switch (f) {
    case BoundsAnnotation::Form::Count:
        return "count";
    case BoundsAnnotation::Form::ByteCount:
        return "byte_count";
    case BoundsAnnotation::Form::Bounds:
        return "bounds";
    case BoundsAnnotation::Form::None:
        break;
    }
    return {};
}

} // namespace

BoundsAnnotation parse_bounds(std::string_view text) { return ExprParser(text).bounds(); }

Expr parse_expr(std::string_view text) { return ExprParser(text).whole_expr(); }

std::string print_expr(const Expr &e) {
    if (e.kind == Expr::Kind::Ident || e.kind == Expr::Kind::Int)
        return e.atom;
    int p = precedence(e.kind);
    const Expr &l = e.operands[0];
    const Expr &r = e.operands[1];
    std::string ls = print_expr(l);
    std::string rs = print_expr(r);
    if (precedence(l.kind) < p)
        ls = "(" + ls + ")";
    // the parser is left-associative, so an equal-precedence right operand
    // needs parentheses to survive a round trip
    if (precedence(r.kind) <= p)
        rs = "(" + rs + ")";
    return ls + " " + op_char(e.kind) + " " + rs;
}

std::string print_bounds(const BoundsAnnotation &b) {
    if (b.is_none())
        return {};
    std::string out = form_name(b.form) + "(" + print_expr(b.exprs[0]);
    if (b.form == BoundsAnnotation::Form::Bounds)
        out += ", " + print_expr(b.exprs[1]);
    return out + ")";
}

std::string normalize_bounds(const BoundsAnnotation &b) {
    if (b.is_none())
        return {};
    std::string out = form_name(b.form) + "(" + normalized(b.exprs[0]);
    if (b.form == BoundsAnnotation::Form::Bounds)
        out += "," + normalized(b.exprs[1]);
    return out + ")";
}

std::string normalize_bounds_text(std::string_view text) {
    try {
        return normalize_bounds(parse_bounds(text));
    } catch (const BoundsSyntaxError &) {
        std::string out;
        for (char c : text)
            if (!std::isspace(static_cast<unsigned char>(c)))
                out.push_back(c);
        return out;
    }
}

std::set<std::string> identifiers_in(const BoundsAnnotation &b) {
    std::set<std::string> out;
    for (const auto &e : b.exprs)
        collect_identifiers(e, out);
    return out;
}

BoundsAnnotation nt_count_from_array(unsigned long long array_size) {
    if (array_size == 0)
        throw DegenerateArray("a null-terminated array needs at least one element");
    return BoundsAnnotation::count(Expr::integer(std::to_string(array_size - 1)));
}

// ---------------------------------------------------------------------------
// Scope

ScopeVerdict validate_scope(const AnnotationSite &site, const DeclarationMeta &meta,
                            const std::set<std::string> &globals, const std::set<std::string> &fields) {
    for (const auto &id : identifiers_in(site.bounds)) {
        if (globals.count(id))
            continue;
        bool ok = false;
        switch (site.scope) {
        case SiteScope::Param:
        case SiteScope::Return:
            ok = std::any_of(meta.params.begin(), meta.params.end(), [&](const Declarator &p) { return p.name == id; });
            break;
        case SiteScope::Local:
            ok = std::any_of(meta.params.begin(), meta.params.end(),
                             [&](const Declarator &p) { return p.name == id; }) ||
                 std::any_of(meta.locals.begin(), meta.locals.end(),
                             [&](const Declarator &l) { return l.name == id && l.line <= site.line; });
            break;
        case SiteScope::Field:
            ok = fields.count(id) > 0;
            break;
        case SiteScope::Global:
            break;
        }
        if (!ok)
            return ScopeVerdict{false, id};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Classification

namespace {

using Toks = std::vector<Token>;

using Uses = UsageFacts;

bool is_zero_literal(const Token &t) {
    return (t.kind == TokenKind::Number && (t.text == "0" || t.text == "0x0")) ||
           (t.kind == TokenKind::Char && (t.text == "'\\0'" || t.text == "'\\x0'"));
}

bool is_integer_type_word(std::string_view w) {
    return w == "int" || w == "long" || w == "short" || w == "char" || w == "unsigned" || w == "signed" ||
           w == "size_t" || w == "ssize_t" || w == "uintptr_t" || w == "intptr_t" || w == "ptrdiff_t" ||
           w == "uint32_t" || w == "uint64_t" || w == "int32_t" || w == "int64_t";
}

bool is_operand_end(const Token &t) {
    return t.kind == TokenKind::Identifier || t.kind == TokenKind::Number || t.is(")") || t.is("]");
}

std::size_t match_forward(const Toks &toks, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < toks.size(); ++i) {
        const Token &t = toks[i];
        if (t.is("(") || t.is("[") || t.is("{"))
            ++depth;
        else if ((t.is(")") || t.is("]") || t.is("}")) && --depth == 0)
            return i;
    }
    return toks.size();
}

std::size_t match_backward(const Toks &toks, std::size_t close) {
    int depth = 0;
    for (std::size_t i = close + 1; i-- > 0;) {
        const Token &t = toks[i];
        if (t.is(")") || t.is("]") || t.is("}"))
            ++depth;
        else if ((t.is("(") || t.is("[") || t.is("{")) && --depth == 0)
            return i;
    }
    return toks.size();
}

// Index of the '(' enclosing position k, or npos when k is not inside parens
// of the current statement.
std::size_t enclosing_paren(const Toks &toks, std::size_t k) {
    int depth = 0;
    for (std::size_t j = k; j-- > 0;) {
        const Token &t = toks[j];
        if (t.is(")") || t.is("]"))
            ++depth;
        else if (t.is("["))
            --depth;
        else if (t.is("(")) {
            if (depth == 0)
                return j;
            --depth;
        } else if (t.is("{") || t.is("}")) {
            return Declarator::npos;
        }
    }
    return Declarator::npos;
}

bool in_loop_condition(const Toks &toks, std::size_t k) {
    std::size_t p = enclosing_paren(toks, k);
    while (p != Declarator::npos) {
        if (p > 0 && (toks[p - 1].is("while") || toks[p - 1].is("for")))
            return true;
        p = enclosing_paren(toks, p);
    }
    return false;
}

bool string_function_argument(const Toks &toks, std::size_t k) {
    std::size_t p = enclosing_paren(toks, k);
    if (p == Declarator::npos || p == 0)
        return false;
    std::string_view fn = toks[p - 1].text;
    if (!(fn == "strlen" || fn == "strcpy" || fn == "strcmp" || fn == "strcat"))
        return false;
    bool starts = toks[k - 1].is("(") || toks[k - 1].is(",");
    bool ends = k + 1 < toks.size() && (toks[k + 1].is(")") || toks[k + 1].is(","));
    return starts && ends;
}

void analyze(const Toks &toks, std::string_view sym, bool member, const std::set<std::string> &int_vars, Uses &u) {
    const std::size_t n = toks.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Token &t = toks[k];
        if (!t.is_ident() || t.text != sym)
            continue;
        bool after_member = k > 0 && (toks[k - 1].is(".") || toks[k - 1].is("->"));
        if (after_member != member)
            continue;
        std::size_t start = member ? k - 2 : k; // first token of the access expression
        auto prev = [&](std::size_t back) -> const Token * {
            return start >= back ? &toks[start - back] : nullptr;
        };
        const Token *next = k + 1 < n ? &toks[k + 1] : nullptr;
        const Token *next2 = k + 2 < n ? &toks[k + 2] : nullptr;

        // indexing, and what happens to the indexed element
        if (next && next->is("[")) {
            u.indexed = true;
            std::size_t close = match_forward(toks, k + 1);
            if (close + 1 < n && toks[close + 1].is("["))
                u.inner_indexed = true;
            if (close + 2 < n && toks[close + 1].is("=")) {
                std::size_t v = close + 2;
                if (toks[v].is("(")) {
                    std::size_t c = match_forward(toks, v);
                    bool is_cast = c < n && c + 1 < n && !toks[c + 1].is(";");
                    if (is_cast)
                        v = c + 1;
                }
                if (v + 1 < n && toks[v + 1].is("(")) {
                    std::string_view fn = toks[v].text;
                    if (fn == "calloc" || fn == "realloc") {
                        u.inner_alloc = true;
                    } else if (fn == "malloc") {
                        std::size_t c = match_forward(toks, v + 1);
                        int depth = 0;
                        for (std::size_t a = v + 2; a < c; ++a) {
                            if (toks[a].is("(") || toks[a].is("["))
                                ++depth;
                            else if (toks[a].is(")") || toks[a].is("]"))
                                --depth;
                            else if (depth == 0 && toks[a].is("*"))
                                u.inner_alloc = true;
                        }
                    }
                }
            }
            if (close + 3 < n && (toks[close + 1].is("!=")) && is_zero_literal(toks[close + 2]) &&
                in_loop_condition(toks, k))
                u.nt_scan = true;
        }

        // pointer arithmetic
        if (next && (next->is("++") || next->is("--") || next->is("+=") || next->is("-=")))
            u.arith = true;
        if (const Token *p = prev(1); p && (p->is("++") || p->is("--")))
            u.arith = true;
        if (next && (next->is("+") || next->is("-")) && next2 && !next2->is("="))
            u.arith = true;
        if (const Token *p = prev(1); p && (p->is("+") || p->is("-"))) {
            const Token *pp = prev(2);
            if (pp && is_operand_end(*pp))
                u.arith = true;
        }

        // null-terminated scans
        const Token *deref = prev(1);
        bool unary_deref = deref && deref->is("*") && !(prev(2) && is_operand_end(*prev(2)));
        if (unary_deref && in_loop_condition(toks, k)) {
            if (next && next->is("!=") && next2 && is_zero_literal(*next2))
                u.nt_scan = true;
            if (next && (next->is(")") || next->is("&&") || next->is("||") || next->is(";")))
                u.nt_scan = true;
            const Token *op = prev(2);
            const Token *lit = prev(3);
            if (op && lit && op->is("!=") && is_zero_literal(*lit))
                u.nt_scan = true;
        }
        if (!member && k > 0 && string_function_argument(toks, k))
            u.nt_scan = true;

        // pointer -> integer cast: (int) p
        bool postfix = next && (next->is("[") || next->is("->") || next->is(".") || next->is("(") ||
                                next->is("++") || next->is("--"));
        if (const Token *p = prev(1); p && p->is(")") && !postfix) {
            std::size_t open = match_backward(toks, start - 1);
            if (open < start - 1) {
                bool all_int = open + 1 < start - 1;
                for (std::size_t a = open + 1; a < start - 1; ++a)
                    if (!(toks[a].is_ident() && is_integer_type_word(toks[a].text)))
                        all_int = false;
                bool is_call = open > 0 && (toks[open - 1].is_ident() || toks[open - 1].is(")"));
                if (all_int && !is_call)
                    u.unchecked = true;
            }
        }

        // integer -> pointer cast assigned to the symbol: p = (T *) x
        if (next && next->is("=") && next2 && next2->is("(")) {
            std::size_t c = match_forward(toks, k + 2);
            bool pointer_cast = false;
            for (std::size_t a = k + 3; a < c; ++a)
                if (toks[a].is("*"))
                    pointer_cast = true;
            if (pointer_cast && c + 1 < n) {
                std::size_t v = c + 1;
                bool wrapped = toks[v].is("(");
                if (wrapped)
                    ++v;
                if (v < n) {
                    const Token &x = toks[v];
                    bool integer_value = x.kind == TokenKind::Number || (x.is_ident() && int_vars.count(std::string(x.text)));
                    bool single = v + 1 < n && (wrapped ? toks[v + 1].is(")") : (toks[v + 1].is(";") || toks[v + 1].is(",")));
                    if (integer_value && single)
                        u.unchecked = true;
                }
            }
        }
    }
}

std::set<std::string> integer_variables(const Declaration &d) {
    std::set<std::string> out;
    auto add = [&](const std::vector<Declarator> &ds) {
        for (const auto &x : ds) {
            if (x.is_pointer_like() || x.is_array)
                continue;
            bool integral = false;
            std::string_view bt = x.base_type;
            std::size_t pos = 0;
            while (pos < bt.size()) {
                std::size_t sp = bt.find(' ', pos);
                std::string_view w = bt.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos);
                if (is_integer_type_word(w))
                    integral = true;
                if (sp == std::string_view::npos)
                    break;
                pos = sp + 1;
            }
            if (integral)
                out.insert(x.name);
        }
    };
    add(d.meta.params);
    add(d.meta.locals);
    return out;
}

PointerKind kind_from_uses(const Uses &u) {
    if (u.unchecked)
        return PointerKind::Unchecked;
    if (u.nt_scan)
        return PointerKind::NtArr;
    if (u.indexed || u.arith)
        return PointerKind::Arr;
    return PointerKind::Ptr;
}

std::string pointee_of(const Declarator &x) {
    if (!x.checked.empty())
        return x.checked_arg;
    if (x.pointer_depth <= 1)
        return x.base_type;
    return x.base_type + " " + std::string(static_cast<std::size_t>(x.pointer_depth - 1), '*');
}

AnnotationSite make_site(const Declaration &d, const Declarator &x, SiteScope scope) {
    AnnotationSite s;
    s.decl_id = d.id;
    s.symbol = x.name;
    s.scope = scope;
    s.line = x.line;
    s.pointee = pointee_of(x);
    if (scope == SiteScope::Field)
        s.struct_name = d.name;
    s.raw_annotation = x.annotation;
    if (!x.annotation.empty()) {
        try {
            s.bounds = parse_bounds(x.annotation);
        } catch (const BoundsSyntaxError &) {
            s.bounds = BoundsAnnotation::none();
        }
    }
    if (!x.checked.empty()) {
        s.spelled_checked = true;
        s.kind = pointer_kind_from_string(x.checked);
        // arr<arr<T>> and friends
        std::string_view arg = x.checked_arg;
        for (std::string_view inner : {"arr<", "nt_arr<", "_Array_ptr<", "_Nt_array_ptr<"}) {
            if (s.kind == PointerKind::Arr && arg.substr(0, inner.size()) == inner && arg.back() == '>') {
                s.nested = true;
                s.element_type = std::string(arg.substr(inner.size(), arg.size() - inner.size() - 1));
            }
        }
    }
    return s;
}

void classify_plain(AnnotationSite &s, const Declarator &x, const Uses &u) {
    s.kind = kind_from_uses(u);
    if (x.pointer_depth >= 2 && s.kind == PointerKind::Arr && (u.inner_indexed || u.inner_alloc)) {
        s.nested = true;
        s.element_type = x.pointer_depth == 2 ? x.base_type
                                              : x.base_type + " " + std::string(x.pointer_depth - 2, '*');
    }
}

} // namespace

UsageFacts pointer_usage(const Declaration &d, const std::string &symbol, bool member) {
    UsageFacts u;
    if (d.kind == DeclKind::Macro)
        return u;
    analyze(tokenize(d.code, d.span.file), symbol, member, integer_variables(d), u);
    return u;
}

std::vector<ScopedDeclarator> all_declarators(const Declaration &d) {
    std::vector<ScopedDeclarator> out;
    for (const auto &x : d.meta.params)
        out.push_back({&x, SiteScope::Param});
    for (const auto &x : d.meta.locals)
        out.push_back({&x, SiteScope::Local});
    for (const auto &x : d.meta.fields)
        out.push_back({&x, SiteScope::Field});
    if (d.kind == DeclKind::Global)
        for (const auto &x : d.meta.declarators)
            out.push_back({&x, SiteScope::Global});
    return out;
}

std::vector<AnnotationSite> classify_pointer_lite(const Declaration &d) {
    std::vector<AnnotationSite> out;
    if (d.kind == DeclKind::Macro)
        return out;
    Toks toks = tokenize(d.code, d.span.file);
    std::set<std::string> ints = integer_variables(d);
    for (const auto &[x, scope] : all_declarators(d)) {
        if (!x->is_pointer_like() || x->is_array)
            continue;
        AnnotationSite s = make_site(d, *x, scope);
        if (x->checked.empty()) {
            Uses u;
            analyze(toks, x->name, scope == SiteScope::Field, ints, u);
            classify_plain(s, *x, u);
        }
        out.push_back(std::move(s));
    }
    if (d.kind == DeclKind::Procedure && !d.meta.return_annotation.empty()) {
        AnnotationSite s;
        s.decl_id = d.id;
        s.symbol = "return";
        s.scope = SiteScope::Return;
        s.line = 1;
        s.raw_annotation = d.meta.return_annotation;
        try {
            s.bounds = parse_bounds(d.meta.return_annotation);
        } catch (const BoundsSyntaxError &) {
        }
        std::string_view rt = d.meta.return_type;
        std::size_t lt = rt.find('<');
        if (lt != std::string_view::npos && is_checked_pointer_name(rt.substr(0, lt))) {
            s.kind = pointer_kind_from_string(rt.substr(0, lt));
            s.spelled_checked = true;
            s.pointee = std::string(rt.substr(lt + 1, rt.size() - lt - 2));
        } else {
            s.kind = PointerKind::Arr;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AnnotationSite> classify_program(const std::vector<Declaration> &decls) {
    struct ProcTokens {
        const Declaration *decl;
        Toks toks;
        std::set<std::string> ints;
        std::set<std::string> own_names;
    };
    std::vector<ProcTokens> procs;
    for (const auto &d : decls) {
        if (!d.is_canonical() || d.kind != DeclKind::Procedure)
            continue;
        ProcTokens p{&d, tokenize(d.code, d.span.file), integer_variables(d), {}};
        for (const auto &x : d.meta.params)
            p.own_names.insert(x.name);
        for (const auto &x : d.meta.locals)
            p.own_names.insert(x.name);
        procs.push_back(std::move(p));
    }

    std::vector<AnnotationSite> out;
    for (const auto &d : decls) {
        if (!d.is_canonical())
            continue;
        if (d.kind == DeclKind::Procedure) {
            auto sites = classify_pointer_lite(d);
            out.insert(out.end(), sites.begin(), sites.end());
            continue;
        }
        for (const auto &[x, scope] : all_declarators(d)) {
            if (!x->is_pointer_like() || x->is_array)
                continue;
            AnnotationSite s = make_site(d, *x, scope);
            if (x->checked.empty()) {
                Uses u;
                bool member = scope == SiteScope::Field;
                for (const auto &p : procs) {
                    if (!member && p.own_names.count(x->name))
                        continue; // shadowed by a parameter or local
                    analyze(p.toks, x->name, member, p.ints, u);
                }
                classify_plain(s, *x, u);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rewriting

std::string checked_spelling(PointerKind kind, const std::string &pointee) {
    switch (kind) {
    case PointerKind::Ptr:
        return "ptr<" + pointee + ">";
    case PointerKind::Arr:
        return "arr<" + pointee + ">";
    case PointerKind::NtArr:
        return "nt_arr<" + pointee + ">";
    case PointerKind::Unchecked:
        break;
    }
    return pointee + " *";
}

std::optional<std::string> rewrite_declarator(const std::string &code, const Declarator &d, PointerKind kind,
                                              const BoundsAnnotation &bounds) {
    if (!d.is_pointer_like() || kind == PointerKind::Unchecked)
        return std::nullopt;
    struct Edit {
        std::size_t begin, end;
        std::string text;
    };
    std::vector<Edit> edits;
    if (d.checked.empty()) {
        if (d.group_size > 1)
            return std::nullopt;
        edits.push_back({d.type_begin, d.name_begin, checked_spelling(kind, pointee_of(d)) + " "});
    } else if (pointer_kind_from_string(d.checked) != kind) {
        edits.push_back({d.type_begin, d.type_end, checked_spelling(kind, d.checked_arg)});
    }
    std::string printed = print_bounds(bounds);
    if (d.annot_begin != Declarator::npos) {
        std::size_t begin = d.annot_begin;
        while (begin > d.name_end && std::isspace(static_cast<unsigned char>(code[begin - 1])))
            --begin;
        edits.push_back({begin, d.annot_end, printed.empty() ? "" : " : " + printed});
    } else if (!printed.empty()) {
        edits.push_back({d.name_end, d.name_end, " : " + printed});
    }
    std::sort(edits.begin(), edits.end(), [](const Edit &a, const Edit &b) { return a.begin > b.begin; });
    std::string out = code;
    for (const auto &e : edits)
        out.replace(e.begin, e.end - e.begin, e.text);
    return out;
}

std::string strip_annotation(const std::string &code, const Declarator &d) {
    if (d.annot_begin == Declarator::npos)
        return code;
    std::size_t begin = d.annot_begin;
    while (begin > d.name_end && std::isspace(static_cast<unsigned char>(code[begin - 1])))
        --begin;
    std::string out = code;
    out.erase(begin, d.annot_end - begin);
    return out;
}

std::string convert_spelling(const std::string &text, bool long_form) {
    static const std::map<std::string_view, std::string_view> kToLong = {
        {"arr", "_Array_ptr"}, {"nt_arr", "_Nt_array_ptr"}, {"ptr", "_Ptr"}};
    static const std::map<std::string_view, std::string_view> kToShort = {
        {"_Array_ptr", "arr"}, {"_Nt_array_ptr", "nt_arr"}, {"_Ptr", "ptr"}};
    const auto &table = long_form ? kToLong : kToShort;
    Toks toks;
    try {
        toks = tokenize(text);
    } catch (const ParseError &) {
        return text;
    }
    struct Edit {
        std::size_t begin, end;
        std::string_view text;
    };
    std::vector<Edit> edits;
    for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
        const Token &t = toks[k];
        auto it = table.find(t.text);
        if (!t.is_ident() || it == table.end() || !toks[k + 1].is("<"))
            continue;
        if (k > 0 && (toks[k - 1].is(".") || toks[k - 1].is("->")))
            continue;
        int depth = 1;
        std::size_t j = k + 2;
        bool type_like = true;
        for (; j < toks.size() && depth > 0; ++j) {
            const Token &u = toks[j];
            if (u.is("<"))
                ++depth;
            else if (u.is(">"))
                --depth;
            else if (u.is(">>"))
                depth -= 2;
            else if (!(u.is_ident() || u.is("*")))
                type_like = false;
            if (!type_like)
                break;
        }
        if (!type_like || depth > 0 || j >= toks.size())
            continue;
        const Token &after = toks[j];
        if (!(after.is_ident() || after.is(")") || after.is(">") || after.is(">>") || after.is(",")))
            continue;
        edits.push_back({t.begin, t.end, it->second});
    }
    std::string out = text;
    for (auto e = edits.rbegin(); e != edits.rend(); ++e)
        out.replace(e->begin, e->end - e->begin, e->text);
    return out;
}

} // namespace ccport
