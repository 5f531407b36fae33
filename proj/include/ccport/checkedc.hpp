#pragma once

// Checked C pointer kinds, bounds expressions and annotation sites, plus a
// small pattern-based pointer classifier for plain C input.

#include "ccport/source_model.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ccport {

enum class PointerKind {
    Ptr,
    Arr,
    NtArr,
    Unchecked,
};

std::string_view to_string(PointerKind kind);
/// Accepts "ptr", "arr", "nt_arr", "unchecked".
PointerKind pointer_kind_from_string(std::string_view s);

/// Arithmetic over identifiers and integer literals.
struct Expr {
    enum class Kind { Ident, Int, Add, Sub, Mul, Div };

    Kind kind = Kind::Int;
    std::string atom;           // Ident / Int
    std::vector<Expr> operands; // exactly two for the binary kinds

    static Expr ident(std::string name) { return Expr{Kind::Ident, std::move(name), {}}; }
    static Expr integer(std::string digits) { return Expr{Kind::Int, std::move(digits), {}}; }
    static Expr binary(Kind k, Expr lhs, Expr rhs) { return Expr{k, {}, {std::move(lhs), std::move(rhs)}}; }

    bool operator==(const Expr &) const = default;
};

struct BoundsAnnotation {
    enum class Form { None, Count, ByteCount, Bounds };

    Form form = Form::None;
    std::vector<Expr> exprs; // Count/ByteCount: one; Bounds: lo, hi

    static BoundsAnnotation none() { return {}; }
    static BoundsAnnotation count(Expr e) { return {Form::Count, {std::move(e)}}; }
    static BoundsAnnotation byte_count(Expr e) { return {Form::ByteCount, {std::move(e)}}; }
    static BoundsAnnotation range(Expr lo, Expr hi) { return {Form::Bounds, {std::move(lo), std::move(hi)}}; }

    bool is_none() const { return form == Form::None; }
    bool operator==(const BoundsAnnotation &) const = default;
};

/// Parses the text after a declaration's ':' ("count(n)", "bounds(lo, hi)").
/// Empty or blank text is None. Throws BoundsSyntaxError.
BoundsAnnotation parse_bounds(std::string_view text);
/// Parses a bare arithmetic expression. Throws BoundsSyntaxError.
Expr parse_expr(std::string_view text);

std::string print_expr(const Expr &e);
/// Canonical surface form, e.g. "count(longs * 4)". None prints as "".
std::string print_bounds(const BoundsAnnotation &b);

/// Comparison form: whitespace-free, operands of + and * flattened and
/// sorted, so "count(n * 4)" and "count(4*n)" agree.
std::string normalize_bounds(const BoundsAnnotation &b);
/// Normalizes annotation text; text that does not parse is returned with
/// whitespace removed.
std::string normalize_bounds_text(std::string_view text);

std::set<std::string> identifiers_in(const BoundsAnnotation &b);

/// count(size - 1) for a null-terminated array of `array_size` elements.
/// Throws DegenerateArray when array_size is 0.
BoundsAnnotation nt_count_from_array(unsigned long long array_size);

enum class SiteScope { Param, Local, Global, Field, Return };
std::string_view to_string(SiteScope scope);

struct AnnotationSite {
    std::string decl_id;
    std::string symbol;
    PointerKind kind = PointerKind::Ptr;
    BoundsAnnotation bounds;
    std::string raw_annotation; // annotation text as written, parsed or not
    SiteScope scope = SiteScope::Local;
    std::string struct_name; // Field sites
    std::size_t line = 0;    // 1-based within the declaration
    std::string pointee;     // T of arr<T> / T*
    bool nested = false;     // array of arrays (restructured by the first pass)
    std::string element_type; // innermost T of a nested site
    bool spelled_checked = false;

    bool annotated() const { return !raw_annotation.empty(); }
};

struct ScopeVerdict {
    bool valid = true;
    std::string offending; // first identifier that failed to resolve
};

/// Every identifier of the site's bounds must resolve to a parameter or a
/// local visible at the site's line, a sibling field (Field sites), or a
/// global / macro / enumerator name from `globals`.
ScopeVerdict validate_scope(const AnnotationSite &site, const DeclarationMeta &meta,
                            const std::set<std::string> &globals, const std::set<std::string> &fields);

/// Pointer sites of one declaration. Checked spellings pass through with
/// their declared kind and bounds; plain `T*` declarators are classified from
/// their uses inside `d` (null-terminated scan, indexing / arithmetic, or an
/// integer cast).
std::vector<AnnotationSite> classify_pointer_lite(const Declaration &d);

/// Like classify_pointer_lite over every canonical declaration, except that
/// Global and Field sites are classified from their uses across all
/// procedures of the program.
std::vector<AnnotationSite> classify_program(const std::vector<Declaration> &decls);

/// What the classifier saw of one symbol inside a declaration.
struct UsageFacts {
    bool indexed = false;
    bool arith = false;
    bool nt_scan = false;
    bool unchecked = false;
    bool inner_indexed = false; // p[e][e']
    bool inner_alloc = false;   // p[e] = malloc(...) of an array
};

/// Uses of `symbol` in `d`; `member` selects occurrences after '.' / '->'.
UsageFacts pointer_usage(const Declaration &d, const std::string &symbol, bool member = false);

/// "arr<T>", "nt_arr<T>" or "ptr<T>"; Unchecked yields "T *".
std::string checked_spelling(PointerKind kind, const std::string &pointee);

/// Retypes `d` (a declarator of `code`) to `kind` and sets its bounds.
/// Returns nothing when the declarator cannot be rewritten in place (it
/// shares a plain type specifier with other declarators).
std::optional<std::string> rewrite_declarator(const std::string &code, const Declarator &d, PointerKind kind,
                                              const BoundsAnnotation &bounds);

/// Removes the bounds annotation of `d` (and the whitespace before it).
std::string strip_annotation(const std::string &code, const Declarator &d);

/// All declarators of a declaration (params, locals, fields, globals) with
/// their site scope.
struct ScopedDeclarator {
    const Declarator *decl;
    SiteScope scope;
};
std::vector<ScopedDeclarator> all_declarators(const Declaration &d);

/// Rewrites checked pointer spellings: long form (`_Array_ptr<T>`) when
/// `long_form`, otherwise the abbreviated form (`arr<T>`).
std::string convert_spelling(const std::string &text, bool long_form);

} // namespace ccport
