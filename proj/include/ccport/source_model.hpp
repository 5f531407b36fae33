#pragma once

// Top-level structure of a C / partially converted Checked C codebase.
//
// The parser here is deliberately shallow: it tokenizes, matches brackets and
// recognizes top-level declaration boundaries plus the declarators the rest
// of the pipeline cares about (parameters, locals, struct fields, globals).
// It performs no macro expansion and resolves no headers.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ccport {

enum class DeclKind {
    Macro,
    TypeDecl,
    Global,
    Procedure,
};

std::string_view to_string(DeclKind kind);
DeclKind decl_kind_from_string(std::string_view s);

struct SourceUnit {
    std::string path;
    std::string text;
    std::vector<std::size_t> line_index; // offset of the first byte of every line

    static SourceUnit from_text(std::string path, std::string text);

    /// 1-based line containing byte `offset`.
    std::size_t line_of(std::size_t offset) const;
    std::size_t line_count() const { return line_index.size(); }
};

struct Span {
    std::string file;
    std::size_t start_line = 0; // 1-based, inclusive
    std::size_t end_line = 0;
    std::size_t begin = 0; // byte offsets into the unit text
    std::size_t end = 0;
};

/// One declared name together with its spelled type and, for Checked C
/// input, its pointer kind and bounds annotation. Offsets are relative to
/// the owning Declaration's code.
struct Declarator {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::string name;
    std::string type_text; // normalized, e.g. "unsigned char *" or "arr<int>"
    std::string base_type; // type without the declarator's own '*'s
    int pointer_depth = 0; // count of '*' in the declarator
    bool is_array = false; // declared with [N]
    std::string array_size;
    std::string checked;     // "arr", "nt_arr", "ptr" when spelled as a checked pointer
    std::string checked_arg; // text between the angle brackets
    std::string annotation;  // bounds text after ':' or empty
    std::string initializer; // text after '=' or empty
    std::size_t line = 0;    // 1-based within the declaration code

    std::size_t stmt_begin = 0; // start of the whole declaration statement (storage class included)
    std::size_t type_begin = 0; // first token of the type specifier
    std::size_t type_end = 0;   // one past the last token of the type specifier
    std::size_t name_begin = 0;
    std::size_t name_end = 0;
    std::size_t annot_begin = npos; // the ':' token
    std::size_t annot_end = npos;
    std::size_t end = 0;        // end of this declarator (before ',' or ';')
    std::size_t group_size = 1; // declarators sharing the type specifier
    std::size_t group_index = 0;

    bool is_pointer_like() const { return pointer_depth > 0 || !checked.empty(); }
};

struct DeclarationMeta {
    std::vector<Declarator> params;
    std::vector<Declarator> locals;
    std::vector<Declarator> fields;      // TypeDecl: struct/union members
    std::vector<Declarator> declarators; // Global: the declared variables
    std::string return_type;
    std::string return_annotation;
    std::size_t return_annot_begin = Declarator::npos;
    std::size_t return_annot_end = Declarator::npos;
    std::set<std::string> referenced_names;
    std::string signature_text;
    std::vector<std::string> extra_names; // tags, enumerators, further declarators
    bool has_body = false;

    bool empty() const {
        return params.empty() && locals.empty() && fields.empty() && declarators.empty() && return_type.empty() &&
               referenced_names.empty() && signature_text.empty() && extra_names.empty();
    }
};

struct Declaration {
    std::string id; // "<kind>:<name>", suffixed "~k" for linked duplicates
    DeclKind kind = DeclKind::Global;
    std::string name;
    Span span;
    std::string code;
    DeclarationMeta meta;
    /// Id of the node this one was linked into (forward declarations,
    /// prototypes, extern declarations). Empty for graph nodes.
    std::string canonical_id;

    bool is_canonical() const { return canonical_id.empty(); }
    /// The name plus every extra name this declaration introduces.
    std::vector<std::string> all_names() const;
};

/// Reads each file. Throws IoError when unreadable, EncodingError when the
/// content is not UTF-8 text.
std::vector<SourceUnit> parse_units(const std::vector<std::string> &paths);

/// Reads a manifest: one path per line, blank lines and '#' comments skipped.
/// Relative entries resolve against the manifest's directory.
std::vector<std::string> read_manifest(const std::string &manifest_path);

/// Declarations of one unit in source order, unlinked. Throws ParseError.
std::vector<Declaration> extract_unit(const SourceUnit &unit);

/// Every top-level declaration of every unit in unit order, linked: a
/// prototype / forward / extern declaration points at the node holding the
/// definition through `canonical_id`.
std::vector<Declaration> extract_declarations(const std::vector<SourceUnit> &units);

/// Names of `decls` that can be referenced (canonical declarations only).
std::set<std::string> declared_names(const std::vector<Declaration> &decls);

/// The subset of `universe` that occurs in `d.code` as identifier tokens,
/// outside comments and literals and not as a member name after '.' / '->'.
std::set<std::string> scan_references(const Declaration &d, const std::set<std::string> &universe);

/// Parses `code` as a single top-level declaration of the given unit path.
/// Returns nothing when the text is not exactly one declaration.
std::vector<Declaration> reparse(const std::string &path, const std::string &code);

/// Splits text into lines without their terminators.
std::vector<std::string_view> split_lines(std::string_view text);

/// arr / nt_arr / ptr and their _Array_ptr / _Nt_array_ptr / _Ptr spellings.
bool is_checked_pointer_name(std::string_view word);
/// Maps either spelling to "arr", "nt_arr" or "ptr".
std::string canonical_checked_name(std::string_view word);

} // namespace ccport
