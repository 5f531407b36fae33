#include "ccport/source_model.hpp"

#include "ccport/errors.hpp"
#include "ccport/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ccport {

namespace fs = std::filesystem;

std::string_view to_string(DeclKind kind) {
    switch (kind) {
    case DeclKind::Macro:
        return "macro";
    case DeclKind::TypeDecl:
        return "type";
    case DeclKind::Global:
        return "global";
    case DeclKind::Procedure:
        return "procedure";
    }
    return "?";
}

DeclKind decl_kind_from_string(std::string_view s) {
    if (s == "macro")
        return DeclKind::Macro;
    if (s == "type")
        return DeclKind::TypeDecl;
    if (s == "global")
        return DeclKind::Global;
    if (s == "procedure")
        return DeclKind::Procedure;
    throw Error("unknown declaration kind: " + std::string(s));
}

SourceUnit SourceUnit::from_text(std::string path, std::string text) {
    SourceUnit u{std::move(path), std::move(text), {0}};
    for (std::size_t i = 0; i < u.text.size(); ++i)
        if (u.text[i] == '\n' && i + 1 < u.text.size())
            u.line_index.push_back(i + 1);
    return u;
}

std::size_t SourceUnit::line_of(std::size_t offset) const {
    auto it = std::upper_bound(line_index.begin(), line_index.end(), offset);
    return static_cast<std::size_t>(it - line_index.begin());
}

std::vector<std::string> Declaration::all_names() const {
    std::vector<std::string> names{name};
    names.insert(names.end(), meta.extra_names.begin(), meta.extra_names.end());
    return names;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (true) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool is_checked_pointer_name(std::string_view w) {
    return w == "arr" || w == "nt_arr" || w == "ptr" || w == "_Array_ptr" || w == "_Nt_array_ptr" || w == "_Ptr";
}

std::string canonical_checked_name(std::string_view w) {
    if (w == "arr" || w == "_Array_ptr")
        return "arr";
    if (w == "nt_arr" || w == "_Nt_array_ptr")
        return "nt_arr";
    if (w == "ptr" || w == "_Ptr")
        return "ptr";
    return {};
}

namespace {

// ---------------------------------------------------------------------------
// Reading

bool valid_utf8_text(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        if (c == 0)
            return false;
        std::size_t extra;
        if (c < 0x80)
            extra = 0;
        else if ((c & 0xE0) == 0xC0 && c >= 0xC2)
            extra = 1;
        else if ((c & 0xF0) == 0xE0)
            extra = 2;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4)
            extra = 3;
        else
            return false;
        if (i + extra >= s.size() && extra > 0)
            return false;
        for (std::size_t k = 1; k <= extra; ++k)
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80)
                return false;
        i += extra + 1;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Token-range helpers over a single declaration's tokens

using Toks = std::vector<Token>;

bool is_storage_word(std::string_view w) {
    static constexpr std::array<std::string_view, 11> kWords = {
        "static", "extern", "inline", "__inline", "__inline__", "register", "auto", "_Thread_local", "_Noreturn",
        "__extension__", "typedef",
    };
    return std::find(kWords.begin(), kWords.end(), w) != kWords.end();
}

bool is_qualifier_word(std::string_view w) {
    return w == "const" || w == "volatile" || w == "restrict" || w == "__restrict" || w == "__restrict__" ||
           w == "_Atomic" || w == "__const";
}

bool is_builtin_type_word(std::string_view w) {
    static constexpr std::array<std::string_view, 13> kWords = {
        "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool", "_Complex",
        "__int128", "bool",
    };
    return std::find(kWords.begin(), kWords.end(), w) != kWords.end();
}

bool is_statement_keyword(std::string_view w) {
    return w == "return" || w == "goto" || w == "case" || w == "default" || w == "sizeof" || w == "if" ||
           w == "else" || w == "while" || w == "for" || w == "do" || w == "switch" || w == "break" ||
           w == "continue" || w == "typedef";
}

bool is_open(const Token &t) { return t.kind == TokenKind::Punct && (t.text == "(" || t.text == "[" || t.text == "{"); }
bool is_close(const Token &t) {
    return t.kind == TokenKind::Punct && (t.text == ")" || t.text == "]" || t.text == "}");
}

// Index of the bracket closing toks[open]; npos when unbalanced within [open, end).
std::size_t match_bracket(const Toks &toks, std::size_t open, std::size_t end) {
    int depth = 0;
    for (std::size_t i = open; i < end; ++i) {
        if (is_open(toks[i]))
            ++depth;
        else if (is_close(toks[i]) && --depth == 0)
            return i;
    }
    return Declarator::npos;
}

// First index in [from, end) holding punct `p` at bracket depth 0.
std::size_t find_depth0(const Toks &toks, std::size_t from, std::size_t end, std::string_view p) {
    int depth = 0;
    for (std::size_t i = from; i < end; ++i) {
        if (depth == 0 && toks[i].kind == TokenKind::Punct && toks[i].text == p)
            return i;
        if (is_open(toks[i]))
            ++depth;
        else if (is_close(toks[i])) {
            if (--depth < 0)
                return Declarator::npos;
        }
    }
    return Declarator::npos;
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space)
            out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::string normalize_type(std::string_view s) {
    std::string t = collapse_ws(s);
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        char c = t[i];
        if (c == ' ') {
            char prev = out.empty() ? '\0' : out.back();
            char next = i + 1 < t.size() ? t[i + 1] : '\0';
            if (prev == '<' || next == '<' || next == '>' || prev == '(' || next == ')')
                continue;
        }
        out.push_back(c);
    }
    return out;
}

struct Specifiers {
    bool ok = false;
    std::size_t stmt_begin = 0; // token index
    std::size_t type_begin = 0;
    std::size_t type_end = 0; // exclusive token index
    bool is_typedef = false;
    bool is_extern = false;
    std::string record_keyword; // struct/union/enum
    std::string tag;
    std::size_t body_open = Declarator::npos; // '{' of a record body
    std::size_t body_close = Declarator::npos;
    std::string checked;
    std::string checked_arg;
};

class DeclParser {
public:
    DeclParser(std::string_view code, const Toks &toks) : code_(code), toks_(toks) {}

    std::string slice(std::size_t first_tok, std::size_t end_tok) const {
        if (first_tok >= end_tok)
            return {};
        return std::string(code_.substr(toks_[first_tok].begin, toks_[end_tok - 1].end - toks_[first_tok].begin));
    }

    std::size_t skip_attribute(std::size_t i, std::size_t end) const {
        while (i < end && (toks_[i].is("__attribute__") || toks_[i].is("__declspec") || toks_[i].is("__asm__") ||
                           toks_[i].is("asm"))) {
            if (i + 1 < end && toks_[i + 1].is("(")) {
                std::size_t close = match_bracket(toks_, i + 1, end);
                if (close == Declarator::npos)
                    return end;
                i = close + 1;
            } else {
                ++i;
            }
        }
        return i;
    }

    // Parses storage classes and a type specifier starting at token i.
    Specifiers specifiers(std::size_t i, std::size_t end, bool allow_plain_ident = true) const {
        Specifiers s;
        s.stmt_begin = i;
        while (i < end) {
            i = skip_attribute(i, end);
            if (i >= end || !toks_[i].is_ident() || !is_storage_word(toks_[i].text))
                break;
            if (toks_[i].text == "typedef")
                s.is_typedef = true;
            if (toks_[i].text == "extern")
                s.is_extern = true;
            ++i;
        }
        s.type_begin = i;
        bool have_type = false;
        while (i < end) {
            const Token &t = toks_[i];
            if (!t.is_ident())
                break;
            if (is_qualifier_word(t.text) || (is_builtin_type_word(t.text))) {
                have_type = have_type || !is_qualifier_word(t.text);
                ++i;
                continue;
            }
            if (is_storage_word(t.text) && t.text != "typedef") {
                ++i; // "const static int" and friends
                continue;
            }
            if (t.text == "__attribute__") {
                i = skip_attribute(i, end);
                continue;
            }
            if (have_type)
                break;
            if (t.text == "struct" || t.text == "union" || t.text == "enum") {
                s.record_keyword = std::string(t.text);
                ++i;
                i = skip_attribute(i, end);
                if (i < end && toks_[i].is_ident() && !is_c_keyword(toks_[i].text)) {
                    s.tag = std::string(toks_[i].text);
                    ++i;
                }
                if (i < end && toks_[i].is("{")) {
                    std::size_t close = match_bracket(toks_, i, end);
                    if (close == Declarator::npos)
                        return s;
                    s.body_open = i;
                    s.body_close = close;
                    i = close + 1;
                }
                have_type = true;
                continue;
            }
            if (is_checked_pointer_name(t.text) && i + 1 < end && toks_[i + 1].is("<")) {
                std::size_t j = i + 2;
                int depth = 1;
                std::size_t arg_end = Declarator::npos;
                for (; j < end && depth > 0; ++j) {
                    if (toks_[j].is("<"))
                        ++depth;
                    else if (toks_[j].is(">")) {
                        if (--depth == 0)
                            arg_end = toks_[j].begin;
                    } else if (toks_[j].is(">>")) {
                        depth -= 2;
                        if (depth <= 0)
                            arg_end = toks_[j].begin + (depth == 0 ? 1 : 0);
                    } else if (toks_[j].is(";") || toks_[j].is("{") || toks_[j].is(")")) {
                        break;
                    }
                }
                if (depth > 0 || arg_end == Declarator::npos)
                    return s;
                s.checked = canonical_checked_name(t.text);
                std::size_t arg_begin = toks_[i + 1].end;
                s.checked_arg = normalize_type(code_.substr(arg_begin, arg_end - arg_begin));
                i = j;
                have_type = true;
                continue;
            }
            if (allow_plain_ident && !is_c_keyword(t.text)) {
                ++i;
                have_type = true;
                continue;
            }
            break;
        }
        s.type_end = i;
        s.ok = have_type;
        return s;
    }

    struct RawDeclarator {
        bool ok = false;
        std::size_t name_tok = Declarator::npos;
        int stars = 0;
        bool function = false;         // name(...) declarator
        bool function_pointer = false; // (*name)(...)
        std::size_t params_open = Declarator::npos;
        std::size_t params_close = Declarator::npos;
        bool is_array = false;
        std::string array_size;
        std::size_t annot_colon = Declarator::npos;
        std::size_t annot_end_tok = Declarator::npos; // exclusive
        std::size_t init_begin = Declarator::npos;
        std::size_t end = 0; // exclusive token index
    };

    // Parses one declarator in [i, end); stops at a depth-0 ',' or `end`.
    RawDeclarator declarator(std::size_t i, std::size_t end, bool allow_annotation = true) const {
        RawDeclarator d;
        while (i < end && (toks_[i].is("*") || (toks_[i].is_ident() && is_qualifier_word(toks_[i].text)))) {
            if (toks_[i].is("*"))
                ++d.stars;
            ++i;
        }
        i = skip_attribute(i, end);
        if (i < end && toks_[i].is("(") && i + 1 < end && toks_[i + 1].is("*")) {
            std::size_t close = match_bracket(toks_, i, end);
            if (close == Declarator::npos)
                return d;
            for (std::size_t k = i + 1; k < close; ++k) {
                if (toks_[k].is("*"))
                    ++d.stars;
                else if (toks_[k].is_ident() && !is_qualifier_word(toks_[k].text))
                    d.name_tok = k;
            }
            d.function_pointer = true;
            i = close + 1;
        } else if (i < end && toks_[i].is_ident() && !is_c_keyword(toks_[i].text)) {
            d.name_tok = i++;
        }
        while (i < end) {
            if (toks_[i].is("[")) {
                std::size_t close = match_bracket(toks_, i, end);
                if (close == Declarator::npos)
                    return d;
                if (!d.is_array)
                    d.array_size = collapse_ws(slice(i + 1, close));
                d.is_array = true;
                i = close + 1;
            } else if (toks_[i].is("(")) {
                std::size_t close = match_bracket(toks_, i, end);
                if (close == Declarator::npos)
                    return d;
                if (!d.function_pointer) {
                    d.function = true;
                    d.params_open = i;
                    d.params_close = close;
                }
                i = close + 1;
            } else if (toks_[i].is("__attribute__") || toks_[i].is("__asm__") || toks_[i].is("asm")) {
                i = skip_attribute(i, end);
            } else {
                break;
            }
        }
        if (allow_annotation && i < end && toks_[i].is(":")) {
            d.annot_colon = i;
            std::size_t j = i + 1;
            int depth = 0;
            for (; j < end; ++j) {
                if (depth == 0 && (toks_[j].is(",") || toks_[j].is("=") || toks_[j].is("{") || toks_[j].is(";")))
                    break;
                if (is_open(toks_[j]))
                    ++depth;
                else if (is_close(toks_[j]) && --depth < 0)
                    break;
            }
            d.annot_end_tok = j;
            i = j;
        }
        if (i < end && toks_[i].is("=")) {
            d.init_begin = i + 1;
            std::size_t comma = find_depth0(toks_, i + 1, end, ",");
            i = comma == Declarator::npos ? end : comma;
        }
        d.end = i;
        d.ok = true;
        return d;
    }

    Declarator make_declarator(const Specifiers &s, const RawDeclarator &r) const {
        Declarator out;
        if (r.name_tok != Declarator::npos) {
            out.name = std::string(toks_[r.name_tok].text);
            out.name_begin = toks_[r.name_tok].begin;
            out.name_end = toks_[r.name_tok].end;
            out.line = toks_[r.name_tok].line;
        } else {
            std::size_t anchor = s.type_end > s.type_begin ? s.type_end - 1 : s.type_begin;
            out.name_begin = out.name_end = toks_[anchor].end;
            out.line = toks_[anchor].line;
        }
        out.stmt_begin = toks_[s.stmt_begin].begin;
        out.type_begin = toks_[s.type_begin].begin;
        out.type_end = s.type_end > s.type_begin ? toks_[s.type_end - 1].end : out.type_begin;
        out.base_type = normalize_type(slice(s.type_begin, s.type_end));
        out.pointer_depth = r.stars;
        out.is_array = r.is_array;
        out.array_size = r.array_size;
        out.checked = s.checked;
        out.checked_arg = s.checked_arg;
        out.type_text = out.base_type;
        if (r.stars > 0)
            out.type_text += " " + std::string(static_cast<std::size_t>(r.stars), '*');
        if (r.is_array)
            out.type_text += "[" + r.array_size + "]";
        if (r.annot_colon != Declarator::npos) {
            out.annot_begin = toks_[r.annot_colon].begin;
            out.annot_end = r.annot_end_tok > r.annot_colon + 1 ? toks_[r.annot_end_tok - 1].end
                                                                : toks_[r.annot_colon].end;
            out.annotation = collapse_ws(slice(r.annot_colon + 1, r.annot_end_tok));
        }
        if (r.init_begin != Declarator::npos)
            out.initializer = collapse_ws(slice(r.init_begin, r.end));
        out.end = r.end > 0 ? toks_[r.end - 1].end : out.name_end;
        return out;
    }

    // All declarators of a declaration occupying tokens [s.type_end, end).
    std::vector<Declarator> declarators(const Specifiers &s, std::size_t end, bool skip_functions) const {
        std::vector<Declarator> out;
        std::size_t i = s.type_end;
        while (i < end) {
            RawDeclarator r = declarator(i, end);
            if (!r.ok || r.end == i)
                break;
            if (!(skip_functions && r.function) && r.name_tok != Declarator::npos) {
                Declarator d = make_declarator(s, r);
                // bit-field widths are not bounds annotations
                if (!d.annotation.empty() && std::isdigit(static_cast<unsigned char>(d.annotation[0]))) {
                    d.annotation.clear();
                    d.annot_begin = d.annot_end = Declarator::npos;
                }
                out.push_back(std::move(d));
            }
            i = r.end;
            if (i < end && toks_[i].is(","))
                ++i;
            else
                break;
        }
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k].group_size = out.size();
            out[k].group_index = k;
        }
        return out;
    }

    // Parameters between toks[open] '(' and toks[close] ')'.
    std::vector<Declarator> parameters(std::size_t open, std::size_t close) const {
        std::vector<Declarator> out;
        std::size_t i = open + 1;
        while (i < close) {
            std::size_t comma = find_depth0(toks_, i, close, ",");
            std::size_t end = comma == Declarator::npos ? close : comma;
            if (!(end == i + 1 && (toks_[i].is("void") || toks_[i].is("...")))) {
                Specifiers s = specifiers(i, end);
                if (s.ok) {
                    RawDeclarator r = declarator(s.type_end, end);
                    if (r.ok)
                        out.push_back(make_declarator(s, r));
                }
            }
            i = end + 1;
        }
        return out;
    }

    // Heuristic: does a declaration statement start at token i?
    bool looks_like_declaration(std::size_t i, std::size_t end) const {
        std::size_t k = i;
        while (k < end && toks_[k].is_ident() && (is_storage_word(toks_[k].text) || is_qualifier_word(toks_[k].text)))
            ++k;
        if (k >= end || !toks_[k].is_ident())
            return false;
        std::string_view w = toks_[k].text;
        if (toks_[k].text == "typedef" || is_statement_keyword(w))
            return false;
        if (is_builtin_type_word(w) || w == "struct" || w == "union" || w == "enum")
            return true;
        if (is_checked_pointer_name(w) && k + 1 < end && toks_[k + 1].is("<"))
            return true;
        if (is_c_keyword(w))
            return false;
        ++k;
        while (k < end && (toks_[k].is("*") || (toks_[k].is_ident() && is_qualifier_word(toks_[k].text))))
            ++k;
        if (k >= end || !toks_[k].is_ident() || is_c_keyword(toks_[k].text))
            return false;
        ++k;
        if (k >= end)
            return false;
        const Token &n = toks_[k];
        return n.is("=") || n.is(";") || n.is(",") || n.is("[") || n.is(":") || n.is(")");
    }

    // Locals declared anywhere in the body (open, close).
    std::vector<Declarator> locals(std::size_t open, std::size_t close) const {
        std::vector<Declarator> out;
        std::size_t i = open + 1;
        while (i < close) {
            const Token &prev = toks_[i - 1];
            bool stmt_start = prev.is("{") || prev.is(";") || prev.is("}") ||
                              (prev.is("(") && i >= 2 && toks_[i - 2].is("for"));
            if (stmt_start && toks_[i].kind != TokenKind::Directive && looks_like_declaration(i, close)) {
                std::size_t semi = find_depth0(toks_, i, close, ";");
                if (semi != Declarator::npos) {
                    Specifiers s = specifiers(i, semi);
                    if (s.ok) {
                        auto ds = declarators(s, semi, true);
                        out.insert(out.end(), ds.begin(), ds.end());
                        // a local struct definition still has its own statements inside
                        i = s.body_close != Declarator::npos ? s.body_close + 1 : semi + 1;
                        continue;
                    }
                }
            }
            ++i;
        }
        return out;
    }

    // Members of a record body (open, close).
    std::vector<Declarator> fields(std::size_t open, std::size_t close) const {
        std::vector<Declarator> out;
        std::size_t i = open + 1;
        while (i < close) {
            std::size_t semi = find_depth0(toks_, i, close, ";");
            std::size_t end = semi == Declarator::npos ? close : semi;
            Specifiers s = specifiers(i, end);
            if (s.ok) {
                auto ds = declarators(s, end, false);
                out.insert(out.end(), ds.begin(), ds.end());
            }
            i = end + 1;
        }
        return out;
    }

    std::vector<std::string> enumerators(std::size_t open, std::size_t close) const {
        std::vector<std::string> out;
        std::size_t i = open + 1;
        while (i < close) {
            if (toks_[i].is_ident())
                out.emplace_back(toks_[i].text);
            std::size_t comma = find_depth0(toks_, i, close, ",");
            if (comma == Declarator::npos)
                break;
            i = comma + 1;
        }
        return out;
    }

private:
    std::string_view code_;
    const Toks &toks_;
};

std::set<std::string> identifiers_of(const Toks &toks) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token &t = toks[i];
        if (!t.is_ident() || is_c_keyword(t.text))
            continue;
        if (i > 0 && (toks[i - 1].is(".") || toks[i - 1].is("->")))
            continue;
        out.emplace(t.text);
    }
    return out;
}

std::string anonymous_name(std::string_view keyword, std::size_t line) {
    return "__anon_" + std::string(keyword) + "_" + std::to_string(line);
}

// definition strength used when linking duplicates: 2 = has a body,
// 1 = defining declaration without a body, 0 = forward / prototype / extern
struct Parsed {
    Declaration decl;
    int strength = 1;
};

std::string kind_prefix(DeclKind k) {
    switch (k) {
    case DeclKind::Macro:
        return "macro";
    case DeclKind::TypeDecl:
        return "type";
    case DeclKind::Global:
        return "global";
    case DeclKind::Procedure:
        return "proc";
    }
    return "?";
}

Parsed parse_macro(const SourceUnit &unit, const Token &tok) {
    Parsed p;
    Declaration &d = p.decl;
    d.kind = DeclKind::Macro;
    std::string_view text = tok.text;
    std::size_t pos = text.find("define");
    pos += 6;
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t'))
        ++pos;
    std::size_t name_end = pos;
    while (name_end < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_'))
        ++name_end;
    if (name_end == pos)
        throw ParseError(unit.path, tok.line, "#define without a name");
    d.name = std::string(text.substr(pos, name_end - pos));
    d.code = std::string(text);
    d.span = Span{unit.path, unit.line_of(tok.begin), unit.line_of(tok.end - 1), tok.begin, tok.end};
    return p;
}

// Parses the declaration occupying unit.text[begin, end).
Parsed parse_item(const SourceUnit &unit, std::size_t begin, std::size_t end) {
    Parsed p;
    Declaration &d = p.decl;
    d.code = unit.text.substr(begin, end - begin);
    d.span = Span{unit.path, unit.line_of(begin), unit.line_of(end - 1), begin, end};
    Toks toks = tokenize(d.code, unit.path);
    DeclParser parser(d.code, toks);
    const std::size_t n = toks.size();
    std::size_t stop = toks.back().is(";") ? n - 1 : n;
    auto fail = [&](const std::string &what) -> ParseError {
        return ParseError(unit.path, d.span.start_line, what);
    };

    Specifiers s = parser.specifiers(0, stop);
    if (!s.ok)
        throw fail("cannot recognize top-level declaration");
    d.meta.referenced_names = identifiers_of(toks);

    auto record_details = [&]() {
        if (s.body_open == Declarator::npos)
            return;
        if (s.record_keyword == "enum")
            for (auto &e : parser.enumerators(s.body_open, s.body_close))
                d.meta.extra_names.push_back(e);
        else
            d.meta.fields = parser.fields(s.body_open, s.body_close);
    };

    if (s.is_typedef) {
        auto ds = parser.declarators(s, stop, false);
        if (ds.empty())
            throw fail("typedef without a name");
        d.kind = DeclKind::TypeDecl;
        d.name = ds.front().name;
        for (std::size_t k = 1; k < ds.size(); ++k)
            d.meta.extra_names.push_back(ds[k].name);
        if (!s.tag.empty() && s.tag != d.name)
            d.meta.extra_names.push_back(s.tag);
        d.meta.declarators = ds;
        record_details();
        p.strength = s.body_open != Declarator::npos ? 2 : 1;
        return p;
    }

    if (!s.record_keyword.empty() && s.type_end == stop) {
        d.kind = DeclKind::TypeDecl;
        d.name = s.tag.empty() ? anonymous_name(s.record_keyword, d.span.start_line) : s.tag;
        record_details();
        p.strength = s.body_open != Declarator::npos ? 2 : 0;
        return p;
    }

    DeclParser::RawDeclarator first = parser.declarator(s.type_end, stop, false);
    if (first.ok && first.function && first.name_tok != Declarator::npos) {
        d.kind = DeclKind::Procedure;
        d.name = std::string(toks[first.name_tok].text);
        d.meta.return_type = normalize_type(parser.slice(s.type_begin, s.type_end) +
                                            (first.stars > 0 ? " " + std::string(first.stars, '*') : ""));
        d.meta.params = parser.parameters(first.params_open, first.params_close);
        std::size_t i = first.params_close + 1;
        i = parser.skip_attribute(i, n);
        if (i < n && toks[i].is(":")) {
            std::size_t j = i + 1;
            int depth = 0;
            for (; j < n; ++j) {
                if (depth == 0 && (toks[j].is("{") || toks[j].is(";")))
                    break;
                if (is_open(toks[j]))
                    ++depth;
                else if (is_close(toks[j]))
                    --depth;
            }
            d.meta.return_annot_begin = toks[i].begin;
            d.meta.return_annot_end = toks[j - 1].end;
            d.meta.return_annotation = collapse_ws(parser.slice(i + 1, j));
            i = j;
        }
        i = parser.skip_attribute(i, n);
        if (i < n && toks[i].is("{")) {
            if (!toks.back().is("}"))
                throw fail("procedure body not terminated");
            d.meta.has_body = true;
            std::string sig = d.code.substr(0, toks[i].begin);
            while (!sig.empty() && std::isspace(static_cast<unsigned char>(sig.back())))
                sig.pop_back();
            d.meta.signature_text = sig;
            d.meta.locals = parser.locals(i, n - 1);
            p.strength = 2;
        } else {
            std::string sig = d.code.substr(0, toks[stop > 0 ? stop - 1 : 0].end);
            d.meta.signature_text = sig;
            p.strength = 0;
        }
        return p;
    }

    auto ds = parser.declarators(s, stop, false);
    if (ds.empty())
        throw fail("cannot recognize top-level declaration");
    d.kind = DeclKind::Global;
    d.name = ds.front().name;
    for (std::size_t k = 1; k < ds.size(); ++k)
        d.meta.extra_names.push_back(ds[k].name);
    if (!s.tag.empty())
        d.meta.extra_names.push_back(s.tag);
    d.meta.declarators = ds;
    record_details();
    p.strength = s.is_extern ? 0 : 1;
    return p;
}

// True when the '{' at toks[i] opens a procedure body: a ')' precedes it
// (possibly followed by a return-bounds annotation or attributes) and no
// depth-0 '=' occurred in the item.
bool opens_function_body(const Toks &toks, std::size_t start, std::size_t i, bool saw_assign) {
    if (saw_assign || i == start)
        return false;
    for (std::size_t k = start; k < i; ++k)
        if (toks[k].is("typedef"))
            return false;
    return toks[i - 1].is(")");
}

std::vector<Parsed> extract_unit_parsed(const SourceUnit &unit) {
    Toks toks = tokenize(unit.text, unit.path);
    std::vector<Parsed> out;
    std::size_t i = 0;
    while (i < toks.size()) {
        const Token &t = toks[i];
        if (t.kind == TokenKind::Directive) {
            if (directive_name(t) == "define")
                out.push_back(parse_macro(unit, t));
            ++i;
            continue;
        }
        if (t.is(";")) {
            ++i;
            continue;
        }
        std::size_t start = i;
        std::vector<std::size_t> stack;
        bool function_body = false;
        bool saw_assign = false;
        std::size_t end = Declarator::npos;
        for (; i < toks.size(); ++i) {
            const Token &u = toks[i];
            if (u.kind == TokenKind::Directive) {
                if (stack.empty())
                    throw ParseError(unit.path, u.line,
                                     "preprocessor directive splits the declaration starting at line " +
                                         std::to_string(toks[start].line));
                continue;
            }
            if (is_open(u)) {
                if (u.is("{") && stack.empty() && opens_function_body(toks, start, i, saw_assign))
                    function_body = true;
                stack.push_back(i);
            } else if (is_close(u)) {
                static const std::map<std::string_view, std::string_view> kPair = {
                    {")", "("}, {"]", "["}, {"}", "{"}};
                if (stack.empty() || toks[stack.back()].text != kPair.at(u.text))
                    throw ParseError(unit.path, u.line, "unbalanced '" + std::string(u.text) + "'");
                stack.pop_back();
                if (stack.empty() && u.is("}") && function_body) {
                    end = i;
                    break;
                }
            } else if (stack.empty() && u.is(";")) {
                end = i;
                break;
            } else if (stack.empty() && u.is("=")) {
                saw_assign = true;
            }
        }
        if (end == Declarator::npos) {
            std::size_t line = stack.empty() ? toks[start].line : toks[stack.back()].line;
            throw ParseError(unit.path, line,
                             stack.empty() ? "declaration not terminated by ';'" : "unbalanced brackets");
        }
        out.push_back(parse_item(unit, toks[start].begin, toks[end].end));
        i = end + 1;
    }
    return out;
}

void assign_ids(std::vector<Parsed> &all) {
    std::map<std::pair<DeclKind, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < all.size(); ++i)
        groups[{all[i].decl.kind, all[i].decl.name}].push_back(i);
    for (auto &[key, members] : groups) {
        std::size_t canonical = members.front();
        for (std::size_t m : members)
            if (all[m].strength > all[canonical].strength)
                canonical = m;
        std::string base = kind_prefix(key.first) + ":" + key.second;
        std::size_t dup = 0;
        for (std::size_t m : members) {
            if (m == canonical) {
                all[m].decl.id = base;
            } else {
                all[m].decl.id = base + "~" + std::to_string(++dup);
                all[m].decl.canonical_id = base;
            }
        }
    }
}

} // namespace

std::vector<SourceUnit> parse_units(const std::vector<std::string> &paths) {
    std::vector<SourceUnit> units;
    units.reserve(paths.size());
    for (const auto &path : paths) {
        std::error_code ec;
        if (!fs::is_regular_file(path, ec))
            throw IoError("cannot read " + path + ": not a readable file");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError("cannot read " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        if (in.bad())
            throw IoError("cannot read " + path);
        std::string text = buf.str();
        if (!valid_utf8_text(text))
            throw EncodingError(path + ": not UTF-8 text");
        units.push_back(SourceUnit::from_text(path, std::move(text)));
    }
    return units;
}

std::vector<std::string> read_manifest(const std::string &manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("cannot read manifest " + manifest_path);
    fs::path base = fs::path(manifest_path).parent_path();
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = collapse_ws(line);
        if (t.empty() || t[0] == '#')
            continue;
        fs::path p(t);
        out.push_back(p.is_absolute() ? p.string() : (base / p).lexically_normal().string());
    }
    return out;
}

std::vector<Declaration> extract_unit(const SourceUnit &unit) {
    std::vector<Declaration> out;
    for (auto &p : extract_unit_parsed(unit))
        out.push_back(std::move(p.decl));
    return out;
}

std::vector<Declaration> extract_declarations(const std::vector<SourceUnit> &units) {
    std::vector<Parsed> all;
    for (const auto &u : units) {
        auto parsed = extract_unit_parsed(u);
        std::move(parsed.begin(), parsed.end(), std::back_inserter(all));
    }
    assign_ids(all);
    std::vector<Declaration> out;
    out.reserve(all.size());
    for (auto &p : all)
        out.push_back(std::move(p.decl));
    return out;
}

std::set<std::string> declared_names(const std::vector<Declaration> &decls) {
    std::set<std::string> out;
    for (const auto &d : decls)
        if (d.is_canonical())
            for (auto &n : d.all_names())
                out.insert(n);
    return out;
}

std::set<std::string> scan_references(const Declaration &d, const std::set<std::string> &universe) {
    std::set<std::string> names;
    if (d.kind == DeclKind::Macro) {
        // body of the #define, after its name and parameter list
        std::string_view text = d.code;
        std::size_t at = text.find(d.name);
        std::string body(at == std::string_view::npos ? text : text.substr(at + d.name.size()));
        names = identifiers_of(tokenize(body, d.span.file));
    } else {
        names = d.meta.referenced_names;
    }
    std::set<std::string> out;
    for (const auto &n : names)
        if (universe.count(n))
            out.insert(n);
    return out;
}

std::vector<Declaration> reparse(const std::string &path, const std::string &code) {
    return extract_declarations({SourceUnit::from_text(path, code)});
}

} // namespace ccport
