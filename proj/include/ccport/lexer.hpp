#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ccport {

enum class TokenKind {
    Identifier,
    Number,
    String,
    Char,
    Punct,
    Directive, // a whole preprocessor line, continuations included
};

struct Token {
    TokenKind kind;
    std::size_t begin; // byte offsets into the lexed text
    std::size_t end;
    std::size_t line; // 1-based line of `begin`
    std::string_view text;

    bool is(std::string_view s) const { return (kind == TokenKind::Punct || kind == TokenKind::Identifier) && text == s; }
    bool is_ident() const { return kind == TokenKind::Identifier; }
};

/// Splits C (or Checked C) source into tokens. Comments and whitespace are
/// dropped; string and character literals are single tokens, so identifiers
/// inside them never surface. Throws ParseError on unterminated comments or
/// literals. `file` only labels diagnostics.
///
/// The returned tokens view into `text`, which must outlive them.
std::vector<Token> tokenize(std::string_view text, const std::string &file = "<input>");

bool is_c_keyword(std::string_view word);

/// Name of the directive in a Directive token ("define", "if", ...).
std::string_view directive_name(const Token &tok);

} // namespace ccport
