#include "ccport/lexer.hpp"

#include "ccport/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace ccport {

namespace {

constexpr std::array<std::string_view, 22> kThreeOrTwoCharPuncts = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=",  "&&",  "||",  "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    Lexer(std::string_view text, const std::string &file) : text_(text), file_(file) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        bool line_start = true;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
                line_start = true;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                skip_line_comment();
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                pos_ += 2;
                ++line_;
                continue;
            }
            if (c == '#' && line_start) {
                out.push_back(directive());
                line_start = true;
                continue;
            }
            line_start = false;
            std::size_t begin = pos_;
            std::size_t line = line_;
            TokenKind kind;
            if (ident_start(c)) {
                // L"..." / u8'x' style prefixes belong to the literal.
                while (pos_ < text_.size() && ident_char(text_[pos_]))
                    ++pos_;
                std::string_view word = text_.substr(begin, pos_ - begin);
                if (pos_ < text_.size() && (text_[pos_] == '"' || text_[pos_] == '\'') &&
                    (word == "L" || word == "u" || word == "U" || word == "u8")) {
                    kind = text_[pos_] == '"' ? TokenKind::String : TokenKind::Char;
                    literal(text_[pos_]);
                } else {
                    kind = TokenKind::Identifier;
                }
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                kind = TokenKind::Number;
                number();
            } else if (c == '"' || c == '\'') {
                kind = c == '"' ? TokenKind::String : TokenKind::Char;
                literal(c);
            } else {
                kind = TokenKind::Punct;
                punct();
            }
            out.push_back(Token{kind, begin, pos_, line, text_.substr(begin, pos_ - begin)});
        }
        return out;
    }

private:
    char peek(std::size_t ahead) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }

    [[noreturn]] void fail(std::size_t line, const std::string &what) const { throw ParseError(file_, line, what); }

    void skip_block_comment() {
        std::size_t start_line = line_;
        pos_ += 2;
        while (pos_ < text_.size()) {
            if (text_[pos_] == '*' && peek(1) == '/') {
                pos_ += 2;
                return;
            }
            if (text_[pos_] == '\n')
                ++line_;
            ++pos_;
        }
        fail(start_line, "unterminated comment");
    }

    void skip_line_comment() {
        while (pos_ < text_.size() && text_[pos_] != '\n') {
            if (text_[pos_] == '\\' && peek(1) == '\n') {
                pos_ += 2;
                ++line_;
                continue;
            }
            ++pos_;
        }
    }

    void literal(char quote) {
        std::size_t start_line = line_;
        ++pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\\') {
                if (peek(1) == '\n')
                    ++line_;
                pos_ += 2;
                continue;
            }
            if (c == '\n')
                break;
            ++pos_;
            if (c == quote)
                return;
        }
        fail(start_line, quote == '"' ? "unterminated string literal" : "unterminated character literal");
    }

    void number() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (ident_char(c) || c == '.') {
                ++pos_;
            } else if ((c == '+' || c == '-') && pos_ > 0 &&
                       (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E' || text_[pos_ - 1] == 'p' ||
                        text_[pos_ - 1] == 'P')) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    void punct() {
        for (std::string_view p : kThreeOrTwoCharPuncts) {
            if (text_.substr(pos_, p.size()) == p) {
                pos_ += p.size();
                return;
            }
        }
        ++pos_;
    }

    // Consumes through the end of the logical line. Comments inside the line
    // are skipped so that a `/*` opened in a directive cannot swallow code.
    Token directive() {
        std::size_t begin = pos_;
        std::size_t line = line_;
        while (pos_ < text_.size() && text_[pos_] != '\n') {
            char c = text_[pos_];
            if (c == '\\' && peek(1) == '\n') {
                pos_ += 2;
                ++line_;
            } else if (c == '/' && peek(1) == '*') {
                skip_block_comment();
            } else if (c == '/' && peek(1) == '/') {
                skip_line_comment();
            } else if (c == '"' || c == '\'') {
                // #include <...> never contains quotes; "..." is a literal.
                literal(c);
            } else {
                ++pos_;
            }
        }
        std::size_t end = pos_;
        while (end > begin && std::isspace(static_cast<unsigned char>(text_[end - 1])))
            --end;
        return Token{TokenKind::Directive, begin, end, line, text_.substr(begin, end - begin)};
    }

    std::string_view text_;
    const std::string &file_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

} // namespace

std::vector<Token> tokenize(std::string_view text, const std::string &file) { return Lexer(text, file).run(); }

bool is_c_keyword(std::string_view word) {
    static constexpr std::array<std::string_view, 44> kKeywords = {
        "auto",     "break",    "case",     "char",     "const",    "continue", "default",  "do",
        "double",   "else",     "enum",     "extern",   "float",    "for",      "goto",     "if",
        "inline",   "int",      "long",     "register", "restrict", "return",   "short",    "signed",
        "sizeof",   "static",   "struct",   "switch",   "typedef",  "union",    "unsigned", "void",
        "volatile", "while",    "_Bool",    "_Complex", "_Alignas", "_Alignof", "_Atomic",  "_Generic",
        "_Noreturn", "_Static_assert", "_Thread_local", "__attribute__",
    };
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::string_view directive_name(const Token &tok) {
    std::string_view t = tok.text;
    std::size_t i = 1;
    while (i < t.size() && (t[i] == ' ' || t[i] == '\t'))
        ++i;
    std::size_t j = i;
    while (j < t.size() && ident_char(t[j]))
        ++j;
    return t.substr(i, j - i);
}

} // namespace ccport
