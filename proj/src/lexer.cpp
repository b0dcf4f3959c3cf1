#include "mml/lexer.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>

namespace mml {

namespace {

constexpr std::array<std::string_view, 12> kKeywords = {"type", "proc",   "link",  "when",   "while",
                                                         "with", "fill",   "conc",  "amount", "const",
                                                         "site", "particle"};

// Longest first so that `**` wins over `*`.
constexpr std::array<std::string_view, 25> kPuncts = {"**", "<=", ">=", "==", "!=", "&&", "||", "(", ")",
                                                      "{",  "}",  "[",  "]",  ",",  ";",  ":",  ".", "+",
                                                      "-",  "*",  "/",  "<",  ">",  "=",  "!"};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

} // namespace

const char* to_string(TokenKind kind)
{
    switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::String: return "string";
    case TokenKind::Punct: return "punct";
    case TokenKind::Arrow: return "arrow";
    case TokenKind::End: return "end of input";
    }
    return "?";
}

bool is_keyword(std::string_view word)
{
    for (auto k : kKeywords)
        if (k == word)
            return true;
    return false;
}

std::vector<Token> tokenize(std::string_view source, const std::string& file_name)
{
    auto file = std::make_shared<const std::string>(file_name);
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    int col = 1;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (source[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    auto span_here = [&](std::size_t len) { return SourceSpan{file, line, col, i, len}; };

    while (i < source.size()) {
        char c = source[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
            while (i < source.size() && source[i] != '\n')
                advance(1);
            continue;
        }

        Token tok;
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < source.size() && ident_char(source[j]))
                ++j;
            tok.text = std::string(source.substr(i, j - i));
            tok.kind = is_keyword(tok.text) ? TokenKind::Keyword : TokenKind::Identifier;
        } else if (digit(c) || (c == '.' && i + 1 < source.size() && digit(source[i + 1]))) {
            std::size_t j = i;
            while (j < source.size() && digit(source[j]))
                ++j;
            if (j < source.size() && source[j] == '.' && j + 1 < source.size() && digit(source[j + 1])) {
                ++j;
                while (j < source.size() && digit(source[j]))
                    ++j;
            }
            if (j < source.size() && (source[j] == 'e' || source[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < source.size() && (source[k] == '+' || source[k] == '-'))
                    ++k;
                if (k < source.size() && digit(source[k])) {
                    while (k < source.size() && digit(source[k]))
                        ++k;
                    j = k;
                }
            }
            tok.text = std::string(source.substr(i, j - i));
            tok.kind = TokenKind::Number;
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), value);
            if (ec != std::errc() || ptr != tok.text.data() + tok.text.size() || !std::isfinite(value))
                throw LexError(span_here(tok.text.size()), "number '" + tok.text + "' is not a finite real");
            tok.number = value;
        } else if (c == '"') {
            std::size_t j = i + 1;
            while (j < source.size() && source[j] != '"' && source[j] != '\n')
                ++j;
            if (j >= source.size() || source[j] != '"')
                throw LexError(span_here(1), "unterminated string literal");
            tok.text = std::string(source.substr(i, j + 1 - i));
            tok.kind = TokenKind::String;
        } else if (c == '-' && i + 1 < source.size() && source[i + 1] == '>') {
            tok.text = "->";
            tok.kind = TokenKind::Arrow;
        } else {
            for (auto p : kPuncts) {
                if (source.substr(i, p.size()) == p) {
                    tok.text = std::string(p);
                    tok.kind = TokenKind::Punct;
                    break;
                }
            }
            if (tok.text.empty()) {
                std::string shown(1, c);
                if (static_cast<unsigned char>(c) >= 0x80)
                    shown = "non-ASCII byte";
                throw LexError(span_here(1), "unrecognized character '" + shown + "'");
            }
        }
        tok.span = span_here(tok.text.size());
        advance(tok.text.size());
        out.push_back(std::move(tok));
    }
    return out;
}

} // namespace mml
