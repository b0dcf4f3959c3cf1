#pragma once

#include "mml/diagnostics.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mml {

enum class TokenKind { Keyword, Identifier, Number, String, Punct, Arrow, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    SourceSpan span;
    double number = 0.0;

    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_punct(std::string_view t) const { return is(TokenKind::Punct, t); }
    bool is_keyword(std::string_view t) const { return is(TokenKind::Keyword, t); }
};

const char* to_string(TokenKind kind);

/// True for the reserved words of the language.
bool is_keyword(std::string_view word);

/// Splits `source` into tokens. `//` comments and whitespace are skipped.
/// Throws LexError on the first unrecognized character.
std::vector<Token> tokenize(std::string_view source, const std::string& file_name = "<input>");

} // namespace mml
