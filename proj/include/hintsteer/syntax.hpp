#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hintsteer/workload.hpp"

namespace hintsteer {

enum class TokenKind {
  kWord,           // keyword, identifier, or $n parameter
  kQuotedIdent,    // "..."
  kString,         // '...'
  kNumber,
  kOperator,
  kPunctuation,    // ( ) , ; . [ ] :
};

struct Token {
  TokenKind kind = TokenKind::kWord;
  std::string text;
  // Byte range in the lexed source; ignored by equality.
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Token& a, const Token& b) {
    return a.kind == b.kind && a.text == b.text;
  }
};

using TokenStream = std::vector<Token>;

// Splits SQL into tokens, dropping whitespace and `--` / `/* */` comments.
// String literals keep their exact bytes. Throws DataError on unterminated
// literals, quoted identifiers, or block comments.
TokenStream Lex(std::string_view sql);

// Tokens joined by single spaces; lexes back to the same stream.
std::string JoinTokens(const TokenStream& tokens);

// Clause-per-line layout: a newline before each top-level FROM, WHERE,
// GROUP BY, ORDER BY, HAVING and LIMIT. WHERE/HAVING predicates start on
// their own indented line, as does every top-level AND/OR that joins them
// (the AND of a BETWEEN stays inline). Other whitespace runs that span a line
// collapse to one space; comments are kept.
std::string ToSyntaxB(std::string_view sql);  // four-space indent
std::string ToSyntaxC(std::string_view sql);  // tab indent

std::string ToSyntax(std::string_view sql, Syntax variant);

}  // namespace hintsteer
