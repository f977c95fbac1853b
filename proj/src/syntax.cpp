#include "hintsteer/syntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "hintsteer/error.hpp"

namespace hintsteer {

namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool IsWordStart(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) != 0 || c == '_' || u >= 0x80;
}

bool IsWordChar(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || c == '_' || c == '$' || u >= 0x80;
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

constexpr std::array<std::string_view, 11> kMultiCharOps = {
    "->>", "<=", ">=", "<>", "!=", "||", "::", "->", "=>", "~~", "!~"};

constexpr std::string_view kOperatorChars = "+-*/<>=~!@#%^&|`?";
constexpr std::string_view kPunctuationChars = "(),;.[]:";

// Segment of source text that is neither a token nor whitespace.
struct Comment {
  std::size_t begin;
  std::size_t end;
};

struct LexResult {
  TokenStream tokens;
  std::vector<Comment> comments;
};

LexResult LexWithComments(std::string_view sql) {
  LexResult out;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  while (i < n) {
    const char c = sql[i];
    if (IsSpace(c)) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      const std::size_t start = i;
      while (i < n && sql[i] != '\n') ++i;
      std::size_t end = i;
      if (end > start && sql[end - 1] == '\r') --end;
      out.comments.push_back({start, end});
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      const auto close = sql.find("*/", i + 2);
      if (close == std::string_view::npos) {
        throw DataError("unterminated block comment at offset " + std::to_string(i));
      }
      out.comments.push_back({i, close + 2});
      i = close + 2;
      continue;
    }

    Token tok;
    tok.begin = i;
    // E'...' strings also allow backslash escapes.
    const bool escape_string = (c == 'E' || c == 'e') && i + 1 < n && sql[i + 1] == '\'';
    if (c == '\'' || c == '"' || escape_string) {
      const char quote = escape_string ? '\'' : c;
      std::size_t j = escape_string ? i + 2 : i + 1;
      bool closed = false;
      while (j < n) {
        if (escape_string && sql[j] == '\\' && j + 1 < n) {
          j += 2;
          continue;
        }
        if (sql[j] == quote) {
          if (j + 1 < n && sql[j + 1] == quote) {
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        ++j;
      }
      if (!closed) {
        throw DataError(std::string(quote == '\'' ? "unterminated string literal"
                                                  : "unterminated quoted identifier") +
                        " at offset " + std::to_string(i));
      }
      tok.kind = quote == '\'' ? TokenKind::kString : TokenKind::kQuotedIdent;
      i = j;
    } else if (IsDigit(c) || (c == '.' && i + 1 < n && IsDigit(sql[i + 1]))) {
      std::size_t j = i;
      while (j < n && IsDigit(sql[j])) ++j;
      if (j < n && sql[j] == '.') {
        ++j;
        while (j < n && IsDigit(sql[j])) ++j;
      }
      if (j < n && (sql[j] == 'e' || sql[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < n && (sql[k] == '+' || sql[k] == '-')) ++k;
        if (k < n && IsDigit(sql[k])) {
          while (k < n && IsDigit(sql[k])) ++k;
          j = k;
        }
      }
      tok.kind = TokenKind::kNumber;
      i = j;
    } else if (IsWordStart(c) || (c == '$' && i + 1 < n && IsDigit(sql[i + 1]))) {
      std::size_t j = i + 1;
      while (j < n && IsWordChar(sql[j])) ++j;
      tok.kind = TokenKind::kWord;
      i = j;
    } else if (kPunctuationChars.find(c) != std::string_view::npos &&
               !(c == ':' && i + 1 < n && sql[i + 1] == ':')) {
      tok.kind = TokenKind::kPunctuation;
      ++i;
    } else {
      std::size_t len = 1;
      for (auto op : kMultiCharOps) {
        if (sql.substr(i, op.size()) == op) {
          len = op.size();
          break;
        }
      }
      if (len == 1 && kOperatorChars.find(c) == std::string_view::npos) {
        // Anything unrecognized stands alone.
        tok.kind = TokenKind::kPunctuation;
      } else {
        tok.kind = TokenKind::kOperator;
      }
      i += len;
    }
    tok.end = i;
    tok.text = std::string(sql.substr(tok.begin, tok.end - tok.begin));
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

bool WordIs(const Token& t, std::string_view upper) {
  if (t.kind != TokenKind::kWord || t.text.size() != upper.size()) return false;
  for (std::size_t i = 0; i < upper.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(t.text[i])) != upper[i]) return false;
  }
  return true;
}

enum class ClauseStart { kNone, kPlain, kCondition };

ClauseStart ClauseAt(const TokenStream& tokens, std::size_t i) {
  const Token& t = tokens[i];
  if (WordIs(t, "FROM") || WordIs(t, "LIMIT")) return ClauseStart::kPlain;
  if (WordIs(t, "WHERE") || WordIs(t, "HAVING")) return ClauseStart::kCondition;
  if ((WordIs(t, "GROUP") || WordIs(t, "ORDER")) && i + 1 < tokens.size() &&
      WordIs(tokens[i + 1], "BY")) {
    return ClauseStart::kPlain;
  }
  return ClauseStart::kNone;
}

std::string Reformat(std::string_view sql, std::string_view indent) {
  if (sql.empty()) throw DataError("cannot reformat empty SQL text");
  const LexResult lexed = LexWithComments(sql);
  const TokenStream& tokens = lexed.tokens;
  std::string out;

  // Comments that fall inside [begin, end).
  auto last_comment_end = [&](std::size_t begin, std::size_t end) -> std::size_t {
    std::size_t last = begin;
    bool any = false;
    for (const auto& c : lexed.comments) {
      if (c.begin >= begin && c.end <= end) {
        last = c.end;
        any = true;
      }
    }
    return any ? last : std::string_view::npos;
  };

  if (tokens.empty()) return std::string(sql);

  {
    const std::size_t lead_end = tokens.front().begin;
    const auto last = last_comment_end(0, lead_end);
    if (last != std::string_view::npos) out.append(sql.substr(0, lead_end));
  }

  int depth = 0;
  bool in_condition = false;
  bool after_condition_keyword = false;
  int pending_between = 0;

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& tok = tokens[i];
    const ClauseStart clause = depth == 0 ? ClauseAt(tokens, i) : ClauseStart::kNone;

    bool newline = false;
    bool indented = false;
    if (i > 0 && depth == 0) {
      if (clause != ClauseStart::kNone) {
        newline = true;
      } else if (after_condition_keyword) {
        newline = indented = true;
      } else if (in_condition && (WordIs(tok, "AND") || WordIs(tok, "OR"))) {
        if (WordIs(tok, "AND") && pending_between > 0) {
          --pending_between;
        } else {
          newline = indented = true;
        }
      }
    }

    if (i > 0) {
      const std::size_t gap_begin = tokens[i - 1].end;
      const std::string_view gap = sql.substr(gap_begin, tok.begin - gap_begin);
      const auto last = last_comment_end(gap_begin, tok.begin);
      if (newline) {
        if (last != std::string_view::npos) out.append(sql.substr(gap_begin, last - gap_begin));
        out.push_back('\n');
        if (indented) out.append(indent);
      } else if (last != std::string_view::npos) {
        out.append(gap);
      } else if (gap.find_first_of("\n\r") != std::string_view::npos) {
        out.push_back(' ');
      } else {
        out.append(gap);
      }
    }
    out.append(tok.text);

    after_condition_keyword = false;
    if (tok.kind == TokenKind::kPunctuation && tok.text == "(") {
      ++depth;
    } else if (tok.kind == TokenKind::kPunctuation && tok.text == ")") {
      depth = std::max(0, depth - 1);
    } else if (depth == 0) {
      if (clause == ClauseStart::kCondition) {
        in_condition = true;
        after_condition_keyword = true;
        pending_between = 0;
      } else if (clause == ClauseStart::kPlain) {
        in_condition = false;
      } else if (tok.kind == TokenKind::kPunctuation && tok.text == ";") {
        in_condition = false;
      } else if (in_condition && WordIs(tok, "BETWEEN")) {
        ++pending_between;
      }
    }
  }

  const std::size_t tail_begin = tokens.back().end;
  const auto last = last_comment_end(tail_begin, sql.size());
  if (last != std::string_view::npos) out.append(sql.substr(tail_begin, last - tail_begin));
  return out;
}

}  // namespace

TokenStream Lex(std::string_view sql) {
  if (sql.empty()) throw DataError("cannot lex empty SQL text");
  return LexWithComments(sql).tokens;
}

std::string JoinTokens(const TokenStream& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out.append(tokens[i].text);
  }
  return out;
}

std::string ToSyntaxB(std::string_view sql) { return Reformat(sql, "    "); }

std::string ToSyntaxC(std::string_view sql) { return Reformat(sql, "\t"); }

std::string ToSyntax(std::string_view sql, Syntax variant) {
  switch (variant) {
    case Syntax::kA: return std::string(sql);
    case Syntax::kB: return ToSyntaxB(sql);
    case Syntax::kC: return ToSyntaxC(sql);
  }
  return std::string(sql);
}

}  // namespace hintsteer
