#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "nsvtp/error.hpp"

namespace nsvtp::scheme {

struct SourcePos {
  int line = 1;
  int column = 1;

  std::string str() const {
    return std::to_string(line) + ":" + std::to_string(column);
  }
};

enum class TokenKind { Identifier, Number, String, Punct, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;  // punctuation spelling, identifier, unescaped string
  double number = 0.0;
  SourcePos pos;
};

inline bool is_identifier_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool is_identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_keyword(std::string_view word) {
  static constexpr std::string_view keywords[] = {
      "blueprint", "rev", "scheme", "const", "param",
      "outcome",   "formula", "when", "and", "tweak"};
  for (auto k : keywords) {
    if (k == word) return true;
  }
  return false;
}

inline bool is_plain_identifier(std::string_view word) {
  if (word.empty() || !is_identifier_start(word[0]) || is_keyword(word)) return false;
  for (char c : word) {
    if (!is_identifier_char(c)) return false;
  }
  return true;
}

[[noreturn]] inline void syntax_error(const SourcePos& pos, const std::string& msg) {
  fail(ErrorCode::SyntaxError, "at " + pos.str() + ": " + msg);
}

// Comments run from '#' to end of line.
inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  SourcePos pos;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++pos.line;
        pos.column = 1;
      } else {
        ++pos.column;
      }
      ++i;
    }
  };

  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token tok;
    tok.pos = pos;
    if (is_identifier_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_identifier_char(src[j])) ++j;
      tok.kind = TokenKind::Identifier;
      tok.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      auto digits = [&] {
        const auto start = j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        return j > start;
      };
      digits();
      if (j < src.size() && src[j] == '.') {
        ++j;
        if (!digits()) syntax_error(pos, "expected digits after '.'");
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        ++j;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
        if (!digits()) syntax_error(pos, "expected exponent digits");
      }
      tok.kind = TokenKind::Number;
      tok.text = std::string(src.substr(i, j - i));
      const auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(),
                                       tok.number);
      if (res.ec != std::errc{} || !std::isfinite(tok.number)) {
        syntax_error(pos, "number '" + tok.text + "' is out of range");
      }
      advance(j - i);
    } else if (c == '"') {
      advance(1);
      tok.kind = TokenKind::String;
      while (true) {
        if (i >= src.size() || src[i] == '\n') syntax_error(tok.pos, "unterminated string");
        if (src[i] == '"') {
          advance(1);
          break;
        }
        if (src[i] == '\\') {
          if (i + 1 >= src.size() || (src[i + 1] != '"' && src[i + 1] != '\\')) {
            syntax_error(pos, "unsupported escape in string");
          }
          tok.text.push_back(src[i + 1]);
          advance(2);
          continue;
        }
        tok.text.push_back(src[i]);
        advance(1);
      }
    } else {
      static constexpr std::string_view two[] = {"<=", ">=", "==", "!=", "->"};
      tok.kind = TokenKind::Punct;
      for (auto t : two) {
        if (src.substr(i, 2) == t) tok.text = std::string(t);
      }
      if (tok.text.empty()) {
        static constexpr std::string_view singles = "{}()[],;:=+-*/^<>.";
        if (singles.find(c) == std::string_view::npos) {
          syntax_error(pos, std::string("unexpected character '") + c + "'");
        }
        tok.text = std::string(1, c);
      }
      advance(tok.text.size());
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.pos = pos;
  out.push_back(end);
  return out;
}

// Token cursor shared by the blueprint and tweak parsers.
class TokenStream {
 public:
  explicit TokenStream(std::string_view src) : toks_(tokenize(src)) {}

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(idx_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[idx_];
    if (idx_ + 1 < toks_.size()) ++idx_;
    return t;
  }
  bool at_end() const { return peek().kind == TokenKind::End; }

  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::Punct && peek(ahead).text == p;
  }
  bool is_keyword(std::string_view kw) const {
    return peek().kind == TokenKind::Identifier && peek().text == kw;
  }

  bool accept_punct(std::string_view p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  bool accept_keyword(std::string_view kw) {
    if (!is_keyword(kw)) return false;
    next();
    return true;
  }

  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) unexpected("'" + std::string(p) + "'");
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) unexpected("'" + std::string(kw) + "'");
  }

  std::string expect_identifier(std::string_view what = "identifier") {
    const auto& t = peek();
    if (t.kind != TokenKind::Identifier || scheme::is_keyword(t.text)) {
      unexpected(std::string(what));
    }
    return next().text;
  }

  double expect_signed_number() {
    const bool neg = accept_punct("-");
    if (peek().kind != TokenKind::Number) unexpected("number");
    const double v = next().number;
    return neg ? -v : v;
  }

  [[noreturn]] void unexpected(const std::string& expected) const {
    const auto& t = peek();
    std::string found;
    switch (t.kind) {
      case TokenKind::End: found = "end of input"; break;
      case TokenKind::String: found = "string \"" + t.text + "\""; break;
      default: found = "'" + t.text + "'"; break;
    }
    syntax_error(t.pos, "expected " + expected + ", found " + found);
  }

 private:
  std::vector<Token> toks_;
  std::size_t idx_ = 0;
};

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace nsvtp::scheme
