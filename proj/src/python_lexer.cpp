#include "python_lexer.h"

#include <algorithm>
#include <array>
#include <cctype>

namespace securefix::detail {
namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield"};

constexpr std::array<std::string_view, 5> kThreeCharOps = {"**=", "//=", ">>=", "<<=", "..."};
constexpr std::array<std::string_view, 19> kTwoCharOps = {
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", ":=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
constexpr std::string_view kSingleOps = "+-*/%@&|^~<>()[]{},:.;=";

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
         lower == "rb" || lower == "fr" || lower == "rf";
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string decode_escapes(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\' || i + 1 >= body.size()) {
      out.push_back(c);
      continue;
    }
    char n = body[++i];
    switch (n) {
      case '\n': break;
      case '\r':
        if (i + 1 < body.size() && body[i + 1] == '\n') ++i;
        break;
      case '\\': out.push_back('\\'); break;
      case '\'': out.push_back('\''); break;
      case '"': out.push_back('"'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'a': out.push_back('\a'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case 'x':
      case 'u':
      case 'U': {
        std::size_t digits = n == 'x' ? 2 : (n == 'u' ? 4 : 8);
        unsigned long cp = 0;
        std::size_t k = 0;
        for (; k < digits && i + 1 + k < body.size(); ++k) {
          int h = hex_value(body[i + 1 + k]);
          if (h < 0) break;
          cp = cp * 16 + static_cast<unsigned long>(h);
        }
        if (k == digits && cp <= 0x10FFFF) {
          append_utf8(out, cp);
          i += digits;
        } else {
          out.push_back('\\');
          out.push_back(n);
        }
        break;
      }
      default:
        if (n >= '0' && n <= '7') {
          unsigned long cp = static_cast<unsigned long>(n - '0');
          for (int k = 0; k < 2 && i + 1 < body.size() && body[i + 1] >= '0' && body[i + 1] <= '7'; ++k) {
            cp = cp * 8 + static_cast<unsigned long>(body[++i] - '0');
          }
          append_utf8(out, cp);
        } else {
          out.push_back('\\');
          out.push_back(n);
        }
    }
  }
  return out;
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        line_starts_.push_back(i + 1);
      } else if (text_[i] == '\r' && (i + 1 >= text_.size() || text_[i + 1] != '\n')) {
        line_starts_.push_back(i + 1);
      }
    }
  }

  LexResult run() {
    while (pos_ < text_.size()) {
      step();
    }
    finish_at_eof();
    return std::move(result_);
  }

 private:
  struct Bracket {
    char ch;
    int line;
  };

  std::string_view text_;
  std::vector<std::size_t> line_starts_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::vector<Bracket> brackets_;
  LogicalTokens current_;
  LexResult result_;

  std::size_t line_start(int line) const {
    return line_starts_[static_cast<std::size_t>(line - 1)];
  }

  int col_of(std::size_t offset) const { return static_cast<int>(offset - line_start(line_)); }

  void error(int line, std::string message) {
    result_.errors.push_back({line, std::move(message)});
  }

  // Consumes a newline sequence at pos_ if present.
  bool consume_newline() {
    if (pos_ >= text_.size()) return false;
    if (text_[pos_] == '\r') {
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
      ++line_;
      return true;
    }
    if (text_[pos_] == '\n') {
      ++pos_;
      ++line_;
      return true;
    }
    return false;
  }

  int visual_indent(int line, std::size_t offset) const {
    int width = 0;
    for (std::size_t i = line_start(line); i < offset; ++i) {
      if (text_[i] == '\t') {
        width = (width / 8 + 1) * 8;
      } else {
        ++width;
      }
    }
    return width;
  }

  void push(Token tok) {
    if (current_.tokens.empty()) {
      current_.start_line = tok.line;
      current_.indent = visual_indent(tok.line, tok.offset);
    }
    current_.end_line = tok.end_line;
    current_.tokens.push_back(std::move(tok));
  }

  void emit_logical_line() {
    if (!current_.tokens.empty()) {
      result_.lines.push_back(std::move(current_));
    }
    current_ = LogicalTokens{};
  }

  void step() {
    char c = text_[pos_];
    if (c == ' ' || c == '\t' || c == '\f') {
      ++pos_;
      return;
    }
    if (c == '#') {
      while (pos_ < text_.size() && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
      return;
    }
    if (c == '\\') {
      std::size_t save = pos_;
      ++pos_;
      if (consume_newline()) return;
      pos_ = save;
      bad_char();
      return;
    }
    if (c == '\n' || c == '\r') {
      consume_newline();
      if (brackets_.empty()) emit_logical_line();
      return;
    }
    auto uc = static_cast<unsigned char>(c);
    if (c == '"' || c == '\'') {
      lex_string(pos_, pos_);
      return;
    }
    if (is_ident_start(uc)) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      std::string_view word = text_.substr(start, pos_ - start);
      if (pos_ < text_.size() && (text_[pos_] == '"' || text_[pos_] == '\'') && is_string_prefix(word)) {
        lex_string(start, pos_);
        return;
      }
      Token tok;
      tok.kind = TokenKind::Name;
      tok.text = word;
      tok.offset = start;
      tok.end = pos_;
      tok.line = tok.end_line = line_;
      tok.col = col_of(start);
      push(std::move(tok));
      return;
    }
    if (std::isdigit(uc) || (c == '.' && pos_ + 1 < text_.size() &&
                             std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      lex_number();
      return;
    }
    lex_op();
  }

  void bad_char() {
    error(line_, "invalid character in source");
    current_.bad = true;
    ++pos_;
  }

  void lex_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        ++pos_;
      } else if ((c == '+' || c == '-') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E') &&
                 !(text_[start] == '0' && start + 1 < text_.size() &&
                   (text_[start + 1] == 'x' || text_[start + 1] == 'X'))) {
        ++pos_;
      } else {
        break;
      }
    }
    Token tok;
    tok.kind = TokenKind::Number;
    tok.text = text_.substr(start, pos_ - start);
    tok.offset = start;
    tok.end = pos_;
    tok.line = tok.end_line = line_;
    tok.col = col_of(start);
    push(std::move(tok));
  }

  void lex_op() {
    std::size_t start = pos_;
    std::string_view rest = text_.substr(pos_);
    std::string_view op;
    for (auto candidate : kThreeCharOps) {
      if (rest.starts_with(candidate)) op = candidate;
    }
    if (op.empty()) {
      for (auto candidate : kTwoCharOps) {
        if (rest.starts_with(candidate)) op = candidate;
      }
    }
    if (op.empty()) {
      if (kSingleOps.find(rest.front()) == std::string_view::npos) {
        bad_char();
        return;
      }
      op = rest.substr(0, 1);
    }
    pos_ += op.size();
    char c = op.front();
    if (op.size() == 1 && (c == '(' || c == '[' || c == '{')) {
      brackets_.push_back({c, line_});
    } else if (op.size() == 1 && (c == ')' || c == ']' || c == '}')) {
      char want = c == ')' ? '(' : (c == ']' ? '[' : '{');
      if (brackets_.empty() || brackets_.back().ch != want) {
        error(line_, std::string("unmatched '") + c + "'");
        return;  // token dropped, line still analyzed
      }
      brackets_.pop_back();
    }
    Token tok;
    tok.kind = TokenKind::Op;
    tok.text = text_.substr(start, op.size());
    tok.offset = start;
    tok.end = pos_;
    tok.line = tok.end_line = line_;
    tok.col = col_of(start);
    push(std::move(tok));
  }

  void lex_string(std::size_t start, std::size_t quote_pos) {
    std::string_view prefix = text_.substr(start, quote_pos - start);
    bool raw = false;
    bool fstr = false;
    for (char p : prefix) {
      char l = static_cast<char>(std::tolower(static_cast<unsigned char>(p)));
      raw = raw || l == 'r';
      fstr = fstr || l == 'f';
    }
    char q = text_[quote_pos];
    bool triple = quote_pos + 2 < text_.size() && text_[quote_pos + 1] == q && text_[quote_pos + 2] == q;
    std::size_t body_start = quote_pos + (triple ? 3 : 1);
    int start_line = line_;
    int start_col = col_of(start);
    pos_ = body_start;
    std::size_t body_end = 0;
    bool closed = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\\') {
        ++pos_;
        if (pos_ < text_.size() && !consume_newline()) ++pos_;
        continue;
      }
      if (c == '\n' || c == '\r') {
        if (!triple) break;
        consume_newline();
        continue;
      }
      if (c == q) {
        if (!triple) {
          body_end = pos_;
          ++pos_;
          closed = true;
          break;
        }
        if (pos_ + 2 < text_.size() && text_[pos_ + 1] == q && text_[pos_ + 2] == q) {
          body_end = pos_;
          pos_ += 3;
          closed = true;
          break;
        }
      }
      ++pos_;
    }
    if (!closed) {
      if (triple) {
        // Unterminated block string: report it and resume on the next line
        // after the opener, dropping the logical line in progress.
        error(start_line, "unterminated triple-quoted string literal");
        current_ = LogicalTokens{};
        brackets_.clear();
        line_ = start_line;
        pos_ = start_line < static_cast<int>(line_starts_.size()) ? line_start(start_line + 1) : text_.size();
        if (pos_ != text_.size()) line_ = start_line + 1;
        return;
      }
      error(start_line, "unterminated string literal");
      current_.bad = true;
      return;  // pos_ sits on the newline, which the main loop handles
    }
    Token tok;
    tok.kind = TokenKind::String;
    tok.text = text_.substr(start, pos_ - start);
    tok.offset = start;
    tok.end = pos_;
    tok.line = start_line;
    tok.end_line = line_;
    tok.col = start_col;
    tok.raw = raw;
    tok.fstring = fstr;
    std::string_view body = text_.substr(body_start, body_end - body_start);
    tok.value = raw ? std::string(body) : decode_escapes(body);
    push(std::move(tok));
  }

  void finish_at_eof() {
    if (!brackets_.empty()) {
      Bracket opener = brackets_.front();
      error(opener.line, std::string("'") + opener.ch + "' was never closed");
      brackets_.clear();
      current_ = LogicalTokens{};
      if (opener.line < static_cast<int>(line_starts_.size())) {
        // Re-lex everything after the opener's line.
        line_ = opener.line + 1;
        pos_ = line_start(line_);
        while (pos_ < text_.size()) step();
        finish_at_eof();
        return;
      }
    }
    emit_logical_line();
  }
};

}  // namespace

bool is_python_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

int count_lines(std::string_view text) {
  int lines = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' || (text[i] == '\r' && (i + 1 >= text.size() || text[i + 1] != '\n'))) ++lines;
  }
  if (!text.empty() && text.back() != '\n' && text.back() != '\r') ++lines;
  return lines;
}

LexResult lex_python(std::string_view text) { return Lexer(text).run(); }

}  // namespace securefix::detail
