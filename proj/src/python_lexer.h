#pragma once

// Tokenizer for the subset of Python lexical structure the syntax model
// needs. Groups tokens into logical lines (bracket and backslash joining).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "securefix/source_model.h"

namespace securefix::detail {

enum class TokenKind { Name, Number, String, Op };

struct Token {
  TokenKind kind = TokenKind::Op;
  std::string_view text;
  std::size_t offset = 0;
  std::size_t end = 0;
  int line = 1;
  int end_line = 1;
  int col = 0;
  bool fstring = false;
  bool raw = false;
  std::string value;  // decoded body for strings

  bool is_op(std::string_view op) const { return kind == TokenKind::Op && text == op; }
  bool is_name(std::string_view name) const { return kind == TokenKind::Name && text == name; }
};

struct LogicalTokens {
  std::vector<Token> tokens;
  int start_line = 1;
  int end_line = 1;
  int indent = 0;
  bool bad = false;  // contains an unrecoverable lexical error
};

struct LexResult {
  std::vector<LogicalTokens> lines;
  std::vector<ParseError> errors;
};

LexResult lex_python(std::string_view text);

bool is_python_keyword(std::string_view word);

/// Counts lines the same way SourceFile does.
int count_lines(std::string_view text);

}  // namespace securefix::detail
