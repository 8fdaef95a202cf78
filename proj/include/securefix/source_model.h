#pragma once

// Subject-source substrate: byte-exact line bookkeeping over a Python file
// plus a lightweight syntax model (imports, calls, assignments, literals).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace securefix {

/// Inclusive, 1-based line span.
struct LineSpan {
  int start = 1;
  int end = 1;

  int length() const { return end - start + 1; }
  bool contains(int line) const { return line >= start && line <= end; }
  bool overlaps(const LineSpan& other) const {
    return start <= other.end && other.start <= end;
  }
  bool operator==(const LineSpan&) const = default;
};

/// Half-open byte range into a text.
struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const ByteSpan&) const = default;
};

class SourceFile {
 public:
  SourceFile() = default;
  SourceFile(std::filesystem::path path, std::string text);

  /// Reads a file from disk. Throws LoadError when unreadable or not UTF-8.
  static SourceFile load(const std::filesystem::path& path);

  const std::filesystem::path& path() const { return path_; }
  const std::string& text() const { return text_; }
  std::span<const std::size_t> line_offsets() const { return line_offsets_; }
  int line_count() const { return static_cast<int>(line_offsets_.size()); }

  /// Byte range covering lines [span.start, span.end] including their
  /// terminators. Caller guarantees the span is valid.
  ByteSpan byte_span(const LineSpan& span) const;

  /// Text of one line including its terminator, if any.
  std::string_view line(int number) const;

  /// Newline sequence used by the first terminated line ("\n" by default).
  std::string_view newline() const;

  bool operator==(const SourceFile& other) const {
    return path_ == other.path_ && text_ == other.text_;
  }

 private:
  std::filesystem::path path_;
  std::string text_;
  std::vector<std::size_t> line_offsets_;
};

bool is_valid_utf8(std::string_view bytes);

/// Exact text of a line span, captured from a SourceFile at extraction time.
struct CodeSegment {
  LineSpan line_range;
  std::string text;

  bool operator==(const CodeSegment&) const = default;
};

CodeSegment extract_segment(const SourceFile& file, const LineSpan& line_range);

/// Replaces the segment's lines with `replacement`. Throws StaleSegmentError
/// if the file content at segment.line_range differs from segment.text.
SourceFile splice_segment(const SourceFile& file, const CodeSegment& segment,
                          std::string_view replacement);

// ---------------------------------------------------------------------------
// Syntax model

struct ImportBinding {
  std::string module_path;  // dotted name the binding refers to
  std::string bound_name;   // local identifier introduced
  int line = 1;
  int end_line = 1;
  bool top_level = true;

  bool operator==(const ImportBinding&) const = default;
};

enum class ArgKind { StringLiteral, Name, Other };

struct ArgSummary {
  ArgKind kind = ArgKind::Other;
  /// Decoded literal value, dotted name text, or raw source text for Other.
  std::string value;
  ByteSpan span;
  bool is_fstring = false;

  bool operator==(const ArgSummary&) const = default;
};

struct KeywordArg {
  std::string name;
  ArgSummary value;
  ByteSpan span;  // from the keyword name to the end of its value

  bool operator==(const KeywordArg&) const = default;
};

struct CallSite {
  std::string callee_raw;
  std::vector<ArgSummary> positional_args;
  std::vector<KeywordArg> keyword_args;
  LineSpan line_range;
  int col_offset = 0;
  ByteSpan callee_span;
  ByteSpan paren_span;  // '(' through ')' inclusive
  bool has_star_args = false;

  const KeywordArg* keyword(std::string_view name) const;
  bool operator==(const CallSite&) const = default;
};

enum class ValueKind { StringLiteral, Other };

struct Assignment {
  std::string target_name;  // final identifier of the target
  ValueKind value_kind = ValueKind::Other;
  std::optional<std::string> literal_value;
  int line = 1;
  LineSpan line_range;  // whole statement
  int value_col = 0;
  ByteSpan value_span;

  bool operator==(const Assignment&) const = default;
};

struct StringLiteral {
  std::string value;
  int line = 1;
  LineSpan line_range;
  int col = 0;
  ByteSpan span;
  bool is_fstring = false;
  /// Combined with `%`, `.format(...)`, `+ name`, or written as an f-string.
  bool interpolated = false;
  /// The interpolation actually substitutes into this literal (a `{...}`
  /// field, a `%` conversion, or concatenation with a name).
  bool has_placeholder = false;

  bool operator==(const StringLiteral&) const = default;
};

/// A statement recognized by keyword (currently `assert`).
struct StatementInfo {
  std::string kind;
  LineSpan line_range;
  int col = 0;
  ByteSpan span;                       // keyword through last token
  ByteSpan condition;                  // assert test expression
  std::optional<ByteSpan> message;     // assert message expression
  bool whole_logical_line = true;      // no compound prefix, no `;` siblings

  bool operator==(const StatementInfo&) const = default;
};

/// Layout of one logical line, used for insertion points.
struct LogicalLine {
  LineSpan span;
  int indent = 0;
  std::string first_token;
  bool opens_block = false;   // ends with ':' and has no inline body
  int enclosing_def_line = 0; // innermost enclosing `def` line, 0 at module level
  int body_indent = -1;       // indent of that def's body statements
  bool string_only = false;   // bare string statement (docstring form)

  bool operator==(const LogicalLine&) const = default;
};

struct ParseError {
  int line = 1;
  std::string message;

  bool operator==(const ParseError&) const = default;
};

struct SyntaxModel {
  std::vector<ImportBinding> imports;
  std::vector<CallSite> calls;
  std::vector<Assignment> assignments;
  std::vector<StringLiteral> string_literals;
  std::vector<StatementInfo> statements;
  std::vector<LogicalLine> logical_lines;
  bool parse_ok = true;
  std::vector<ParseError> parse_errors;
  int line_count = 0;
};

/// Never throws on UTF-8 input; problems are reported in parse_errors.
SyntaxModel parse_source(std::string_view text);

/// Canonical dotted name of a call after import-alias substitution.
std::string resolve_callee(const SyntaxModel& model, const CallSite& call);

/// Inserts `import <module>` for each module not already bound under its own
/// name. Placed after the last top-level import, else after any leading
/// comments and module docstring.
SourceFile insert_imports(const SourceFile& file, std::span<const std::string> modules);

}  // namespace securefix
