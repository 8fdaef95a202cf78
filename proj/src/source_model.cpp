#include "securefix/source_model.h"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "python_lexer.h"
#include "securefix/errors.h"

namespace securefix {

using detail::LogicalTokens;
using detail::Token;
using detail::TokenKind;

// ---------------------------------------------------------------------------
// SourceFile

namespace {

std::vector<std::size_t> compute_line_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  if (text.empty()) return offsets;
  offsets.push_back(0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool ends_line = text[i] == '\n' || (text[i] == '\r' && (i + 1 >= text.size() || text[i + 1] != '\n'));
    if (ends_line && i + 1 < text.size()) offsets.push_back(i + 1);
  }
  return offsets;
}

}  // namespace

SourceFile::SourceFile(std::filesystem::path path, std::string text)
    : path_(std::move(path)), text_(std::move(text)), line_offsets_(compute_line_offsets(text_)) {}

SourceFile SourceFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  if (!is_valid_utf8(text)) {
    throw LoadError(path.string() + ": not valid UTF-8 (only UTF-8 sources are supported)");
  }
  return SourceFile(path, std::move(text));
}

ByteSpan SourceFile::byte_span(const LineSpan& span) const {
  std::size_t begin = line_offsets_[static_cast<std::size_t>(span.start - 1)];
  std::size_t end = span.end < line_count() ? line_offsets_[static_cast<std::size_t>(span.end)] : text_.size();
  return {begin, end};
}

std::string_view SourceFile::line(int number) const {
  if (number < 1 || number > line_count()) return {};
  ByteSpan b = byte_span({number, number});
  return std::string_view(text_).substr(b.begin, b.size());
}

std::string_view SourceFile::newline() const {
  std::size_t nl = text_.find_first_of("\r\n");
  if (nl == std::string::npos) return "\n";
  if (text_[nl] == '\r') {
    return nl + 1 < text_.size() && text_[nl + 1] == '\n' ? std::string_view("\r\n") : std::string_view("\r");
  }
  return "\n";
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    unsigned long cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

CodeSegment extract_segment(const SourceFile& file, const LineSpan& line_range) {
  if (line_range.start < 1 || line_range.start > line_range.end || line_range.end > file.line_count()) {
    throw RangeError("line span " + std::to_string(line_range.start) + ".." + std::to_string(line_range.end) +
                     " is outside " + file.path().string() + " (" + std::to_string(file.line_count()) +
                     " lines)");
  }
  ByteSpan b = file.byte_span(line_range);
  return {line_range, file.text().substr(b.begin, b.size())};
}

SourceFile splice_segment(const SourceFile& file, const CodeSegment& segment, std::string_view replacement) {
  const LineSpan& r = segment.line_range;
  if (r.start < 1 || r.start > r.end || r.end > file.line_count()) {
    throw StaleSegmentError("segment " + std::to_string(r.start) + ".." + std::to_string(r.end) +
                            " no longer exists in " + file.path().string());
  }
  ByteSpan b = file.byte_span(r);
  if (std::string_view(file.text()).substr(b.begin, b.size()) != segment.text) {
    throw StaleSegmentError("segment " + std::to_string(r.start) + ".." + std::to_string(r.end) + " of " +
                            file.path().string() + " changed since extraction");
  }
  std::string text;
  text.reserve(file.text().size() - b.size() + replacement.size());
  text.append(file.text(), 0, b.begin);
  text.append(replacement);
  text.append(file.text(), b.end);
  return SourceFile(file.path(), std::move(text));
}

// ---------------------------------------------------------------------------
// Parser

const KeywordArg* CallSite::keyword(std::string_view name) const {
  for (const auto& kw : keyword_args) {
    if (kw.name == name) return &kw;
  }
  return nullptr;
}

namespace {

bool is_compound_keyword(std::string_view word) {
  static constexpr std::string_view kWords[] = {"if",  "elif",    "else", "for",   "while", "with",
                                                "try", "except",  "finally", "def", "class"};
  return std::find(std::begin(kWords), std::end(kWords), word) != std::end(kWords);
}

bool is_plain_name(const Token& t) {
  return t.kind == TokenKind::Name && !detail::is_python_keyword(t.text);
}

bool has_format_conversion(std::string_view s) {
  static const std::regex kConversion(R"(%(\([^)]*\))?[-#0 +]*(\*|\d+)?(\.(\*|\d+))?[diouxXeEfFgGcrsa])");
  std::string without_escaped;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 1 < s.size() && s[i + 1] == '%') {
      ++i;
      continue;
    }
    without_escaped.push_back(s[i]);
  }
  return std::regex_search(without_escaped, kConversion);
}

bool has_brace_field(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') {
      if (i + 1 < s.size() && s[i + 1] == '{') {
        ++i;
        continue;
      }
      return true;
    }
  }
  return false;
}

class StatementParser {
 public:
  StatementParser(std::string_view text, SyntaxModel& model) : text_(text), model_(model) {}

  void parse_line(const LogicalTokens& line) {
    const auto& toks = line.tokens;
    match_ = match_brackets(toks);
    parse_statements(line, 0, toks.size(), /*inline_body=*/false);
  }

 private:
  std::string_view text_;
  SyntaxModel& model_;
  std::vector<long> match_;

  static std::vector<long> match_brackets(const std::vector<Token>& toks) {
    std::vector<long> match(toks.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].kind != TokenKind::Op) continue;
      auto t = toks[i].text;
      if (t == "(" || t == "[" || t == "{") {
        stack.push_back(i);
      } else if ((t == ")" || t == "]" || t == "}") && !stack.empty()) {
        match[stack.back()] = static_cast<long>(i);
        match[i] = static_cast<long>(stack.back());
        stack.pop_back();
      }
    }
    return match;
  }

  // Index past the bracket group opening at i, or toks.size() when unmatched.
  std::size_t skip_group(std::size_t i, std::size_t end) const {
    if (match_[i] < 0) return end;
    return static_cast<std::size_t>(match_[i]) + 1;
  }

  bool is_opener(const Token& t) const { return t.is_op("(") || t.is_op("[") || t.is_op("{"); }

  ByteSpan span_of(const std::vector<Token>& toks, std::size_t b, std::size_t e) const {
    return {toks[b].offset, toks[e - 1].end};
  }

  LineSpan lines_of(const std::vector<Token>& toks, std::size_t b, std::size_t e) const {
    int lo = toks[b].line;
    int hi = toks[b].end_line;
    for (std::size_t i = b; i < e; ++i) hi = std::max(hi, toks[i].end_line);
    return {lo, hi};
  }

  // Top-level positions of an operator within [b, e).
  std::vector<std::size_t> split_top(const std::vector<Token>& toks, std::size_t b, std::size_t e,
                                     std::string_view op) const {
    std::vector<std::size_t> out;
    for (std::size_t i = b; i < e;) {
      if (is_opener(toks[i])) {
        i = skip_group(i, e);
        continue;
      }
      if (toks[i].is_op(op)) out.push_back(i);
      ++i;
    }
    return out;
  }

  void parse_statements(const LogicalTokens& line, std::size_t b, std::size_t e, bool inline_body) {
    const auto& toks = line.tokens;
    auto semis = split_top(toks, b, e, ";");
    std::size_t start = b;
    semis.push_back(e);
    bool single = semis.size() == 1;
    for (std::size_t cut : semis) {
      if (cut > start) parse_simple_or_compound(line, start, cut, inline_body || !single);
      start = cut + 1;
    }
  }

  void parse_simple_or_compound(const LogicalTokens& line, std::size_t b, std::size_t e, bool embedded) {
    const auto& toks = line.tokens;
    std::size_t head = b;
    if (toks[head].is_name("async") && head + 1 < e) ++head;
    if (toks[head].kind == TokenKind::Name && is_compound_keyword(toks[head].text)) {
      std::size_t colon = find_header_colon(toks, head, e);
      if (colon == e) {
        scan_expressions(toks, head + 1, e);
        return;
      }
      bool is_def = toks[head].is_name("def") || toks[head].is_name("class");
      scan_expressions(toks, is_def ? head + 2 : head + 1, colon);
      if (colon + 1 < e) parse_statements(line, colon + 1, e, true);
      return;
    }
    if (toks[b].is_op("@")) {
      scan_expressions(toks, b + 1, e);
      return;
    }
    if (toks[b].is_name("import") || toks[b].is_name("from")) {
      parse_import(line, b, e, embedded);
      return;
    }
    if (toks[b].is_name("assert")) {
      parse_assert(toks, b, e, embedded);
      scan_expressions(toks, b + 1, e);
      return;
    }
    parse_assignment(toks, b, e);
    scan_expressions(toks, b, e);
  }

  std::size_t find_header_colon(const std::vector<Token>& toks, std::size_t b, std::size_t e) const {
    int lambdas = 0;
    for (std::size_t i = b; i < e;) {
      if (is_opener(toks[i])) {
        i = skip_group(i, e);
        continue;
      }
      if (toks[i].is_name("lambda")) ++lambdas;
      if (toks[i].is_op(":")) {
        if (lambdas == 0) return i;
        --lambdas;
      }
      ++i;
    }
    return e;
  }

  // Parses `dotted.name` starting at i; returns index past it.
  std::size_t read_dotted(const std::vector<Token>& toks, std::size_t i, std::size_t e, std::string& out) const {
    out.clear();
    if (i >= e || !is_plain_name(toks[i])) return i;
    out = std::string(toks[i].text);
    ++i;
    while (i + 1 < e && toks[i].is_op(".") && is_plain_name(toks[i + 1])) {
      out += ".";
      out += toks[i + 1].text;
      i += 2;
    }
    return i;
  }

  void parse_import(const LogicalTokens& line, std::size_t b, std::size_t e, bool embedded) {
    const auto& toks = line.tokens;
    bool top_level = line.indent == 0 && !embedded;
    LineSpan lines = lines_of(toks, b, e);
    auto add = [&](std::string module, std::string bound) {
      if (module.empty() || bound.empty()) return;
      model_.imports.push_back({std::move(module), std::move(bound), lines.start, lines.end, top_level});
    };
    if (toks[b].is_name("import")) {
      std::size_t i = b + 1;
      while (i < e) {
        std::string dotted;
        std::size_t next = read_dotted(toks, i, e, dotted);
        if (next == i) break;
        i = next;
        std::string alias;
        if (i + 1 < e && toks[i].is_name("as") && is_plain_name(toks[i + 1])) {
          alias = std::string(toks[i + 1].text);
          i += 2;
        }
        if (alias.empty()) {
          std::string first = dotted.substr(0, dotted.find('.'));
          add(first, first);
        } else {
          add(dotted, alias);
        }
        if (i < e && toks[i].is_op(",")) ++i;
        else break;
      }
      return;
    }
    // from <module> import <names>
    std::size_t i = b + 1;
    std::string prefix;
    while (i < e && (toks[i].is_op(".") || toks[i].is_op("..."))) {
      prefix += toks[i].text;
      ++i;
    }
    std::string dotted;
    i = read_dotted(toks, i, e, dotted);
    prefix += dotted;
    if (prefix.empty() || i >= e || !toks[i].is_name("import")) return;
    ++i;
    std::size_t stop = e;
    if (i < e && toks[i].is_op("(")) {
      stop = match_[i] > 0 ? static_cast<std::size_t>(match_[i]) : e;
      ++i;
    }
    while (i < stop) {
      if (!is_plain_name(toks[i])) break;
      std::string name(toks[i].text);
      ++i;
      std::string alias = name;
      if (i + 1 < stop && toks[i].is_name("as") && is_plain_name(toks[i + 1])) {
        alias = std::string(toks[i + 1].text);
        i += 2;
      }
      std::string module = prefix.back() == '.' ? prefix + name : prefix + "." + name;
      add(module, alias);
      if (i < stop && toks[i].is_op(",")) ++i;
      else break;
    }
  }

  void parse_assert(const std::vector<Token>& toks, std::size_t b, std::size_t e, bool embedded) {
    StatementInfo info;
    info.kind = "assert";
    info.line_range = lines_of(toks, b, e);
    info.col = toks[b].col;
    info.span = span_of(toks, b, e);
    info.whole_logical_line = !embedded;
    auto commas = split_top(toks, b + 1, e, ",");
    std::size_t cond_end = commas.empty() ? e : commas.front();
    if (cond_end > b + 1) {
      info.condition = span_of(toks, b + 1, cond_end);
    } else {
      info.condition = {toks[b].end, toks[b].end};
    }
    if (!commas.empty() && commas.front() + 1 < e) {
      info.message = span_of(toks, commas.front() + 1, e);
    }
    model_.statements.push_back(std::move(info));
  }

  ArgSummary summarize(const std::vector<Token>& toks, std::size_t b, std::size_t e) const {
    ArgSummary arg;
    arg.span = span_of(toks, b, e);
    bool all_strings = true;
    bool any_f = false;
    std::string joined;
    for (std::size_t i = b; i < e; ++i) {
      if (toks[i].kind != TokenKind::String) {
        all_strings = false;
        break;
      }
      any_f = any_f || toks[i].fstring;
      joined += toks[i].value;
    }
    if (all_strings) {
      arg.is_fstring = any_f;
      if (!any_f) {
        arg.kind = ArgKind::StringLiteral;
        arg.value = std::move(joined);
        return arg;
      }
    }
    if (toks[b].kind == TokenKind::Name) {
      std::string dotted;
      bool word = toks[b].is_name("True") || toks[b].is_name("False") || toks[b].is_name("None");
      if (word && e == b + 1) {
        arg.kind = ArgKind::Name;
        arg.value = std::string(toks[b].text);
        return arg;
      }
      if (read_dotted(toks, b, e, dotted) == e) {
        arg.kind = ArgKind::Name;
        arg.value = std::move(dotted);
        return arg;
      }
    }
    arg.kind = ArgKind::Other;
    arg.value = std::string(text_.substr(arg.span.begin, arg.span.size()));
    return arg;
  }

  void parse_assignment(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
    auto eqs = split_top(toks, b, e, "=");
    if (eqs.empty()) return;
    std::size_t value_begin = eqs.back() + 1;
    if (value_begin >= e) return;
    ArgSummary value = summarize(toks, value_begin, e);
    LineSpan lines = lines_of(toks, b, e);
    std::size_t target_begin = b;
    for (std::size_t cut : eqs) {
      std::size_t target_end = cut;
      // Annotated form `name: type = value`.
      auto colons = split_top(toks, target_begin, target_end, ":");
      if (!colons.empty()) target_end = colons.front();
      std::string dotted;
      if (target_end > target_begin && read_dotted(toks, target_begin, target_end, dotted) == target_end) {
        Assignment a;
        a.target_name = dotted.substr(dotted.rfind('.') == std::string::npos ? 0 : dotted.rfind('.') + 1);
        a.line = lines.start;
        a.line_range = lines;
        a.value_col = toks[value_begin].col;
        a.value_span = value.span;
        if (value.kind == ArgKind::StringLiteral) {
          a.value_kind = ValueKind::StringLiteral;
          a.literal_value = value.value;
        }
        model_.assignments.push_back(std::move(a));
      }
      target_begin = cut + 1;
    }
  }

  void scan_expressions(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
    if (b >= e) return;
    scan_calls(toks, b, e);
    scan_strings(toks, b, e);
  }

  void scan_calls(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      if (!is_plain_name(toks[i])) continue;
      if (i > 0 && toks[i - 1].is_op(".")) continue;
      if (i > 0 && (toks[i - 1].is_name("def") || toks[i - 1].is_name("class"))) continue;
      std::string callee;
      std::size_t after = read_dotted(toks, i, e, callee);
      if (after >= e || !toks[after].is_op("(") || match_[after] < 0) continue;
      auto close = static_cast<std::size_t>(match_[after]);
      if (close >= e) continue;
      CallSite call;
      call.callee_raw = callee;
      call.col_offset = toks[i].col;
      call.callee_span = {toks[i].offset, toks[after - 1].end};
      call.paren_span = {toks[after].offset, toks[close].end};
      call.line_range = {toks[i].line, std::max(toks[close].end_line, toks[i].line)};
      parse_args(toks, after + 1, close, call);
      model_.calls.push_back(std::move(call));
    }
  }

  void parse_args(const std::vector<Token>& toks, std::size_t b, std::size_t e, CallSite& call) const {
    auto commas = split_top(toks, b, e, ",");
    commas.push_back(e);
    std::size_t start = b;
    for (std::size_t cut : commas) {
      std::size_t s = start;
      start = cut + 1;
      if (cut <= s) continue;
      if (toks[s].is_op("*") || toks[s].is_op("**")) {
        call.has_star_args = true;
        continue;
      }
      if (cut - s >= 3 && is_plain_name(toks[s]) && toks[s + 1].is_op("=")) {
        KeywordArg kw;
        kw.name = std::string(toks[s].text);
        kw.value = summarize(toks, s + 2, cut);
        kw.span = span_of(toks, s, cut);
        call.keyword_args.push_back(std::move(kw));
        continue;
      }
      // Generator argument `f(x for x in y)` is still a single positional.
      call.positional_args.push_back(summarize(toks, s, cut));
    }
  }

  void scan_strings(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e;) {
      if (toks[i].kind != TokenKind::String) {
        ++i;
        continue;
      }
      std::size_t j = i;
      StringLiteral lit;
      while (j < e && toks[j].kind == TokenKind::String) {
        lit.is_fstring = lit.is_fstring || toks[j].fstring;
        lit.value += toks[j].value;
        ++j;
      }
      lit.line = toks[i].line;
      lit.line_range = lines_of(toks, i, j);
      lit.col = toks[i].col;
      lit.span = span_of(toks, i, j);
      bool percent = j < e && toks[j].is_op("%");
      bool format = j + 2 < e && toks[j].is_op(".") && toks[j + 1].is_name("format") && toks[j + 2].is_op("(");
      auto operand = [](const Token& t) {
        return is_plain_name(t) || t.is_op(")") || t.is_op("]");
      };
      bool concat = (j + 1 < e && toks[j].is_op("+") && is_plain_name(toks[j + 1])) ||
                    (i >= b + 2 && toks[i - 1].is_op("+") && operand(toks[i - 2]));
      lit.interpolated = lit.is_fstring || percent || format || concat;
      lit.has_placeholder = (lit.is_fstring && has_brace_field(lit.value)) ||
                            (percent && has_format_conversion(lit.value)) ||
                            (format && has_brace_field(lit.value)) || concat;
      model_.string_literals.push_back(std::move(lit));
      i = j;
    }
  }
};

struct IndentFrame {
  int indent = 0;
  int def_line = 0;
  int def_body_indent = -1;
};

}  // namespace

SyntaxModel parse_source(std::string_view text) {
  SyntaxModel model;
  model.line_count = detail::count_lines(text);
  detail::LexResult lexed = detail::lex_python(text);
  model.parse_errors = std::move(lexed.errors);

  StatementParser parser(text, model);
  std::vector<IndentFrame> stack{{0, 0, -1}};
  bool pending_block = false;
  const LogicalTokens* opener = nullptr;

  for (const auto& line : lexed.lines) {
    const auto& toks = line.tokens;
    int indent = line.indent;
    if (pending_block) {
      if (indent <= stack.back().indent) {
        model.parse_errors.push_back({line.start_line, "expected an indented block"});
      } else {
        IndentFrame frame = stack.back();
        frame.indent = indent;
        std::size_t h = opener->tokens.front().is_name("async") && opener->tokens.size() > 1 ? 1 : 0;
        if (opener->tokens[h].is_name("def")) {
          frame.def_line = opener->start_line;
          frame.def_body_indent = indent;
        }
        stack.push_back(frame);
      }
      pending_block = false;
    } else if (indent > stack.back().indent) {
      model.parse_errors.push_back({line.start_line, "unexpected indent"});
    } else {
      while (indent < stack.back().indent) stack.pop_back();
      if (indent != stack.back().indent) {
        model.parse_errors.push_back({line.start_line, "unindent does not match any outer indentation level"});
      }
    }

    LogicalLine layout;
    layout.span = {line.start_line, line.end_line};
    layout.indent = indent;
    layout.first_token = std::string(toks.front().text);
    layout.opens_block = toks.back().is_op(":");
    layout.enclosing_def_line = stack.back().def_line;
    layout.body_indent = stack.back().def_body_indent;
    layout.string_only = std::all_of(toks.begin(), toks.end(), [](const Token& t) { return t.kind == TokenKind::String; });
    model.logical_lines.push_back(layout);

    std::size_t head = toks.front().is_name("async") && toks.size() > 1 ? 1 : 0;
    if (toks[head].kind == TokenKind::Name && is_compound_keyword(toks[head].text)) {
      bool has_colon = std::any_of(toks.begin(), toks.end(), [](const Token& t) { return t.is_op(":"); });
      if (!has_colon) model.parse_errors.push_back({line.start_line, "expected ':'"});
    }
    if (layout.opens_block) {
      pending_block = true;
      opener = &line;
    }
    if (!line.bad) parser.parse_line(line);
  }
  if (pending_block) {
    model.parse_errors.push_back({opener->end_line, "expected an indented block"});
  }

  std::sort(model.parse_errors.begin(), model.parse_errors.end(),
            [](const ParseError& a, const ParseError& b) { return a.line < b.line; });
  model.parse_ok = model.parse_errors.empty();
  return model;
}

std::string resolve_callee(const SyntaxModel& model, const CallSite& call) {
  const std::string& raw = call.callee_raw;
  std::string first = raw.substr(0, raw.find('.'));
  const ImportBinding* best = nullptr;
  for (const auto& binding : model.imports) {
    if (binding.bound_name != first) continue;
    if (best == nullptr || (binding.line <= call.line_range.start &&
                            (best->line > call.line_range.start || binding.line >= best->line))) {
      best = &binding;
    }
  }
  if (best == nullptr) return raw;
  return best->module_path + raw.substr(first.size());
}

SourceFile insert_imports(const SourceFile& file, std::span<const std::string> modules) {
  SyntaxModel model = parse_source(file.text());
  std::vector<std::string> missing;
  for (const auto& module : modules) {
    bool bound = std::any_of(model.imports.begin(), model.imports.end(), [&](const ImportBinding& b) {
      return b.bound_name == module && b.module_path == module;
    });
    if (!bound && std::find(missing.begin(), missing.end(), module) == missing.end()) {
      missing.push_back(module);
    }
  }
  if (missing.empty()) return file;

  int after_line = 0;
  for (const auto& binding : model.imports) {
    if (binding.top_level) after_line = std::max(after_line, binding.end_line);
  }
  if (after_line == 0 && !model.logical_lines.empty() && model.logical_lines.front().string_only) {
    after_line = model.logical_lines.front().span.end;
  }
  if (after_line == 0 && !model.logical_lines.empty()) {
    after_line = model.logical_lines.front().span.start - 1;
  }

  std::string nl(file.newline());
  std::string block;
  for (const auto& module : missing) block += "import " + module + nl;

  const std::string& text = file.text();
  std::size_t at = after_line < file.line_count() ? file.line_offsets()[static_cast<std::size_t>(after_line)]
                                                  : text.size();
  if (at == text.size() && !text.empty() && text.back() != '\n' && text.back() != '\r') {
    block = nl + block;
  }
  std::string out = text.substr(0, at) + block + text.substr(at);
  return SourceFile(file.path(), std::move(out));
}

}  // namespace securefix
