#include <algorithm>
#include <regex>

#include "securefix/engine.h"

namespace securefix {
namespace {

struct Edit {
  ByteSpan span;
  std::string text;
};

std::string apply_edits(std::string text, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.span.begin > b.span.begin; });
  for (const auto& e : edits) text.replace(e.span.begin, e.span.size(), e.text);
  return text;
}

std::string_view slice(std::string_view text, ByteSpan span) { return text.substr(span.begin, span.size()); }

std::string last_component(std::string_view dotted) {
  auto dot = dotted.rfind('.');
  return std::string(dot == std::string_view::npos ? dotted : dotted.substr(dot + 1));
}

std::string prefix_of(std::string_view dotted) {
  auto dot = dotted.rfind('.');
  return dot == std::string_view::npos ? std::string() : std::string(dotted.substr(0, dot));
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

// The call the finding points at: first line of the segment, same column.
const CallSite* target_call(const SyntaxModel& model, const Finding& finding) {
  for (const auto& call : model.calls) {
    if (call.line_range.start == 1 && call.col_offset == finding.col_offset) return &call;
  }
  return nullptr;
}

// Span that removes one argument together with its separating comma.
ByteSpan removal_span(const CallSite& call, ByteSpan arg) {
  std::vector<ByteSpan> all;
  for (const auto& a : call.positional_args) all.push_back(a.span);
  for (const auto& k : call.keyword_args) all.push_back(k.span);
  std::sort(all.begin(), all.end(), [](ByteSpan a, ByteSpan b) { return a.begin < b.begin; });
  auto it = std::find(all.begin(), all.end(), arg);
  std::size_t k = static_cast<std::size_t>(it - all.begin());
  if (k > 0) return {all[k - 1].end, arg.end};
  if (k + 1 < all.size()) return {arg.begin, all[k + 1].begin};
  return arg;
}

struct Rewrite {
  std::vector<Edit> edits;
  std::vector<std::string> imports;
  std::string explanation;
};

using Rewriter = std::optional<Rewrite> (*)(std::string_view text, const SyntaxModel&, const Finding&);

std::optional<Rewrite> fix_yaml(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call || call->has_star_args) return std::nullopt;
  Rewrite r;
  auto prefix = prefix_of(call->callee_raw);
  if (prefix.empty()) {
    r.edits.push_back({call->callee_span, "yaml.safe_load"});
    r.imports.push_back("yaml");
  } else {
    r.edits.push_back({call->callee_span, prefix + ".safe_load"});
  }
  if (const KeywordArg* loader = call->keyword("Loader")) {
    r.edits.push_back({removal_span(*call, loader->span), ""});
  } else if (call->positional_args.size() > 1) {
    r.edits.push_back({removal_span(*call, call->positional_args[1].span), ""});
  }
  r.explanation = "Replaced yaml.load with yaml.safe_load, which only constructs plain YAML types.";
  return r;
}

std::optional<Rewrite> fix_hash(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call || call->has_star_args) return std::nullopt;
  Rewrite r;
  auto prefix = prefix_of(call->callee_raw);
  if (prefix.empty()) {
    prefix = "hashlib";
    r.imports.push_back("hashlib");
  }
  r.edits.push_back({call->callee_span, prefix + ".sha256"});
  if (last_component(call->callee_raw) == "new") {
    if (call->positional_args.empty()) return std::nullopt;
    r.edits.push_back({removal_span(*call, call->positional_args[0].span), ""});
  }
  r.explanation = "Replaced the weak hash with SHA-256.";
  return r;
}

std::optional<Rewrite> fix_mktemp(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call) return std::nullopt;
  auto prefix = prefix_of(call->callee_raw);
  Rewrite r;
  r.edits.push_back({call->callee_span, (prefix.empty() ? "tempfile" : prefix) + ".mkstemp"});
  if (prefix.empty()) r.imports.push_back("tempfile");
  r.explanation =
      "Replaced tempfile.mktemp with tempfile.mkstemp, which creates the file atomically. mkstemp returns "
      "(fd, path); review handle usage.";
  return r;
}

std::optional<Rewrite> fix_verify(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call) return std::nullopt;
  const KeywordArg* verify = call->keyword("verify");
  if (!verify) return std::nullopt;
  Rewrite r;
  r.edits.push_back({verify->value.span, "True"});
  r.explanation = "Enabled TLS certificate verification (verify=True).";
  return r;
}

std::optional<Rewrite> fix_random(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call) return std::nullopt;
  auto fn = last_component(call->callee_raw);
  Rewrite r;
  r.edits.push_back({call->callee_span, fn == "choice" ? "secrets.choice" : "secrets.SystemRandom()." + fn});
  r.imports.push_back("secrets");
  r.explanation = "Switched to the secrets module, which draws from the operating system CSPRNG.";
  return r;
}

std::optional<Rewrite> fix_password(std::string_view, const SyntaxModel& model, const Finding& f) {
  for (const auto& a : model.assignments) {
    if (a.line_range.start != 1 || a.value_col != f.col_offset || a.value_kind != ValueKind::StringLiteral) continue;
    Rewrite r;
    r.edits.push_back({a.value_span, "os.environ.get(\"" + upper(a.target_name) + "\")"});
    r.imports.push_back("os");
    r.explanation = "Moved the credential out of source code; it is now read from the environment variable " +
                    upper(a.target_name) + ".";
    return r;
  }
  return std::nullopt;
}

std::optional<Rewrite> fix_assert(std::string_view text, const SyntaxModel& model, const Finding& f) {
  for (const auto& s : model.statements) {
    if (s.kind != "assert" || s.line_range.start != 1 || s.col != f.col_offset) continue;
    if (!s.whole_logical_line || s.condition.size() == 0) return std::nullopt;
    std::string replacement = "if not (" + std::string(slice(text, s.condition)) + "): raise AssertionError";
    if (s.message) replacement += "(" + std::string(slice(text, *s.message)) + ")";
    Rewrite r;
    r.edits.push_back({s.span, replacement});
    r.explanation = "Replaced assert with an explicit check that is not stripped under python -O.";
    return r;
  }
  return std::nullopt;
}

std::optional<Rewrite> fix_shell(std::string_view, const SyntaxModel& model, const Finding& f) {
  const CallSite* call = target_call(model, f);
  if (!call) return std::nullopt;
  const KeywordArg* shell = call->keyword("shell");
  const ArgSummary* command = nullptr;
  if (!call->positional_args.empty()) command = &call->positional_args[0];
  else if (const KeywordArg* args = call->keyword("args")) command = &args->value;
  if (!shell || !command || command->kind != ArgKind::StringLiteral) return std::nullopt;

  const std::string& cmd = command->value;
  if (cmd.empty() || cmd.find_first_of("|&;<>*$`\"'\\") != std::string::npos) return std::nullopt;
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (true) {
    auto sp = cmd.find(' ', start);
    pieces.push_back(cmd.substr(start, sp == std::string::npos ? std::string::npos : sp - start));
    if (sp == std::string::npos) break;
    start = sp + 1;
  }
  std::string list = "[";
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    bool bad = p.empty() || std::any_of(p.begin(), p.end(), [](unsigned char c) { return c < 0x20 || c == 0x7f; });
    if (bad) return std::nullopt;
    if (i) list += ", ";
    list += "\"" + p + "\"";
  }
  list += "]";

  Rewrite r;
  r.edits.push_back({command->span, list});
  r.edits.push_back({shell->value.span, "False"});
  r.explanation = "Passed the command as an argument list with shell=False so no shell parses it.";
  return r;
}

Rewriter rewriter_for(std::string_view test_id) {
  if (test_id == "B506") return fix_yaml;
  if (test_id == "B324") return fix_hash;
  if (test_id == "B306") return fix_mktemp;
  if (test_id == "B501") return fix_verify;
  if (test_id == "B311") return fix_random;
  if (test_id == "B105") return fix_password;
  if (test_id == "B101") return fix_assert;
  if (test_id == "B602") return fix_shell;
  return nullptr;
}

std::string canned_explanation(std::string_view test_id) {
  if (test_id == "B101") return "assert is removed under optimisation, so the check it performs is not enforced.";
  if (test_id == "B102") return "exec runs arbitrary code; its argument is not a compile-time constant.";
  if (test_id == "B105") return "A non-placeholder string literal is assigned to a credential-like name.";
  if (test_id == "B301") return "pickle deserialization can execute arbitrary code for untrusted input.";
  if (test_id == "B306") return "mktemp leaves a race between choosing the name and creating the file.";
  if (test_id == "B311") return "The random module is predictable and unsuitable for security values.";
  if (test_id == "B324") return "The hash algorithm is broken for security use and not marked otherwise.";
  if (test_id == "B501") return "TLS certificate verification is disabled for this request.";
  if (test_id == "B506") return "yaml.load without a safe Loader can construct arbitrary objects.";
  if (test_id == "B602") return "shell=True hands the command to /bin/sh.";
  if (test_id == "B608") return "Interpolated data reaches a SQL statement string.";
  return "Finding matches the rule pattern.";
}

}  // namespace

Verdict TemplateEngine::cross_validate(const EngineRequest& request) {
  const Finding& f = request.finding;
  SyntaxModel model = parse_source(request.segment.text);
  if (f.test_id == "B105") {
    for (const auto& a : model.assignments) {
      if (a.line_range.start != 1 || a.value_col != f.col_offset || !a.literal_value) continue;
      if (a.literal_value->empty() || *a.literal_value == "<PASSWORD>") {
        return {Classification::FalsePositive, "The literal is an empty or documented placeholder value, not a secret."};
      }
    }
  }
  if (f.test_id == "B608") {
    static const std::regex sql(RuleCatalog::standard().find("B608")->matcher.literal_pattern, std::regex::icase);
    bool reaches = std::any_of(model.string_literals.begin(), model.string_literals.end(), [](const StringLiteral& s) {
      return s.interpolated && s.has_placeholder && std::regex_search(s.value, sql);
    });
    if (!reaches) {
      return {Classification::FalsePositive, "No interpolated value reaches the SQL text; the query is constant."};
    }
  }
  return {Classification::TruePositive, canned_explanation(f.test_id)};
}

PatchProposal TemplateEngine::propose_patch(const EngineRequest& request) {
  PatchProposal p;
  p.engine_id = id();
  Rewriter rewriter = rewriter_for(request.finding.test_id);
  if (!rewriter) {
    p.no_safe_fix = true;
    p.explanation = "No template fix exists for " + request.finding.test_id + "; manual review required.";
    return p;
  }
  const std::string& text = request.segment.text;
  SyntaxModel model = parse_source(text);
  auto rewrite = rewriter(text, model, request.finding);
  if (rewrite) {
    std::string patched = apply_edits(text, rewrite->edits);
    if (patched != text) {
      p.patched_segment = std::move(patched);
      p.explanation = std::move(rewrite->explanation);
      p.ensure_imports = std::move(rewrite->imports);
      return p;
    }
  }
  p.no_safe_fix = true;
  p.explanation = "The template for " + request.finding.test_id + " does not apply safely to this code.";
  return p;
}

}  // namespace securefix
