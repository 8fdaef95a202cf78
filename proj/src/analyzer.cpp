#include "securefix/analyzer.h"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <regex>
#include <stdexcept>
#include <tuple>

#include "securefix/crypto.h"
#include "securefix/errors.h"

namespace securefix {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Low: return "LOW";
    case Level::Medium: return "MEDIUM";
    case Level::High: return "HIGH";
  }
  return "LOW";
}

Level parse_level(std::string_view text) {
  if (text == "LOW") return Level::Low;
  if (text == "MEDIUM") return Level::Medium;
  if (text == "HIGH") return Level::High;
  throw std::invalid_argument("unknown level " + std::string(text));
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::vector<std::string_view> split_lines_keep(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool ends = text[i] == '\n' || (text[i] == '\r' && (i + 1 >= text.size() || text[i + 1] != '\n'));
    if (ends) {
      lines.push_back(text.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < text.size()) lines.push_back(text.substr(start));
  return lines;
}

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string last_component(std::string_view dotted) {
  auto dot = dotted.rfind('.');
  return std::string(dot == std::string_view::npos ? dotted : dotted.substr(dot + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

bool value_matches(const ArgSummary& arg, const std::vector<std::string>& values) {
  if (arg.kind == ArgKind::Other) return false;
  for (const auto& v : values) {
    if (arg.value == v) return true;
    if (arg.kind == ArgKind::Name && last_component(arg.value) == v) return true;
  }
  return false;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
  }
  return out;
}

struct Match {
  const Rule* rule;
  LineSpan lines;
  int col;
  std::map<std::string, std::string> vars;
};

std::optional<std::map<std::string, std::string>> match_call(const RuleMatcher& m, const CallSite& call,
                                                             const std::string& canonical) {
  std::map<std::string, std::string> vars;
  bool hit = false;
  for (const auto& pattern : m.callees) {
    if (pattern.name != canonical) continue;
    if (pattern.literal_arg_index) {
      std::size_t idx = *pattern.literal_arg_index;
      if (idx >= call.positional_args.size()) continue;
      const auto& arg = call.positional_args[idx];
      if (arg.kind != ArgKind::StringLiteral) continue;
      auto wanted = lower(arg.value);
      if (std::find(pattern.literal_values.begin(), pattern.literal_values.end(), wanted) ==
          pattern.literal_values.end()) {
        continue;
      }
      vars["hash"] = upper(arg.value);
    } else {
      vars["hash"] = upper(last_component(canonical));
    }
    hit = true;
    break;
  }
  for (const auto& prefix : m.callee_prefixes) {
    if (!hit && canonical.starts_with(prefix) && canonical.size() > prefix.size()) hit = true;
  }
  if (!hit) return std::nullopt;
  if (m.required_keyword) {
    const KeywordArg* kw = call.keyword(m.required_keyword->keyword);
    if (kw == nullptr || !value_matches(kw->value, m.required_keyword->values)) return std::nullopt;
  }
  for (const auto& cond : m.suppressing_keywords) {
    const KeywordArg* kw = call.keyword(cond.keyword);
    if (kw != nullptr && value_matches(kw->value, cond.values)) return std::nullopt;
  }
  if (m.suppressing_positional) {
    std::size_t idx = m.suppressing_positional->index;
    if (idx < call.positional_args.size() &&
        value_matches(call.positional_args[idx], m.suppressing_positional->values)) {
      return std::nullopt;
    }
  }
  vars["module"] = canonical.substr(0, canonical.find('.'));
  return vars;
}

std::string escape_for_message(std::string_view s) {
  // Bandit renders the literal through repr-like quoting; keep it single-line.
  std::string out;
  for (char c : s) {
    if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else if (c == '\t') out += "\\t";
    else out.push_back(c);
  }
  return out;
}

std::vector<Match> collect_matches(const SyntaxModel& model, const RuleCatalog& catalog) {
  std::vector<Match> out;
  std::vector<std::string> canonical;
  canonical.reserve(model.calls.size());
  for (const auto& call : model.calls) canonical.push_back(resolve_callee(model, call));

  for (const auto& rule : catalog.rules()) {
    const RuleMatcher& m = rule.matcher;
    switch (m.kind) {
      case MatcherKind::Call:
        for (std::size_t i = 0; i < model.calls.size(); ++i) {
          if (auto vars = match_call(m, model.calls[i], canonical[i])) {
            out.push_back({&rule, model.calls[i].line_range, model.calls[i].col_offset, std::move(*vars)});
          }
        }
        break;
      case MatcherKind::Assignment: {
        std::regex pattern(m.target_pattern, std::regex::icase);
        for (const auto& a : model.assignments) {
          if (a.value_kind != ValueKind::StringLiteral || !std::regex_search(a.target_name, pattern)) continue;
          out.push_back({&rule, a.line_range, a.value_col, {{"literal", escape_for_message(*a.literal_value)}}});
        }
        break;
      }
      case MatcherKind::Statement:
        for (const auto& s : model.statements) {
          if (s.kind == m.statement_kind) out.push_back({&rule, s.line_range, s.col, {}});
        }
        break;
      case MatcherKind::StringLiteral: {
        std::regex pattern(m.literal_pattern, std::regex::icase);
        for (const auto& lit : model.string_literals) {
          if (m.require_interpolation && !lit.interpolated) continue;
          if (!std::regex_search(lit.value, pattern)) continue;
          out.push_back({&rule, lit.line_range, lit.col, {}});
        }
        break;
      }
      case MatcherKind::Never:
        break;
    }
  }
  return out;
}

}  // namespace

std::string Finding::flagged_text() const {
  if (line_range.empty()) return {};
  int context_start = line_number > 1 ? line_number - 1 : 1;
  auto lines = split_lines_keep(snippet);
  std::size_t skip = static_cast<std::size_t>(line_range.front() - context_start);
  std::size_t take = line_range.size();
  std::string out;
  for (std::size_t i = skip; i < lines.size() && i < skip + take; ++i) out += lines[i];
  return out;
}

std::string fingerprint(const Finding& finding) {
  std::string material = finding.test_id;
  const std::string flagged = finding.flagged_text();
  for (auto line : split_lines_keep(flagged)) {
    material.push_back('\n');
    material += trim(line);
  }
  return sha256_hex(material);
}

ReportMetrics compute_metrics(const std::vector<Finding>& findings) {
  ReportMetrics m;
  m.total = static_cast<int>(findings.size());
  for (const auto& f : findings) {
    switch (f.severity) {
      case Level::Low: ++m.low; break;
      case Level::Medium: ++m.medium; break;
      case Level::High: ++m.high; break;
    }
  }
  return m;
}

Report scan(const SourceFile& file, const RuleCatalog& catalog, int iteration) {
  Report report;
  report.filename = file.path().string();
  report.iteration = iteration;
  report.generated_at = utc_timestamp();

  SyntaxModel model = parse_source(file.text());
  for (const auto& err : model.parse_errors) {
    report.errors.push_back({report.filename, "line " + std::to_string(err.line) + ": " + err.message});
  }

  auto matches = collect_matches(model, catalog);
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    return std::tie(a.lines.start, a.rule->test_id, a.lines.end, a.col) <
           std::tie(b.lines.start, b.rule->test_id, b.lines.end, b.col);
  });
  matches.erase(std::unique(matches.begin(), matches.end(),
                            [](const Match& a, const Match& b) {
                              return a.rule == b.rule && a.lines == b.lines && a.col == b.col;
                            }),
                matches.end());

  for (const auto& match : matches) {
    LineSpan lines = match.lines;
    lines.end = std::min(lines.end, file.line_count());
    if (lines.start > lines.end) continue;
    Finding f;
    f.test_id = match.rule->test_id;
    f.test_name = match.rule->test_name;
    f.severity = match.rule->severity;
    f.confidence = match.rule->confidence;
    f.line_number = lines.start;
    for (int l = lines.start; l <= lines.end; ++l) f.line_range.push_back(l);
    f.col_offset = match.col;
    LineSpan context{std::max(1, lines.start - 1), std::min(file.line_count(), lines.end + 1)};
    f.snippet = extract_segment(file, context).text;
    f.message = render(match.rule->message_template, match.vars);
    f.fingerprint = fingerprint(f);
    report.findings.push_back(std::move(f));
  }
  report.metrics = compute_metrics(report.findings);
  return report;
}

nlohmann::ordered_json finding_to_json(const Finding& f) {
  nlohmann::ordered_json j;
  j["test_id"] = f.test_id;
  j["test_name"] = f.test_name;
  j["issue_severity"] = to_string(f.severity);
  j["issue_confidence"] = to_string(f.confidence);
  j["issue_text"] = f.message;
  j["line_number"] = f.line_number;
  j["line_range"] = f.line_range;
  j["col_offset"] = f.col_offset;
  j["code"] = f.snippet;
  return j;
}

Finding finding_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> kKeys = {"test_id",    "test_name",  "issue_severity",
                                                 "issue_confidence", "issue_text", "line_number",
                                                 "line_range", "col_offset", "code"};
  if (!j.is_object() || j.size() != kKeys.size()) throw std::invalid_argument("finding must have exactly nine keys");
  for (const auto& k : kKeys) {
    if (!j.contains(k)) throw std::invalid_argument("finding is missing key " + k);
  }
  Finding f;
  f.test_id = j.at("test_id").get<std::string>();
  f.test_name = j.at("test_name").get<std::string>();
  f.severity = parse_level(j.at("issue_severity").get<std::string>());
  f.confidence = parse_level(j.at("issue_confidence").get<std::string>());
  f.message = j.at("issue_text").get<std::string>();
  f.line_number = j.at("line_number").get<int>();
  f.line_range = j.at("line_range").get<std::vector<int>>();
  f.col_offset = j.at("col_offset").get<int>();
  f.snippet = j.at("code").get<std::string>();
  if (f.line_range.empty() || f.line_range.front() != f.line_number ||
      !std::is_sorted(f.line_range.begin(), f.line_range.end())) {
    throw std::invalid_argument("finding line_range must be sorted and start at line_number");
  }
  f.fingerprint = fingerprint(f);
  return f;
}

std::string serialize_report(const Report& report) {
  nlohmann::ordered_json j;
  j["filename"] = report.filename;
  j["iteration"] = report.iteration;
  j["generated_at"] = report.generated_at;
  j["errors"] = nlohmann::ordered_json::array();
  for (const auto& e : report.errors) {
    nlohmann::ordered_json ej;
    ej["path"] = e.path;
    ej["reason"] = e.reason;
    j["errors"].push_back(std::move(ej));
  }
  nlohmann::ordered_json metrics;
  metrics["total"] = report.metrics.total;
  metrics["by_severity"]["LOW"] = report.metrics.low;
  metrics["by_severity"]["MEDIUM"] = report.metrics.medium;
  metrics["by_severity"]["HIGH"] = report.metrics.high;
  j["metrics"] = std::move(metrics);
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& f : report.findings) j["results"].push_back(finding_to_json(f));
  return j.dump() + "\n";
}

Report parse_report(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("report is not valid JSON: ") + e.what());
  }
  static const std::vector<std::string> kKeys = {"filename", "iteration", "generated_at",
                                                 "errors",   "metrics",   "results"};
  if (!j.is_object() || j.size() != kKeys.size()) throw std::invalid_argument("report must have exactly six keys");
  try {
    Report r;
    r.filename = j.at("filename").get<std::string>();
    r.iteration = j.at("iteration").get<int>();
    r.generated_at = j.at("generated_at").get<std::string>();
    for (const auto& e : j.at("errors")) {
      r.errors.push_back({e.at("path").get<std::string>(), e.at("reason").get<std::string>()});
    }
    const auto& m = j.at("metrics");
    r.metrics.total = m.at("total").get<int>();
    r.metrics.low = m.at("by_severity").at("LOW").get<int>();
    r.metrics.medium = m.at("by_severity").at("MEDIUM").get<int>();
    r.metrics.high = m.at("by_severity").at("HIGH").get<int>();
    for (const auto& f : j.at("results")) r.findings.push_back(finding_from_json(f));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("report schema violation: ") + e.what());
  }
}

std::vector<std::string> fingerprint_multiset(const Report& report) {
  std::vector<std::string> out;
  out.reserve(report.findings.size());
  for (const auto& f : report.findings) out.push_back(f.fingerprint);
  std::sort(out.begin(), out.end());
  return out;
}

ProgressSummary diff_reports(const Report& previous, const Report& current) {
  if (previous.filename != current.filename) {
    throw UsageError("cannot diff reports for different files: " + previous.filename + " vs " + current.filename);
  }
  auto before = fingerprint_multiset(previous);
  auto after = fingerprint_multiset(current);
  ProgressSummary summary;
  std::set_difference(before.begin(), before.end(), after.begin(), after.end(), std::back_inserter(summary.resolved));
  std::set_intersection(before.begin(), before.end(), after.begin(), after.end(),
                        std::back_inserter(summary.persisting));
  std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                      std::back_inserter(summary.introduced));
  return summary;
}

}  // namespace securefix
