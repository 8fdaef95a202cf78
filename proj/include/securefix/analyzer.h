#pragma once

// Detection stage: a declarative Bandit-style rule catalog matched against
// the syntax model, producing Bandit-compatible reports.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "securefix/source_model.h"

namespace securefix {

enum class Level { Low, Medium, High };

std::string_view to_string(Level level);
Level parse_level(std::string_view text);

enum class MatcherKind { Call, Assignment, Statement, StringLiteral, Never };

/// Exact canonical callee, optionally constrained by a string-literal
/// positional argument (e.g. `hashlib.new("md5")`).
struct CalleePattern {
  std::string name;
  std::optional<std::size_t> literal_arg_index;
  std::vector<std::string> literal_values;  // compared case-insensitively
};

/// Keyword argument whose value (literal, or final component of a dotted
/// name) is one of `values`.
struct KeywordCondition {
  std::string keyword;
  std::vector<std::string> values;
};

struct PositionalCondition {
  std::size_t index = 0;
  std::vector<std::string> values;
};

struct RuleMatcher {
  MatcherKind kind = MatcherKind::Never;
  // Call matchers
  std::vector<CalleePattern> callees;
  std::vector<std::string> callee_prefixes;
  std::optional<KeywordCondition> required_keyword;
  std::vector<KeywordCondition> suppressing_keywords;
  std::optional<PositionalCondition> suppressing_positional;
  // Assignment matchers: case-insensitive search on the target name
  std::string target_pattern;
  // Statement matchers
  std::string statement_kind;
  // String-literal matchers: case-insensitive search on the literal value
  std::string literal_pattern;
  bool require_interpolation = false;
};

struct Rule {
  std::string test_id;
  std::string test_name;
  Level severity = Level::Low;
  Level confidence = Level::Low;
  RuleMatcher matcher;
  /// Placeholders: {literal} {hash} {module}.
  std::string message_template;
  bool has_template_fix = false;
  std::string description;
};

class RuleCatalog {
 public:
  RuleCatalog() = default;
  explicit RuleCatalog(std::vector<Rule> rules);

  /// The built-in twelve-rule catalog.
  static const RuleCatalog& standard();

  const std::vector<Rule>& rules() const { return rules_; }
  const Rule* find(std::string_view test_id) const;
  bool empty() const { return rules_.empty(); }

  /// Subsets; unknown ids throw ConfigError.
  RuleCatalog only(const std::vector<std::string>& test_ids) const;
  RuleCatalog without(const std::vector<std::string>& test_ids) const;

 private:
  std::vector<Rule> rules_;
};

struct Finding {
  std::string test_id;
  std::string test_name;
  Level severity = Level::Low;
  Level confidence = Level::Low;
  int line_number = 1;
  std::vector<int> line_range;
  int col_offset = 0;
  std::string snippet;  // flagged lines plus one context line each side
  std::string message;
  std::string fingerprint;

  LineSpan span() const { return {line_range.front(), line_range.back()}; }
  /// The flagged lines alone, sliced out of the snippet.
  std::string flagged_text() const;

  bool operator==(const Finding&) const = default;
};

/// SHA-256 over the test id and the flagged lines with each line's
/// surrounding whitespace stripped. Line numbers do not participate.
std::string fingerprint(const Finding& finding);

struct ReportError {
  std::string path;
  std::string reason;

  bool operator==(const ReportError&) const = default;
};

struct ReportMetrics {
  int total = 0;
  int low = 0;
  int medium = 0;
  int high = 0;

  bool operator==(const ReportMetrics&) const = default;
};

struct Report {
  std::string filename;
  int iteration = 0;
  std::string generated_at;
  std::vector<ReportError> errors;
  ReportMetrics metrics;
  std::vector<Finding> findings;

  bool empty() const { return findings.empty(); }
  bool operator==(const Report&) const = default;
};

/// Current UTC time as ISO-8601 with second precision and a `Z` suffix.
std::string utc_timestamp();

/// Deterministic apart from generated_at. Parse problems go to report.errors.
Report scan(const SourceFile& file, const RuleCatalog& catalog, int iteration);

/// Recomputes metrics from findings.
ReportMetrics compute_metrics(const std::vector<Finding>& findings);

nlohmann::ordered_json finding_to_json(const Finding& finding);
Finding finding_from_json(const nlohmann::json& j);

/// Canonical JSON: fixed key order, compact, newline-terminated.
std::string serialize_report(const Report& report);
/// Inverse of serialize_report. Throws std::invalid_argument on schema errors.
Report parse_report(std::string_view json_text);

struct ProgressSummary {
  std::vector<std::string> resolved;    // in previous only
  std::vector<std::string> persisting;  // in both
  std::vector<std::string> introduced;  // in current only
};

/// Multiset difference over fingerprints. Throws UsageError when the reports
/// name different files.
ProgressSummary diff_reports(const Report& previous, const Report& current);

/// Sorted fingerprints of a report (a multiset).
std::vector<std::string> fingerprint_multiset(const Report& report);

}  // namespace securefix
