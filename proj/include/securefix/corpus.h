#pragma once

// Vulnerability injection corpus with a ground-truth manifest, and the
// evaluation harness that scores sessions against it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "securefix/analyzer.h"
#include "securefix/engine.h"
#include "securefix/orchestrator.h"

namespace securefix {

enum class Label { TruePositive, FalsePositive };
std::string_view to_string(Label label);

/// A single-line injectable statement. `{v}` is replaced by a fresh
/// identifier and `{V}` by its upper-case form.
struct VulnTemplate {
  std::string rule_id;
  /// Rules the snippet triggers, primary first. Cascade templates trigger two
  /// findings on one line, so the second is only repaired in a later iteration.
  std::vector<std::string> rule_ids;
  std::string snippet;
  std::vector<std::string> required_imports;
  std::optional<std::string> fixed_form;
  std::vector<std::string> fixed_imports;
  bool module_level = true;
  bool function_body = true;
  Label label = Label::TruePositive;
};

/// One template per live catalog rule.
const std::vector<VulnTemplate>& vuln_templates();
/// Two-finding templates, all of them template-fixable.
const std::vector<VulnTemplate>& cascade_templates();
/// Scanner-flagged but benign plants (labelled false_positive).
const std::vector<VulnTemplate>& false_positive_templates();
const VulnTemplate* template_for(std::string_view rule_id);

std::string render_template(std::string_view text, std::string_view name);

struct ManifestEntry {
  std::string file;
  std::string rule_id;
  int injected_line = 0;
  std::string fingerprint;
  std::uint64_t seed = 0;
  Label label = Label::TruePositive;

  bool operator==(const ManifestEntry&) const = default;
};

nlohmann::ordered_json manifest_to_json(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> manifest_from_json(const nlohmann::json& j);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);  // throws IntegrityError

struct Injection {
  SourceFile file;
  std::vector<ManifestEntry> entries;  // file field left empty
};

/// Throws PreconditionError if `clean` has findings, PlacementError if no
/// legal insertion point exists.
Injection inject(const SourceFile& clean, const VulnTemplate& tmpl, std::uint64_t seed,
                 const RuleCatalog& catalog = RuleCatalog::standard());

struct CorpusOptions {
  int count = 10;
  std::uint64_t seed = 0;
  /// Rules to inject, round-robin. Empty: every rule with a template.
  std::vector<std::string> rules;
  /// Use cascade templates instead of single-rule ones.
  bool cascade = false;
  /// Probability that a file also receives one false-positive plant.
  double fp_plant_rate = 0.0;
};

/// Rules whose template is fixable by the template engine.
std::vector<std::string> template_fixable_rules(const RuleCatalog& catalog = RuleCatalog::standard());

std::vector<SourceFile> load_base_files(const std::filesystem::path& dir);

/// Writes file_NNNN.py and manifest.json into out_dir. Throws UsageError on an
/// empty base set or count < 1, PreconditionError if a base file is not clean.
std::vector<ManifestEntry> generate_corpus(const std::vector<SourceFile>& base, const std::filesystem::path& out_dir,
                                           const CorpusOptions& options,
                                           const RuleCatalog& catalog = RuleCatalog::standard());

// ---------------------------------------------------------------------------
// Evaluation

enum class EvalMode { ScanOnly, SinglePass, FullLoop };
std::string_view to_string(EvalMode mode);

struct EvalOptions {
  EvalMode mode = EvalMode::FullLoop;
  SessionOptions session;  // max_iterations is forced to 1 in single-pass mode
  unsigned workers = 0;    // 0 = hardware concurrency
  std::string configuration;  // row label; defaults from mode
};

struct RuleStats {
  int injected = 0;
  int fixed = 0;

  bool operator==(const RuleStats&) const = default;
};

struct EvalResult {
  std::string configuration;
  EvalMode mode = EvalMode::FullLoop;
  std::optional<double> fix_accuracy;
  double detection_fp_rate = 0.0;
  std::optional<double> cross_validation_accuracy;
  std::optional<double> avg_iterations;
  std::optional<double> residual_fp_rate;
  std::map<std::string, RuleStats> per_rule;
  std::map<std::string, int> sessions;  // status -> count
  int files = 0;
  int injected = 0;
  int initial_findings = 0;
  int engine_calls = 0;
  int engine_unreachable = 0;
};

/// Throws IntegrityError when the manifest does not match the corpus.
EvalResult evaluate(const std::filesystem::path& corpus_dir, const std::vector<ManifestEntry>& manifest,
                    Engine* engine, const EvalOptions& options, const RuleCatalog& catalog = RuleCatalog::standard());

nlohmann::ordered_json eval_result_to_json(const EvalResult& result);

/// Aligned plain-text table: configuration, fix accuracy, false positives,
/// average iterations. Missing values print as "--".
std::string compare_configurations(const std::vector<EvalResult>& results);

}  // namespace securefix
