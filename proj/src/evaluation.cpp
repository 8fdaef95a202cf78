#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>

#include "securefix/corpus.h"
#include "securefix/errors.h"
#include "securefix/parallel.h"

namespace securefix {

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::ScanOnly: return "scan-only";
    case EvalMode::SinglePass: return "single-pass";
    case EvalMode::FullLoop: return "full-loop";
  }
  return "full-loop";
}

namespace {

struct FileOutcome {
  int injected = 0;
  int fixed = 0;
  std::map<std::string, RuleStats> per_rule;
  int initial_findings = 0;
  int unmatched_initial = 0;
  int verdicts = 0;
  int verdicts_agreeing = 0;
  int residual_fp = 0;
  std::optional<SessionStatus> status;
  int iterations = 0;
  int engine_calls = 0;
  int engine_unreachable = 0;
};

double percent(int num, int den) { return den == 0 ? 0.0 : 100.0 * num / den; }

FileOutcome evaluate_file(const std::filesystem::path& corpus_dir, const std::string& name,
                          const std::vector<const ManifestEntry*>& entries, Engine* engine,
                          const EvalOptions& options, const RuleCatalog& catalog) {
  auto path = corpus_dir / name;
  if (!std::filesystem::exists(path)) throw IntegrityError("manifest names a missing file: " + path.string());
  SourceFile file = SourceFile::load(path);

  std::multiset<std::string> truth;
  for (const ManifestEntry* e : entries) {
    if (e->label == Label::TruePositive) truth.insert(e->fingerprint);
  }

  FileOutcome out;
  Report initial;
  std::optional<OutputPackage> pkg;
  if (options.mode == EvalMode::ScanOnly) {
    initial = scan(file, catalog, 0);
  } else {
    SessionOptions session = options.session;
    if (options.mode == EvalMode::SinglePass) session.max_iterations = 1;
    pkg = run_session(file, *engine, catalog, session);
    initial = pkg->reports.front();
  }

  std::multiset<std::string> initial_fps;
  for (const auto& f : initial.findings) initial_fps.insert(f.fingerprint);
  for (const ManifestEntry* e : entries) {
    if (!initial_fps.contains(e->fingerprint)) {
      throw IntegrityError("manifest entry " + e->rule_id + " at " + name + ":" + std::to_string(e->injected_line) +
                           " is not present in the corpus file");
    }
    if (std::none_of(initial.findings.begin(), initial.findings.end(), [&](const Finding& f) {
          return f.fingerprint == e->fingerprint && f.test_id == e->rule_id;
        })) {
      throw IntegrityError("manifest entry rule " + e->rule_id + " does not match the finding in " + name);
    }
  }

  out.initial_findings = static_cast<int>(initial.findings.size());
  std::set<std::string> unmatched;
  for (const auto& f : initial.findings) {
    if (!truth.contains(f.fingerprint)) {
      ++out.unmatched_initial;
      unmatched.insert(f.fingerprint);
    }
  }

  bool parses = true;
  // A patch that rewrites a shared line changes the fingerprint of every
  // finding on it, so residuals are counted per rule rather than by identity.
  std::map<std::string, int> residual_by_rule;
  if (pkg) {
    parses = parse_source(pkg->final_code.text()).parse_ok;
    for (const auto& f : pkg->final_report().findings) {
      if (!unmatched.contains(f.fingerprint)) ++residual_by_rule[f.test_id];
    }
    out.status = pkg->status;
    out.iterations = pkg->iterations;
    out.engine_calls = pkg->engine_calls;
    out.engine_unreachable = pkg->engine_unreachable;

    std::set<std::string> residual;
    for (const auto& r : pkg->records) {
      if (!r.verdict) continue;
      ++out.verdicts;
      bool labelled_tp = truth.contains(r.finding.fingerprint);
      bool said_tp = r.verdict->classification == Classification::TruePositive;
      if (labelled_tp == said_tp) ++out.verdicts_agreeing;
      if (said_tp && unmatched.contains(r.finding.fingerprint)) residual.insert(r.finding.fingerprint);
    }
    out.residual_fp = static_cast<int>(residual.size());
  }

  for (const ManifestEntry* e : entries) {
    if (e->label != Label::TruePositive) continue;
    ++out.injected;
    auto& rule = out.per_rule[e->rule_id];
    ++rule.injected;
    if (pkg && parses && residual_by_rule[e->rule_id]-- <= 0) {
      ++out.fixed;
      ++rule.fixed;
    }
  }
  return out;
}

}  // namespace

EvalResult evaluate(const std::filesystem::path& corpus_dir, const std::vector<ManifestEntry>& manifest,
                    Engine* engine, const EvalOptions& options, const RuleCatalog& catalog) {
  if (options.mode != EvalMode::ScanOnly && engine == nullptr) {
    throw PreconditionError("repair evaluation requires an engine");
  }
  std::map<std::string, std::vector<const ManifestEntry*>> by_file;
  for (const auto& e : manifest) by_file[e.file].push_back(&e);
  std::vector<std::string> files;
  for (const auto& [name, entries] : by_file) files.push_back(name);

  std::vector<FileOutcome> outcomes(files.size());
  parallel_for(files.size(), options.workers, [&](std::size_t i) {
    outcomes[i] = evaluate_file(corpus_dir, files[i], by_file.at(files[i]), engine, options, catalog);
  });

  EvalResult result;
  result.mode = options.mode;
  result.configuration = options.configuration.empty() ? std::string(to_string(options.mode)) : options.configuration;
  result.files = static_cast<int>(files.size());
  int fixed = 0, unmatched = 0, verdicts = 0, agreeing = 0, residual = 0, converged = 0, iterations = 0;
  for (const auto& o : outcomes) {
    result.injected += o.injected;
    fixed += o.fixed;
    result.initial_findings += o.initial_findings;
    unmatched += o.unmatched_initial;
    verdicts += o.verdicts;
    agreeing += o.verdicts_agreeing;
    residual += o.residual_fp;
    result.engine_calls += o.engine_calls;
    result.engine_unreachable += o.engine_unreachable;
    for (const auto& [rule, stats] : o.per_rule) {
      result.per_rule[rule].injected += stats.injected;
      result.per_rule[rule].fixed += stats.fixed;
    }
    if (o.status) {
      ++result.sessions[std::string(to_string(*o.status))];
      if (*o.status == SessionStatus::Converged) {
        ++converged;
        iterations += o.iterations;
      }
    }
  }
  result.detection_fp_rate = percent(unmatched, result.initial_findings);
  if (options.mode != EvalMode::ScanOnly) {
    result.fix_accuracy = percent(fixed, result.injected);
    result.residual_fp_rate = percent(residual, result.initial_findings);
    if (verdicts > 0) result.cross_validation_accuracy = percent(agreeing, verdicts);
    if (converged > 0) result.avg_iterations = static_cast<double>(iterations) / converged;
  }
  return result;
}

nlohmann::ordered_json eval_result_to_json(const EvalResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["configuration"] = r.configuration;
  j["mode"] = to_string(r.mode);
  j["fix_accuracy"] = opt(r.fix_accuracy);
  j["detection_fp_rate"] = r.detection_fp_rate;
  j["residual_fp_rate"] = opt(r.residual_fp_rate);
  j["cross_validation_accuracy"] = opt(r.cross_validation_accuracy);
  j["avg_iterations"] = opt(r.avg_iterations);
  j["files"] = r.files;
  j["injected"] = r.injected;
  j["initial_findings"] = r.initial_findings;
  j["sessions"] = r.sessions;
  auto per_rule = nlohmann::ordered_json::object();
  for (const auto& [rule, s] : r.per_rule) per_rule[rule] = {{"injected", s.injected}, {"fixed", s.fixed}};
  j["per_rule"] = per_rule;
  return j;
}

std::string compare_configurations(const std::vector<EvalResult>& results) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("--");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return std::string(buf);
  };
  std::vector<std::array<std::string, 4>> rows = {
      {"Configuration", "Fix Accuracy (%)", "False Positives (%)", "Avg. Iterations"}};
  for (const auto& r : results) {
    bool scan_only = r.mode == EvalMode::ScanOnly;
    rows.push_back({r.configuration, fmt(r.fix_accuracy),
                    fmt(scan_only ? std::optional<double>(r.detection_fp_rate) : r.residual_fp_rate),
                    fmt(r.avg_iterations)});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      out << rows[i][c];
      if (c + 1 < 4) out << std::string(width[c] - rows[i][c].size() + 2, ' ');
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = width[0] + width[1] + width[2] + width[3] + 6;
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace securefix
