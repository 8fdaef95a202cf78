#include "securefix/orchestrator.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "securefix/errors.h"

namespace securefix {

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::EngineError: return "engine-error";
    case FailureReason::Malformed: return "malformed";
    case FailureReason::NoSafeFix: return "no-safe-fix";
    case FailureReason::StaleSplice: return "stale-splice";
  }
  return "engine-error";
}

namespace {

FailureReason parse_failure_reason(std::string_view text) {
  for (auto r : {FailureReason::EngineError, FailureReason::Malformed, FailureReason::NoSafeFix,
                 FailureReason::StaleSplice}) {
    if (to_string(r) == text) return r;
  }
  throw std::invalid_argument("unknown failure_reason " + std::string(text));
}

}  // namespace

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::Converged: return "converged";
    case SessionStatus::IterationLimit: return "iteration_limit";
    case SessionStatus::NoProgress: return "no_progress";
  }
  return "converged";
}

SessionStatus parse_session_status(std::string_view text) {
  if (text == "converged") return SessionStatus::Converged;
  if (text == "iteration_limit") return SessionStatus::IterationLimit;
  if (text == "no_progress") return SessionStatus::NoProgress;
  throw std::invalid_argument("unknown session status " + std::string(text));
}

nlohmann::ordered_json record_to_json(const RepairRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["finding"] = finding_to_json(r.finding);
  if (r.verdict) {
    j["verdict"]["classification"] = to_string(r.verdict->classification);
    j["verdict"]["explanation"] = r.verdict->explanation;
  } else {
    j["verdict"] = nullptr;
  }
  if (r.proposal) {
    auto& p = j["proposal"];
    p["patched_segment"] = r.proposal->patched_segment;
    p["explanation"] = r.proposal->explanation;
    p["no_safe_fix"] = r.proposal->no_safe_fix;
    p["engine_id"] = r.proposal->engine_id;
    p["ensure_imports"] = r.proposal->ensure_imports;
  } else {
    j["proposal"] = nullptr;
  }
  j["applied"] = r.applied;
  if (r.failure_reason) j["failure_reason"] = to_string(*r.failure_reason);
  else j["failure_reason"] = nullptr;
  return j;
}

RepairRecord record_from_json(const nlohmann::json& j) {
  RepairRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.finding = finding_from_json(j.at("finding"));
  if (!j.at("verdict").is_null()) {
    const auto& v = j.at("verdict");
    Verdict verdict;
    verdict.classification = v.at("classification") == "true_positive" ? Classification::TruePositive
                                                                        : Classification::FalsePositive;
    verdict.explanation = v.at("explanation").get<std::string>();
    r.verdict = verdict;
  }
  if (!j.at("proposal").is_null()) {
    const auto& p = j.at("proposal");
    PatchProposal proposal;
    proposal.patched_segment = p.at("patched_segment").get<std::string>();
    proposal.explanation = p.at("explanation").get<std::string>();
    proposal.no_safe_fix = p.at("no_safe_fix").get<bool>();
    proposal.engine_id = p.at("engine_id").get<std::string>();
    proposal.ensure_imports = p.at("ensure_imports").get<std::vector<std::string>>();
    r.proposal = proposal;
  }
  r.applied = j.at("applied").get<bool>();
  if (!j.at("failure_reason").is_null()) {
    r.failure_reason = parse_failure_reason(j.at("failure_reason").get<std::string>());
  }
  return r;
}

bool detect_no_progress(const Report& previous, const Report& current) {
  return fingerprint_multiset(previous) == fingerprint_multiset(current);
}

namespace {

struct LoopState {
  SourceFile code;
  std::map<std::string, int> attempts;
  std::vector<RepairRecord> records;
  int calls = 0;
  int unreachable = 0;
};

FailureReason classify(const EngineError& e, LoopState& state) {
  if (e.kind() == EngineErrorKind::EngineUnreachable) ++state.unreachable;
  return e.malformed() ? FailureReason::Malformed : FailureReason::EngineError;
}

bool segment_current(const SourceFile& code, const CodeSegment& seg) {
  if (seg.line_range.end > code.line_count()) return false;
  return extract_segment(code, seg.line_range).text == seg.text;
}

void apply_iteration(LoopState& state, const Report& report, int iteration, Engine& engine, const RuleCatalog& catalog,
                     const SessionOptions& options) {
  const SourceFile snapshot = state.code;
  std::vector<const Finding*> order;
  for (const auto& f : report.findings) order.push_back(&f);
  std::stable_sort(order.begin(), order.end(), [](const Finding* a, const Finding* b) {
    if (a->line_number != b->line_number) return a->line_number > b->line_number;
    if (a->test_id != b->test_id) return a->test_id > b->test_id;
    return a->col_offset > b->col_offset;
  });

  std::vector<std::string> imports;
  for (const Finding* finding : order) {
    RepairRecord rec;
    rec.iteration = iteration;
    rec.finding = *finding;
    CodeSegment seg = extract_segment(snapshot, finding->span());

    if (!segment_current(state.code, seg)) {
      rec.failure_reason = FailureReason::StaleSplice;
      state.records.push_back(std::move(rec));
      continue;
    }
    int& attempts = state.attempts[finding->fingerprint];
    if (attempts >= options.attempt_cap) {
      rec.failure_reason = FailureReason::EngineError;
      state.records.push_back(std::move(rec));
      continue;
    }
    ++attempts;

    EngineRequest request;
    request.task = Task::CrossValidate;
    request.finding = *finding;
    request.segment = seg;
    request.excerpt = finding_to_json(*finding).dump();
    request.context = build_context(state.code, seg.line_range, options.context_budget);
    request.file_name = state.code.path().filename().string();
    request.iteration = iteration;
    if (const Rule* rule = catalog.find(finding->test_id)) request.rule_description = rule->description;

    try {
      ++state.calls;
      rec.verdict = engine.cross_validate(request);
    } catch (const EngineError& e) {
      rec.failure_reason = classify(e, state);
      state.records.push_back(std::move(rec));
      continue;
    }
    if (rec.verdict->classification == Classification::FalsePositive) {
      state.records.push_back(std::move(rec));
      continue;
    }

    request.task = Task::ProposePatch;
    try {
      ++state.calls;
      rec.proposal = engine.propose_patch(request);
    } catch (const EngineError& e) {
      rec.failure_reason = classify(e, state);
      state.records.push_back(std::move(rec));
      continue;
    }
    if (rec.proposal->no_safe_fix) {
      rec.failure_reason = FailureReason::NoSafeFix;
      state.records.push_back(std::move(rec));
      continue;
    }

    std::string patched = rec.proposal->patched_segment;
    if (!patched.empty() && seg.text.ends_with('\n') && !patched.ends_with('\n')) patched += snapshot.newline();
    try {
      state.code = splice_segment(state.code, seg, patched);
      rec.applied = true;
      for (const auto& m : rec.proposal->ensure_imports) imports.push_back(m);
    } catch (const StaleSegmentError&) {
      rec.failure_reason = FailureReason::StaleSplice;
    }
    state.records.push_back(std::move(rec));
  }
  if (!imports.empty()) state.code = insert_imports(state.code, imports);
}

}  // namespace

OutputPackage run_session(const SourceFile& file, Engine& engine, const RuleCatalog& catalog,
                          const SessionOptions& options) {
  if (options.max_iterations < 1) throw PreconditionError("max_iterations must be >= 1");
  OutputPackage pkg;
  pkg.original_code = file;
  pkg.config_digest = options.config_digest;
  pkg.engine_id = engine.id();

  LoopState state;
  state.code = file;
  int i = 0;
  while (true) {
    pkg.reports.push_back(scan(state.code, catalog, static_cast<int>(pkg.reports.size())));
    const Report& current = pkg.reports.back();
    if (current.empty()) {
      pkg.status = SessionStatus::Converged;
      break;
    }
    if (pkg.reports.size() >= 2 && detect_no_progress(pkg.reports[pkg.reports.size() - 2], current)) {
      pkg.status = SessionStatus::NoProgress;
      break;
    }
    if (i >= options.max_iterations) {
      pkg.status = SessionStatus::IterationLimit;
      break;
    }
    apply_iteration(state, current, i, engine, catalog, options);
    ++i;
  }
  pkg.iterations = i;
  pkg.final_code = std::move(state.code);
  pkg.records = std::move(state.records);
  pkg.engine_calls = state.calls;
  pkg.engine_unreachable = state.unreachable;
  return pkg;
}

namespace {

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (out) out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::filesystem::path> write_package(const OutputPackage& pkg, const std::filesystem::path& out_dir,
                                                 const std::optional<AesKey>& key) {
  std::error_code ec;
  std::filesystem::remove_all(out_dir / "reports", ec);
  for (const char* stale : {"original.py", "patched.py", "records.json"}) {
    std::filesystem::remove(out_dir / stale, ec);
    std::filesystem::remove(out_dir / (std::string(stale) + ".enc"), ec);
  }
  std::filesystem::create_directories(out_dir / "reports", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "reports").string() + ": " + ec.message());

  std::vector<std::pair<std::string, std::string>> artifacts;
  artifacts.emplace_back("original.py", pkg.original_code.text());
  artifacts.emplace_back("patched.py", pkg.final_code.text());
  for (std::size_t k = 0; k < pkg.reports.size(); ++k) {
    std::string name = "final.json";
    if (k + 1 < pkg.reports.size()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "iter_%03zu.json", k);
      name = buf;
    }
    artifacts.emplace_back("reports/" + name, serialize_report(pkg.reports[k]));
  }
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& r : pkg.records) records.push_back(record_to_json(r));
  artifacts.emplace_back("records.json", records.dump(2) + "\n");

  std::vector<std::filesystem::path> written;
  for (const auto& [name, data] : artifacts) {
    auto path = out_dir / (key ? name + ".enc" : name);
    write_file(path, key ? encrypt_artifact(data, *key) : data);
    written.push_back(path);
  }

  nlohmann::ordered_json session;
  session["status"] = to_string(pkg.status);
  session["iterations"] = pkg.iterations;
  session["findings_initial"] = pkg.reports.front().findings.size();
  session["findings_final"] = pkg.final_report().findings.size();
  session["config_digest"] = pkg.config_digest;
  session["engine_id"] = pkg.engine_id;
  auto session_path = out_dir / "session.json";
  write_file(session_path, session.dump(2) + "\n");
  written.push_back(session_path);
  return written;
}

std::map<std::string, std::string> read_package(const std::filesystem::path& dir, const std::optional<AesKey>& key) {
  std::map<std::string, std::string> contents;
  if (!std::filesystem::is_directory(dir)) throw IoError("not a package directory: " + dir.string());
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = std::filesystem::relative(entry.path(), dir).generic_string();
    std::string data = read_file(entry.path());
    if (rel.ends_with(".enc")) {
      if (!key) throw ConfigError("package is encrypted and no key was supplied");
      data = decrypt_artifact(data, *key);
      rel.resize(rel.size() - 4);
    }
    contents[rel] = std::move(data);
  }
  return contents;
}

std::string package_digest(const std::map<std::string, std::string>& contents) {
  std::string material;
  for (const auto& [name, data] : contents) {
    std::string canonical = data;
    if (name.starts_with("reports/")) {
      auto j = nlohmann::ordered_json::parse(data, nullptr, false);
      if (!j.is_discarded() && j.is_object() && j.contains("generated_at")) {
        j["generated_at"] = "";
        canonical = j.dump();
      }
    }
    material += name;
    material.push_back('\0');
    material += std::to_string(canonical.size());
    material.push_back('\0');
    material += canonical;
  }
  return sha256_hex(material);
}

}  // namespace securefix
